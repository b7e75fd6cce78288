#ifndef PMNET_TENSOR_HPP_
#define PMNET_TENSOR_HPP_

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace pmnet {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Dimensions, outermost first. An empty shape denotes a scalar.
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major 64-bit tensor. A tensor bound to a tape as a parameter
// receives its gradient in `grad`.
struct Tensor {
  Shape shape;
  Vector values;
  bool requires_grad = false;
  std::optional<Vector> grad;

  Tensor() = default;
  explicit Tensor(Shape s, bool requires_grad = false);
  Tensor(Shape s, Vector v, bool requires_grad = false);

  static Tensor scalar(double value);
  static Tensor from(Shape s, std::initializer_list<double> v);

  Index size() const { return values.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }
  Index dim(Index axis) const { return shape.at(static_cast<std::size_t>(axis)); }
  double item() const;

  // Sets grad to zeros of the right length.
  void zero_grad();

  // Row-major matrix views; the tensor must be 2-D.
  ConstMatrixMap matrix() const;
  MatrixMap matrix();
};

}  // namespace pmnet

#endif  // PMNET_TENSOR_HPP_
