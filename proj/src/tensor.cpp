#include "pmnet/tensor.hpp"

#include <sstream>

#include "pmnet/error.hpp"

namespace pmnet {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, bool rg) : shape(std::move(s)), requires_grad(rg) {
  values = Vector::Zero(shape_size(shape));
}

Tensor::Tensor(Shape s, Vector v, bool rg) : shape(std::move(s)), values(std::move(v)), requires_grad(rg) {
  if (values.size() != shape_size(shape)) {
    throw DimensionError("tensor of shape " + shape_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) {
  Vector v(1);
  v[0] = value;
  return Tensor({}, std::move(v));
}

Tensor Tensor::from(Shape s, std::initializer_list<double> v) {
  Vector values(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) values[i++] = x;
  return Tensor(std::move(s), std::move(values));
}

double Tensor::item() const {
  if (values.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape));
  return values[0];
}

void Tensor::zero_grad() { grad = Vector::Zero(values.size()); }

ConstMatrixMap Tensor::matrix() const {
  if (shape.size() != 2) throw DimensionError("matrix view of non-2-D tensor " + shape_string(shape));
  return ConstMatrixMap(values.data(), shape[0], shape[1]);
}

MatrixMap Tensor::matrix() {
  if (shape.size() != 2) throw DimensionError("matrix view of non-2-D tensor " + shape_string(shape));
  return MatrixMap(values.data(), shape[0], shape[1]);
}

}  // namespace pmnet
