#ifndef PMNET_AUTODIFF_HPP_
#define PMNET_AUTODIFF_HPP_

#include <functional>
#include <span>
#include <vector>

#include "pmnet/tensor.hpp"

namespace pmnet {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  const Shape& shape() const;
  const Vector& value() const;
  Index size() const { return value().size(); }
  double item() const;
  Tensor tensor() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// list is always topologically sorted.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records a value that never receives a gradient.
  Var constant(Tensor t);
  // Binds an external tensor. Its values are read in place and, when
  // `requires_grad` is set, backward() accumulates into `t.grad`.
  Var parameter(Tensor& t);
  // Binds an external tensor read-only; it never receives a gradient.
  Var view(const Tensor& t);

  // Appends an operation node. `backward` reads adjoint(self) and adds into
  // the adjoints of `inputs`; it is skipped when no input needs a gradient.
  Var record(Shape shape, Vector value, std::vector<int> inputs, BackwardFn backward);

  // Populates gradients for every bound requires_grad tensor; unused ones
  // get zeros. Gradients accumulate across calls on distinct tapes.
  void backward(Var loss);

  const Shape& shape(int id) const { return nodes_[static_cast<std::size_t>(id)].shape; }
  const Vector& value(int id) const;
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  // Adjoint storage for `id`, allocated lazily. Only valid during backward().
  Vector& adjoint(int id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    Vector value;
    const Tensor* bound = nullptr;
    Tensor* grad_target = nullptr;
    std::vector<int> inputs;
    BackwardFn backward;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<Vector> adjoints_;
};

// Elementary operations. All take their operands' tape from the first argument.

// Same-shape sum, or adding a vector across the rows of a matrix
// (b's length must equal a's last dimension).
Var add(Var a, Var b);
// Elementwise product of equal shapes; `b` may also be a scalar.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// [r x k] * [k x c], or [r x k] * [c x k]^T when transpose_b is set.
Var matmul(Var a, Var b, bool transpose_b = false);
// Concatenation of equal-rank tensors along `axis`.
Var concat(std::span<const Var> parts, Index axis);
Var tanh(Var a);
Var sigmoid(Var a);
// Log-sum-exp over the last axis; a vector reduces to a scalar.
Var logsumexp(Var a);
// Row-wise cosine similarity over the last axis with norms clamped at eps.
// Vectors give a scalar; [N x d] operands give a length-N vector.
Var cosine_sim(Var u, Var v, double eps = 1e-8);
// Zero-padded "same" cross-correlation: input [H x W x C_in],
// filters [k_h x k_w x C_in x C_out], bias [C_out].
Var conv2d_same(Var input, Var filters, Var bias);
// Max over windows of `window` elements taken every `stride` along `axis`;
// the final partial window is padded with -inf. Gradient goes to the first
// maximal element of each window.
Var max_pool_axis(Var input, Index axis, Index window, Index stride);
// One LSTM cell update. `state` is [h; c] of length 2H; the result has the
// same layout. Gate order in the weight rows is input, forget, candidate, output.
Var lstm_step(Var x, Var state, Var w_input, Var w_hidden, Var bias);
// Row gather from a 2-D table; the output is [ids.size() x cols].
Var embedding_lookup(Var table, std::span<const Index> ids);
// Multiplies by a fixed (already rescaled) dropout mask of the operand's shape.
Var dropout_apply(Var a, const Tensor& mask);

// Shape plumbing and reductions used to wire the catalog together.
Var reshape(Var a, Shape shape);
// [A x B x C] -> [B x A x C].
Var swap_axes01(Var a);
// Contiguous range of the flattened values.
Var slice(Var a, Index offset, Index length);
Var sum(Var a);
Var dot(Var a, Var b);

}  // namespace pmnet

#endif  // PMNET_AUTODIFF_HPP_
