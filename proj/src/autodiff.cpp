#include "pmnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmnet/error.hpp"

namespace pmnet {

// ---------------------------------------------------------------------------
// Var / Tape

const Shape& Var::shape() const { return tape_->shape(id_); }
const Vector& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  if (size() != 1) throw DimensionError("item() on value of shape " + shape_string(shape()));
  return value()[0];
}

Tensor Var::tensor() const { return Tensor(shape(), value()); }

const Vector& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.bound ? n.bound->values : n.value;
}

Var Tape::constant(Tensor t) {
  Node n;
  n.shape = std::move(t.shape);
  n.value = std::move(t.values);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Tensor& t) {
  Var v = view(t);
  Node& n = nodes_.back();
  n.grad_target = t.requires_grad ? &t : nullptr;
  n.needs_grad = t.requires_grad;
  return v;
}

Var Tape::view(const Tensor& t) {
  if (t.values.size() != shape_size(t.shape)) {
    throw DimensionError("parameter of shape " + shape_string(t.shape) + " holds " +
                         std::to_string(t.values.size()) + " values");
  }
  Node n;
  n.shape = t.shape;
  n.bound = &t;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Shape shape, Vector value, std::vector<int> inputs, BackwardFn backward) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  for (int in : inputs) n.needs_grad = n.needs_grad || needs_grad(in);
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Vector& Tape::adjoint(int id) {
  Vector& a = adjoints_[static_cast<std::size_t>(id)];
  if (a.size() == 0) a = Vector::Zero(value(id).size());
  return a;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward() on a value from another tape");
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  adjoints_.assign(nodes_.size(), Vector());
  adjoint(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || !n.backward || adjoints_[static_cast<std::size_t>(id)].size() == 0) continue;
    n.backward(*this, id);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    Tensor* t = n.grad_target;
    if (!t) continue;
    if (!t->grad || t->grad->size() != t->values.size()) t->zero_grad();
    if (adjoints_[id].size() != 0) *t->grad += adjoints_[id];
  }
  adjoints_.clear();
}

// ---------------------------------------------------------------------------
// helpers

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

void accumulate(Tape& t, int id, const Vector& delta) {
  if (t.needs_grad(id)) t.adjoint(id) += delta;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const char* op, Var a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
  }
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

// ---------------------------------------------------------------------------
// arithmetic

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const int ia = a.id(), ib = b.id();
  if (a.shape() == b.shape()) {
    return t.record(a.shape(), a.value() + b.value(), {ia, ib}, [ia, ib](Tape& tp, int self) {
      const Vector& g = tp.adjoint(self);
      accumulate(tp, ia, g);
      accumulate(tp, ib, g);
    });
  }
  if (b.shape().size() == 1 && !a.shape().empty() && a.shape().back() == b.shape()[0]) {
    const Index cols = b.shape()[0];
    const Index rows = a.size() / cols;
    Vector out = a.value();
    MatrixMap(out.data(), rows, cols).rowwise() += b.value().transpose();
    return t.record(a.shape(), std::move(out), {ia, ib}, [ia, ib, rows, cols](Tape& tp, int self) {
      const Vector& g = tp.adjoint(self);
      accumulate(tp, ia, g);
      if (tp.needs_grad(ib)) tp.adjoint(ib) += ConstMatrixMap(g.data(), rows, cols).colwise().sum().transpose();
    });
  }
  throw DimensionError("add: cannot combine " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const int ia = a.id(), ib = b.id();
  if (a.shape() == b.shape()) {
    return t.record(a.shape(), a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& tp, int self) {
      const Vector& g = tp.adjoint(self);
      if (tp.needs_grad(ia)) tp.adjoint(ia) += g.cwiseProduct(tp.value(ib));
      if (tp.needs_grad(ib)) tp.adjoint(ib) += g.cwiseProduct(tp.value(ia));
    });
  }
  if (b.size() == 1) {
    return t.record(a.shape(), a.value() * b.value()[0], {ia, ib}, [ia, ib](Tape& tp, int self) {
      const Vector& g = tp.adjoint(self);
      if (tp.needs_grad(ia)) tp.adjoint(ia) += g * tp.value(ib)[0];
      if (tp.needs_grad(ib)) tp.adjoint(ib)[0] += g.dot(tp.value(ia));
    });
  }
  throw DimensionError("mul: cannot combine " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

Var scale(Var a, double factor) {
  const int ia = a.id();
  return a.tape().record(a.shape(), a.value() * factor, {ia}, [ia, factor](Tape& tp, int self) {
    accumulate(tp, ia, tp.adjoint(self) * factor);
  });
}

Var matmul(Var a, Var b, bool transpose_b) {
  Tape& t = same_tape(a, b);
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const Index r = a.shape()[0], k = a.shape()[1];
  const Index bk = transpose_b ? b.shape()[1] : b.shape()[0];
  const Index c = transpose_b ? b.shape()[0] : b.shape()[1];
  if (k != bk) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                         (transpose_b ? " x T" : " x ") + shape_string(b.shape()));
  }
  ConstMatrixMap am(a.value().data(), r, k);
  ConstMatrixMap bm(b.value().data(), b.shape()[0], b.shape()[1]);
  Vector out(r * c);
  MatrixMap om(out.data(), r, c);
  if (transpose_b) {
    om.noalias() = am * bm.transpose();
  } else {
    om.noalias() = am * bm;
  }
  const int ia = a.id(), ib = b.id();
  const Index b0 = b.shape()[0], b1 = b.shape()[1];
  return t.record({r, c}, std::move(out), {ia, ib}, [=](Tape& tp, int self) {
    ConstMatrixMap g(tp.adjoint(self).data(), r, c);
    ConstMatrixMap am2(tp.value(ia).data(), r, k);
    ConstMatrixMap bm2(tp.value(ib).data(), b0, b1);
    if (tp.needs_grad(ia)) {
      MatrixMap ga(tp.adjoint(ia).data(), r, k);
      if (transpose_b) {
        ga.noalias() += g * bm2;
      } else {
        ga.noalias() += g * bm2.transpose();
      }
    }
    if (tp.needs_grad(ib)) {
      MatrixMap gb(tp.adjoint(ib).data(), b0, b1);
      if (transpose_b) {
        gb.noalias() += g.transpose() * am2;
      } else {
        gb.noalias() += am2.transpose() * g;
      }
    }
  });
}

Var concat(std::span<const Var> parts, Index axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  Tape& t = parts[0].tape();
  const Shape& first = parts[0].shape();
  if (axis < 0 || axis >= static_cast<Index>(first.size())) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  }
  const auto ax = static_cast<std::size_t>(axis);
  Index outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= first[d];
  for (std::size_t d = ax + 1; d < first.size(); ++d) inner *= first[d];

  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<int> ids;
  std::vector<Index> chunk;  // per-part contiguous block length within one outer slice
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw ContractError("concat: operands recorded on different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == ax || s[d] == first[d];
    if (!ok) throw DimensionError("concat: incompatible " + shape_string(s) + " vs " + shape_string(first));
    out_shape[ax] += s[ax];
    ids.push_back(p.id());
    chunk.push_back(s[ax] * inner);
  }
  Index row = 0;
  for (Index c : chunk) row += c;
  Vector out(outer * row);
  for (Index o = 0; o < outer; ++o) {
    Index off = o * row;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      out.segment(off, chunk[p]) = parts[p].value().segment(o * chunk[p], chunk[p]);
      off += chunk[p];
    }
  }
  return t.record(std::move(out_shape), std::move(out), ids, [ids, chunk, outer, row](Tape& tp, int self) {
    const Vector& g = tp.adjoint(self);
    for (Index o = 0; o < outer; ++o) {
      Index off = o * row;
      for (std::size_t p = 0; p < ids.size(); ++p) {
        if (tp.needs_grad(ids[p])) tp.adjoint(ids[p]).segment(o * chunk[p], chunk[p]) += g.segment(off, chunk[p]);
        off += chunk[p];
      }
    }
  });
}

Var tanh(Var a) {
  const int ia = a.id();
  Vector out = a.value().array().tanh().matrix();
  return a.tape().record(a.shape(), out, {ia}, [ia, out](Tape& tp, int self) {
    accumulate(tp, ia, (tp.adjoint(self).array() * (1.0 - out.array().square())).matrix());
  });
}

Var sigmoid(Var a) {
  const int ia = a.id();
  Vector out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().record(a.shape(), out, {ia}, [ia, out](Tape& tp, int self) {
    accumulate(tp, ia, (tp.adjoint(self).array() * out.array() * (1.0 - out.array())).matrix());
  });
}

Var logsumexp(Var a) {
  if (a.shape().empty()) throw DimensionError("logsumexp: scalar operand");
  const Index cols = a.shape().back();
  const Index rows = a.size() / cols;
  ConstMatrixMap x(a.value().data(), rows, cols);
  Vector out(rows);
  RowMatrix soft(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const double mx = x.row(r).maxCoeff();
    soft.row(r) = (x.row(r).array() - mx).exp().matrix();
    const double s = soft.row(r).sum();
    out[r] = mx + std::log(s);
    soft.row(r) /= s;
  }
  const int ia = a.id();
  return a.tape().record(drop_last(a.shape()), std::move(out), {ia}, [ia, soft, rows, cols](Tape& tp, int self) {
    if (!tp.needs_grad(ia)) return;
    const Vector& g = tp.adjoint(self);
    MatrixMap ga(tp.adjoint(ia).data(), rows, cols);
    for (Index r = 0; r < rows; ++r) ga.row(r) += g[r] * soft.row(r);
  });
}

Var cosine_sim(Var u, Var v, double eps) {
  Tape& t = same_tape(u, v);
  if (!(eps > 0)) throw ParameterError("cosine_sim: eps must be positive");
  require_same_shape("cosine_sim", u, v);
  if (u.shape().empty()) throw DimensionError("cosine_sim: scalar operands");
  const Index d = u.shape().back();
  const Index rows = u.size() / d;
  ConstMatrixMap um(u.value().data(), rows, d);
  ConstMatrixMap vm(v.value().data(), rows, d);
  Vector out(rows), nu(rows), nv(rows), dots(rows);
  for (Index r = 0; r < rows; ++r) {
    dots[r] = um.row(r).dot(vm.row(r));
    nu[r] = um.row(r).norm();
    nv[r] = vm.row(r).norm();
    out[r] = dots[r] / (std::max(nu[r], eps) * std::max(nv[r], eps));
  }
  const int iu = u.id(), iv = v.id();
  return t.record(drop_last(u.shape()), out, {iu, iv}, [=](Tape& tp, int self) {
    const Vector& g = tp.adjoint(self);
    ConstMatrixMap um2(tp.value(iu).data(), rows, d);
    ConstMatrixMap vm2(tp.value(iv).data(), rows, d);
    const bool gu = tp.needs_grad(iu), gv = tp.needs_grad(iv);
    for (Index r = 0; r < rows; ++r) {
      if (g[r] == 0.0) continue;
      const double cu = std::max(nu[r], eps), cv = std::max(nv[r], eps);
      const double inv = 1.0 / (cu * cv);
      if (gu) {
        auto row = MatrixMap(tp.adjoint(iu).data(), rows, d).row(r);
        row += g[r] * inv * vm2.row(r);
        if (nu[r] > eps) row -= g[r] * out[r] / (nu[r] * nu[r]) * um2.row(r);
      }
      if (gv) {
        auto row = MatrixMap(tp.adjoint(iv).data(), rows, d).row(r);
        row += g[r] * inv * um2.row(r);
        if (nv[r] > eps) row -= g[r] * out[r] / (nv[r] * nv[r]) * vm2.row(r);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// convolution and pooling

Var conv2d_same(Var input, Var filters, Var bias) {
  Tape& t = same_tape(input, filters);
  require_rank("conv2d_same input", input, 3);
  require_rank("conv2d_same filters", filters, 4);
  require_rank("conv2d_same bias", bias, 1);
  const Index H = input.shape()[0], W = input.shape()[1], C = input.shape()[2];
  const Index kh = filters.shape()[0], kw = filters.shape()[1], O = filters.shape()[3];
  if (filters.shape()[2] != C) {
    throw DimensionError("conv2d_same: input has " + std::to_string(C) + " channels, filters expect " +
                         std::to_string(filters.shape()[2]));
  }
  if (bias.shape()[0] != O) throw DimensionError("conv2d_same: bias length differs from output channels");
  const Index ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const Index K = kh * kw * C;

  // im2col: one row per output position, one column per (dy, dx, c) tap.
  RowMatrix cols = RowMatrix::Zero(H * W, K);
  const Vector& x = input.value();
  for (Index y = 0; y < H; ++y) {
    for (Index xx = 0; xx < W; ++xx) {
      const Index row = y * W + xx;
      for (Index dy = 0; dy < kh; ++dy) {
        const Index sy = y + dy - ph;
        if (sy < 0 || sy >= H) continue;
        for (Index dx = 0; dx < kw; ++dx) {
          const Index sx = xx + dx - pw;
          if (sx < 0 || sx >= W) continue;
          cols.row(row).segment((dy * kw + dx) * C, C) = x.segment((sy * W + sx) * C, C).transpose();
        }
      }
    }
  }
  ConstMatrixMap fm(filters.value().data(), K, O);
  Vector out(H * W * O);
  MatrixMap om(out.data(), H * W, O);
  om.noalias() = cols * fm;
  om.rowwise() += bias.value().transpose();

  const int ii = input.id(), ifl = filters.id(), ib = bias.id();
  return t.record({H, W, O}, std::move(out), {ii, ifl, ib}, [=, cols = std::move(cols)](Tape& tp, int self) {
    ConstMatrixMap g(tp.adjoint(self).data(), H * W, O);
    if (tp.needs_grad(ifl)) MatrixMap(tp.adjoint(ifl).data(), K, O).noalias() += cols.transpose() * g;
    if (tp.needs_grad(ib)) tp.adjoint(ib) += g.colwise().sum().transpose();
    if (tp.needs_grad(ii)) {
      const RowMatrix gcols = g * ConstMatrixMap(tp.value(ifl).data(), K, O).transpose();
      Vector& gx = tp.adjoint(ii);
      for (Index y = 0; y < H; ++y) {
        for (Index xx = 0; xx < W; ++xx) {
          const Index row = y * W + xx;
          for (Index dy = 0; dy < kh; ++dy) {
            const Index sy = y + dy - ph;
            if (sy < 0 || sy >= H) continue;
            for (Index dx = 0; dx < kw; ++dx) {
              const Index sx = xx + dx - pw;
              if (sx < 0 || sx >= W) continue;
              gx.segment((sy * W + sx) * C, C) += gcols.row(row).segment((dy * kw + dx) * C, C).transpose();
            }
          }
        }
      }
    }
  });
}

Var max_pool_axis(Var input, Index axis, Index window, Index stride) {
  if (window <= 0 || stride <= 0) throw ParameterError("max_pool_axis: window and stride must be positive");
  const Shape& s = input.shape();
  if (axis < 0 || axis >= static_cast<Index>(s.size())) {
    throw DimensionError("max_pool_axis: axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  const auto ax = static_cast<std::size_t>(axis);
  Index outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= s[d];
  for (std::size_t d = ax + 1; d < s.size(); ++d) inner *= s[d];
  const Index L = s[ax];
  const Index P = (std::max<Index>(L - window, 0) + stride - 1) / stride + 1;

  Shape out_shape = s;
  out_shape[ax] = P;
  Vector out(outer * P * inner);
  std::vector<Index> arg(static_cast<std::size_t>(out.size()));
  const Vector& x = input.value();
  for (Index o = 0; o < outer; ++o) {
    for (Index p = 0; p < P; ++p) {
      const Index lo = p * stride, hi = std::min(lo + window, L);
      for (Index in = 0; in < inner; ++in) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_at = (o * L + lo) * inner + in;
        for (Index l = lo; l < hi; ++l) {
          const Index at = (o * L + l) * inner + in;
          if (x[at] > best) {
            best = x[at];
            best_at = at;
          }
        }
        const Index oi = (o * P + p) * inner + in;
        out[oi] = best;
        arg[static_cast<std::size_t>(oi)] = best_at;
      }
    }
  }
  const int ii = input.id();
  return input.tape().record(std::move(out_shape), std::move(out), {ii}, [ii, arg = std::move(arg)](Tape& tp, int self) {
    if (!tp.needs_grad(ii)) return;
    const Vector& g = tp.adjoint(self);
    Vector& gx = tp.adjoint(ii);
    for (std::size_t k = 0; k < arg.size(); ++k) gx[arg[k]] += g[static_cast<Index>(k)];
  });
}

// ---------------------------------------------------------------------------
// recurrent cell

Var lstm_step(Var x, Var state, Var w_input, Var w_hidden, Var bias) {
  Tape& t = same_tape(x, w_input);
  require_rank("lstm_step x", x, 1);
  require_rank("lstm_step state", state, 1);
  require_rank("lstm_step w_input", w_input, 2);
  require_rank("lstm_step w_hidden", w_hidden, 2);
  require_rank("lstm_step bias", bias, 1);
  const Index D = x.shape()[0];
  const Index H = w_hidden.shape()[1];
  if (state.shape()[0] != 2 * H || w_hidden.shape()[0] != 4 * H || w_input.shape()[0] != 4 * H ||
      w_input.shape()[1] != D || bias.shape()[0] != 4 * H) {
    throw DimensionError("lstm_step: inconsistent shapes x" + shape_string(x.shape()) + " state" +
                         shape_string(state.shape()) + " Wx" + shape_string(w_input.shape()) + " Wh" +
                         shape_string(w_hidden.shape()) + " b" + shape_string(bias.shape()));
  }
  const Vector& sv = state.value();
  const Vector h = sv.head(H), c = sv.tail(H);
  Vector z = bias.value();
  z.noalias() += ConstMatrixMap(w_input.value().data(), 4 * H, D) * x.value();
  z.noalias() += ConstMatrixMap(w_hidden.value().data(), 4 * H, H) * h;
  auto sig = [](const Vector& v) -> Vector { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); };
  const Vector ig = sig(z.segment(0, H));
  const Vector fg = sig(z.segment(H, H));
  const Vector gg = z.segment(2 * H, H).array().tanh().matrix();
  const Vector og = sig(z.segment(3 * H, H));
  const Vector c2 = fg.cwiseProduct(c) + ig.cwiseProduct(gg);
  const Vector tc = c2.array().tanh().matrix();
  Vector out(2 * H);
  out.head(H) = og.cwiseProduct(tc);
  out.tail(H) = c2;

  const int ix = x.id(), is = state.id(), iwx = w_input.id(), iwh = w_hidden.id(), ib = bias.id();
  return t.record({2 * H}, std::move(out), {ix, is, iwx, iwh, ib}, [=](Tape& tp, int self) {
    const Vector& g = tp.adjoint(self);
    const Vector dh = g.head(H);
    const Vector dc = g.tail(H) + dh.cwiseProduct(og).cwiseProduct((1.0 - tc.array().square()).matrix());
    Vector dz(4 * H);
    dz.segment(0, H) = dc.cwiseProduct(gg).cwiseProduct((ig.array() * (1.0 - ig.array())).matrix());
    dz.segment(H, H) = dc.cwiseProduct(c).cwiseProduct((fg.array() * (1.0 - fg.array())).matrix());
    dz.segment(2 * H, H) = dc.cwiseProduct(ig).cwiseProduct((1.0 - gg.array().square()).matrix());
    dz.segment(3 * H, H) = dh.cwiseProduct(tc).cwiseProduct((og.array() * (1.0 - og.array())).matrix());
    if (tp.needs_grad(ib)) tp.adjoint(ib) += dz;
    if (tp.needs_grad(iwx)) MatrixMap(tp.adjoint(iwx).data(), 4 * H, D).noalias() += dz * tp.value(ix).transpose();
    if (tp.needs_grad(iwh)) MatrixMap(tp.adjoint(iwh).data(), 4 * H, H).noalias() += dz * h.transpose();
    if (tp.needs_grad(ix)) {
      tp.adjoint(ix).noalias() += ConstMatrixMap(tp.value(iwx).data(), 4 * H, D).transpose() * dz;
    }
    if (tp.needs_grad(is)) {
      Vector& gs = tp.adjoint(is);
      gs.head(H).noalias() += ConstMatrixMap(tp.value(iwh).data(), 4 * H, H).transpose() * dz;
      gs.tail(H) += dc.cwiseProduct(fg);
    }
  });
}

// ---------------------------------------------------------------------------
// lookup and masking

Var embedding_lookup(Var table, std::span<const Index> ids) {
  require_rank("embedding_lookup", table, 2);
  const Index V = table.shape()[0], d = table.shape()[1];
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id list");
  const auto N = static_cast<Index>(ids.size());
  Vector out(N * d);
  const Vector& tv = table.value();
  for (Index r = 0; r < N; ++r) {
    const Index id = ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= V) {
      throw DimensionError("embedding_lookup: id " + std::to_string(id) + " outside table of " + std::to_string(V));
    }
    out.segment(r * d, d) = tv.segment(id * d, d);
  }
  const int it = table.id();
  std::vector<Index> rows(ids.begin(), ids.end());
  return table.tape().record({N, d}, std::move(out), {it}, [it, d, rows = std::move(rows)](Tape& tp, int self) {
    if (!tp.needs_grad(it)) return;
    const Vector& g = tp.adjoint(self);
    Vector& gt = tp.adjoint(it);
    for (std::size_t r = 0; r < rows.size(); ++r) gt.segment(rows[r] * d, d) += g.segment(static_cast<Index>(r) * d, d);
  });
}

Var dropout_apply(Var a, const Tensor& mask) {
  if (mask.shape != a.shape()) {
    throw DimensionError("dropout_apply: mask " + shape_string(mask.shape) + " vs operand " + shape_string(a.shape()));
  }
  const int ia = a.id();
  Vector m = mask.values;
  Vector out = a.value().cwiseProduct(m);
  return a.tape().record(a.shape(), std::move(out), {ia}, [ia, m = std::move(m)](Tape& tp, int self) {
    accumulate(tp, ia, tp.adjoint(self).cwiseProduct(m));
  });
}

// ---------------------------------------------------------------------------
// plumbing

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  const int ia = a.id();
  return a.tape().record(std::move(shape), a.value(), {ia}, [ia](Tape& tp, int self) {
    accumulate(tp, ia, tp.adjoint(self));
  });
}

Var swap_axes01(Var a) {
  require_rank("swap_axes01", a, 3);
  const Index A = a.shape()[0], B = a.shape()[1], C = a.shape()[2];
  Vector out(a.size());
  const Vector& x = a.value();
  for (Index i = 0; i < A; ++i)
    for (Index j = 0; j < B; ++j) out.segment((j * A + i) * C, C) = x.segment((i * B + j) * C, C);
  const int ia = a.id();
  return a.tape().record({B, A, C}, std::move(out), {ia}, [ia, A, B, C](Tape& tp, int self) {
    if (!tp.needs_grad(ia)) return;
    const Vector& g = tp.adjoint(self);
    Vector& gx = tp.adjoint(ia);
    for (Index i = 0; i < A; ++i)
      for (Index j = 0; j < B; ++j) gx.segment((i * B + j) * C, C) += g.segment((j * A + i) * C, C);
  });
}

Var slice(Var a, Index offset, Index length) {
  if (offset < 0 || length <= 0 || offset + length > a.size()) {
    throw DimensionError("slice: [" + std::to_string(offset) + ", +" + std::to_string(length) + ") of " +
                         std::to_string(a.size()) + " values");
  }
  const int ia = a.id();
  return a.tape().record({length}, a.value().segment(offset, length), {ia}, [ia, offset, length](Tape& tp, int self) {
    if (tp.needs_grad(ia)) tp.adjoint(ia).segment(offset, length) += tp.adjoint(self);
  });
}

Var sum(Var a) {
  const int ia = a.id();
  Vector out(1);
  out[0] = a.value().sum();
  return a.tape().record({}, std::move(out), {ia}, [ia](Tape& tp, int self) {
    if (tp.needs_grad(ia)) tp.adjoint(ia).array() += tp.adjoint(self)[0];
  });
}

Var dot(Var a, Var b) {
  require_same_shape("dot", a, b);
  return sum(mul(a, b));
}

}  // namespace pmnet
