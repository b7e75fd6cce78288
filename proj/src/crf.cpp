#include "pmnet/crf.hpp"

#include <cmath>
#include <limits>

#include "pmnet/error.hpp"

namespace pmnet {

namespace {

constexpr Index K = static_cast<Index>(kNumTags);

double lse(const Eigen::Ref<const Vector>& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

void check_shapes(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop) {
  if (e.rows() < 1 || e.cols() != K || t.rows() != K || t.cols() != K || start.size() != K || stop.size() != K) {
    throw DimensionError("crf: expected emissions [n x 8], transitions [8 x 8], start/stop [8]");
  }
}

// alpha(t, j): log-sum of all prefixes ending in tag j at position t.
RowMatrix forward_scores(const RowMatrix& e, const RowMatrix& t, const Vector& start) {
  const Index n = e.rows();
  RowMatrix alpha(n, K);
  alpha.row(0) = start.transpose() + e.row(0);
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < K; ++j) alpha(i, j) = lse(alpha.row(i - 1).transpose() + t.col(j)) + e(i, j);
  }
  return alpha;
}

// beta(t, i): log-sum of all suffixes after position t given tag i at t.
RowMatrix backward_scores(const RowMatrix& e, const RowMatrix& t, const Vector& stop) {
  const Index n = e.rows();
  RowMatrix beta(n, K);
  beta.row(n - 1) = stop.transpose();
  for (Index i = n - 2; i >= 0; --i) {
    const Vector next = e.row(i + 1).transpose() + beta.row(i + 1).transpose();
    for (Index a = 0; a < K; ++a) beta(i, a) = lse(t.row(a).transpose() + next);
  }
  return beta;
}

void check_gold(const TagSequence& gold, Index n) {
  if (static_cast<Index>(gold.size()) != n) {
    throw ContractError("crf: gold length " + std::to_string(gold.size()) + " differs from " + std::to_string(n));
  }
  for (Tag g : gold) {
    if (static_cast<std::size_t>(g) >= kNumTags) throw ContractError("crf: invalid gold tag id");
  }
}

}  // namespace

double crf_log_partition(const RowMatrix& emissions, const RowMatrix& transitions, const Vector& start,
                         const Vector& stop) {
  check_shapes(emissions, transitions, start, stop);
  const RowMatrix alpha = forward_scores(emissions, transitions, start);
  return lse(alpha.row(emissions.rows() - 1).transpose() + stop);
}

double crf_path_score(const RowMatrix& emissions, const RowMatrix& transitions, const Vector& start,
                      const Vector& stop, const TagSequence& path) {
  check_shapes(emissions, transitions, start, stop);
  check_gold(path, emissions.rows());
  auto id = [&](std::size_t i) { return static_cast<Index>(path[i]); };
  double s = start[id(0)] + stop[id(path.size() - 1)];
  for (std::size_t i = 0; i < path.size(); ++i) {
    s += emissions(static_cast<Index>(i), id(i));
    if (i > 0) s += transitions(id(i - 1), id(i));
  }
  return s;
}

TagSequence crf_viterbi(const RowMatrix& emissions, const RowMatrix& transitions, const Vector& start,
                        const Vector& stop) {
  check_shapes(emissions, transitions, start, stop);
  const Index n = emissions.rows();
  RowMatrix best(n, K);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, K);
  best.row(0) = start.transpose() + emissions.row(0);
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < K; ++j) {
      Index arg = 0;
      double top = best(i - 1, 0) + transitions(0, j);
      for (Index a = 1; a < K; ++a) {
        const double s = best(i - 1, a) + transitions(a, j);
        if (s > top) {
          top = s;
          arg = a;
        }
      }
      best(i, j) = top + emissions(i, j);
      back(i, j) = arg;
    }
  }
  Index last = 0;
  double top = best(n - 1, 0) + stop[0];
  for (Index j = 1; j < K; ++j) {
    if (best(n - 1, j) + stop[j] > top) {
      top = best(n - 1, j) + stop[j];
      last = j;
    }
  }
  TagSequence path(static_cast<std::size_t>(n));
  for (Index i = n - 1; i >= 0; --i) {
    path[static_cast<std::size_t>(i)] = static_cast<Tag>(last);
    if (i > 0) last = back(i, last);
  }
  return path;
}

Var crf_nll(Var emissions, Var transitions, Var start, Var stop, const TagSequence& gold) {
  if (emissions.shape().size() != 2 || emissions.shape()[1] != K) {
    throw DimensionError("crf_nll: emissions must be [n x 8], got " + shape_string(emissions.shape()));
  }
  const Index n = emissions.shape()[0];
  check_gold(gold, n);
  const RowMatrix e = ConstMatrixMap(emissions.value().data(), n, K);
  const RowMatrix t = ConstMatrixMap(transitions.value().data(), K, K);
  const Vector& st = start.value();
  const Vector& sp = stop.value();
  check_shapes(e, t, st, sp);

  const RowMatrix alpha = forward_scores(e, t, st);
  const double log_z = lse(alpha.row(n - 1).transpose() + sp);
  Vector out(1);
  out[0] = log_z - crf_path_score(e, t, st, sp, gold);

  const int ie = emissions.id(), it = transitions.id(), is = start.id(), ip = stop.id();
  return emissions.tape().record({}, std::move(out), {ie, it, is, ip}, [=](Tape& tp, int self) {
    const double g = tp.adjoint(self)[0];
    const RowMatrix beta = backward_scores(e, t, sp);
    RowMatrix unary = (alpha + beta).array() - log_z;
    unary = unary.array().exp();
    if (tp.needs_grad(ie)) {
      MatrixMap ge(tp.adjoint(ie).data(), n, K);
      ge += g * unary;
      for (Index i = 0; i < n; ++i) ge(i, static_cast<Index>(gold[static_cast<std::size_t>(i)])) -= g;
    }
    if (tp.needs_grad(is)) {
      Vector& gs = tp.adjoint(is);
      gs += g * unary.row(0).transpose();
      gs[static_cast<Index>(gold.front())] -= g;
    }
    if (tp.needs_grad(ip)) {
      Vector& gp = tp.adjoint(ip);
      gp += g * unary.row(n - 1).transpose();
      gp[static_cast<Index>(gold.back())] -= g;
    }
    if (tp.needs_grad(it)) {
      MatrixMap gt(tp.adjoint(it).data(), K, K);
      for (Index i = 1; i < n; ++i) {
        for (Index a = 0; a < K; ++a) {
          for (Index b = 0; b < K; ++b) {
            gt(a, b) += g * std::exp(alpha(i - 1, a) + t(a, b) + e(i, b) + beta(i, b) - log_z);
          }
        }
        gt(static_cast<Index>(gold[static_cast<std::size_t>(i - 1)]), static_cast<Index>(gold[static_cast<std::size_t>(i)])) -= g;
      }
    }
  });
}

}  // namespace pmnet
