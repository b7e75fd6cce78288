// Reference implementations for tests. Each one is written directly from the
// definition it checks, using plain loops and no library internals.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmnet/autodiff.hpp"
#include "pmnet/corpus.hpp"
#include "pmnet/features.hpp"
#include "pmnet/gradcheck.hpp"
#include "pmnet/model.hpp"
#include "pmnet/random.hpp"

namespace oracle {

using pmnet::Index;
using pmnet::RowMatrix;
using pmnet::Shape;
using pmnet::Tensor;
using pmnet::Vector;

Tensor random_tensor(const Shape& shape, pmnet::Rng& rng, double scale = 1.0, bool requires_grad = true);

// Builds a scalar loss as sum(out * R) for a fixed random R, back-propagates,
// and compares against central differences. Returns the worst relative error.
double op_grad_error(const std::function<pmnet::Var(pmnet::Tape&, const std::vector<pmnet::Var>&)>& build,
                     const std::vector<Tensor*>& params, pmnet::Rng& rng);

// [H x W x Cin] * [kh x kw x Cin x Cout] with zero padding of (k-1)/2 before.
Tensor conv2d_same(const Tensor& input, const Tensor& filters, const Tensor& bias);

// alpha[d-1][i][f] by direct loops over i, d, f.
Tensor neighbor_similarity(const Tensor& x, const Tensor& w1, const Tensor& w2, Index window, bool backward,
                           double eps = 1e-8);

// Every one of the 8^n tag paths.
double crf_log_partition(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop);
pmnet::TagSequence crf_argmax(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop);
double crf_score(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop,
                 const std::vector<int>& path);

// Hand-crafted features by scanning every offset in the window.
std::vector<pmnet::PatternFeatureVector> scan_features(const pmnet::Sentence& s, const pmnet::FeatureConfig& cfg);

// Token i is an edit iff some span's reparandum [start, ip] contains it.
std::vector<bool> span_membership(const pmnet::Sentence& s);

// Tag inventory applied rule by rule from the spans.
pmnet::TagSequence rule_tags(const pmnet::Sentence& s);

// A small configuration of the full model used by gradient checks.
pmnet::ModelConfig toy_config(pmnet::Variant v = pmnet::Variant::identity_sim_conv);

// The tagger's loss computed from scratch in extended precision with plain
// loops: embeddings, similarity, convolution, pooling, BiLSTM, emissions and
// the CRF negative log-likelihood. Reads the tagger's current parameters.
long double reference_nll(const pmnet::Tagger& tagger, const pmnet::Example& ex);

// Overwrites every parameter with uniform draws in +-scale, so that biases
// and CRF scores are non-zero too.
void randomize_params(pmnet::ParamStore& params, pmnet::Rng& rng, double scale);

// Random sentences drawn from a tiny vocabulary so that repeats are frequent.
pmnet::Sentence random_sentence(pmnet::Rng& rng, std::size_t min_len, std::size_t max_len);

// Sentences from random_sentence with uniformly random tags, lengths 2..6.
pmnet::Corpus toy_corpus(std::size_t count, std::uint64_t seed);

// Back-propagated gradients of the tagger loss on `ex` against central
// differences of reference_nll, differenced from its unperturbed value so
// the double result keeps its digits.
pmnet::GradCheckResult model_grad_check(pmnet::Tagger& tagger, const pmnet::Example& ex);

}  // namespace oracle
