#ifndef PMNET_MODEL_HPP_
#define PMNET_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmnet/autodiff.hpp"
#include "pmnet/corpus.hpp"
#include "pmnet/features.hpp"
#include "pmnet/kvconfig.hpp"
#include "pmnet/random.hpp"
#include "pmnet/vocab.hpp"

namespace pmnet {

enum class Variant { identity, identity_handcrafted, identity_sim, identity_sim_conv };

std::string_view variant_name(Variant v);
// Accepts "identity", "identity+handcrafted", "identity+sim", "identity+sim+conv".
Variant parse_variant(std::string_view name);
bool uses_similarity(Variant v);

enum class Direction { backward, forward };

// Convolution kernel extents: time runs along the sentence, distance along
// the neighbor-window axis of a similarity tensor.
struct FilterShape {
  Index time_extent = 1;
  Index distance_extent = 1;

  friend bool operator==(const FilterShape&, const FilterShape&) = default;
};

struct ModelConfig {
  Index window = 10;
  Index token_dim = 100;
  Index pos_dim = 25;
  // Projection output size; 0 means token_dim + pos_dim.
  Index projection_dim = 0;
  Index similarity_dim = 100;
  std::vector<FilterShape> filter_shapes = {{1, 1}, {3, 1}, {3, 3}, {5, 1}, {5, 3}};
  Index filters_per_shape = 16;
  Index pool_rate = 3;
  Variant variant = Variant::identity_sim_conv;
  Index lstm_hidden = 128;
  double dropout = 0.25;
  std::size_t max_gap = 3;
  double cosine_eps = 1e-8;

  void validate() const;

  Index input_dim() const { return token_dim + pos_dim; }
  Index proj_dim() const { return projection_dim ? projection_dim : input_dim(); }
  Index embed_width() const { return input_dim() + 4; }
  Index pooled_rows() const { return (window + pool_rate - 1) / pool_rate; }
  Index conv_channels() const { return static_cast<Index>(filter_shapes.size()) * filters_per_shape; }
  FeatureConfig feature_config() const;
  // Per-token width of the BiLSTM input for this variant.
  Index lstm_input_dim() const;

  KeyValues to_kv() const;
  // Reads the keys this config owns; other keys are ignored.
  static ModelConfig from_kv(const KeyValues& kv);
};

std::string format_filter_shapes(const std::vector<FilterShape>& shapes);
std::vector<FilterShape> parse_filter_shapes(const std::string& text);

// Named tensors in a fixed order.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor& at(std::size_t i) { return entries_[i].second; }
  const Tensor& at(std::size_t i) const { return entries_[i].second; }
  std::vector<Tensor*> tensors();
  void zero_grad();

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parameter names and shapes implied by a configuration.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg, Index vocab_size, Index pos_size);

// Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights; biases and CRF scores start at zero.
ParamStore init_params(const ModelConfig& cfg, Index vocab_size, Index pos_size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// forward building blocks

struct EmbeddedSentence {
  // [n x (d_t + d_p + 4)]: token embedding, POS embedding, identity flags.
  Var embeds;
  // [n x (d_t + d_p)] fed to the similarity layer. Reads the side-channel
  // surfaces when the sentence carries them.
  Var similarity_input;
};

EmbeddedSentence embed_inputs(Var token_table, Var pos_table, const Sentence& s, const Vocabulary& vocab);

// alpha[d-1, i, f] = cos(W1_f x_i, W2_f x_j), j = i -/+ d; zero when j is
// outside the sentence. x [n x D], W1/W2 [d_f x d_g x D]; result [w x n x d_f].
Var neighbor_similarity(Var x, Var w1, Var w2, Index window, Direction dir, double eps = 1e-8);

struct ConvFilter {
  Var filters;  // [distance_extent x time_extent x d_f x l]
  Var bias;     // [l]
};

// Same-padded convolution of every filter shape over [w x n x d_f], channels
// concatenated, then tanh: [w x n x k*l].
Var conv_similarity(Var alpha, std::span<const ConvFilter> bank);

// Max-pool along the distance axis with window and stride m: [ceil(w/m) x n x k*l].
Var pool_similarity(Var conv, Index m);

struct AssemblyParts {
  std::optional<Var> embeds;
  std::optional<Var> handcrafted;
  std::optional<Var> alpha_backward, alpha_forward;
  std::optional<Var> pooled_backward, pooled_forward;
};

// Concatenates the per-token features a variant consumes: [n x D].
Var assemble_lstm_input(Variant variant, const AssemblyParts& parts);

struct LstmWeights {
  Var w_input, w_hidden, bias;
};

// Forward and backward passes over [n x D]; hidden states concatenated [n x 2H].
Var bilstm(Var input, const LstmWeights& fwd, const LstmWeights& bwd);

struct SimilarityTensor {
  Tensor values;  // [w x n x d_f]
  Direction direction;
};

// ---------------------------------------------------------------------------

class Tagger {
 public:
  Tagger(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed);
  // Throws LoadError when the parameters do not match the configuration.
  Tagger(ModelConfig cfg, Vocabulary vocab, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Builds emissions [n x 8] on `tape`. Parameters are bound for gradients
  // when `trainable`; a dropout stream enables dropout on the LSTM input.
  Var emissions(Tape& tape, const Sentence& s, bool trainable, Rng* dropout = nullptr);
  Var emissions(Tape& tape, const Sentence& s) const;
  Var loss(Tape& tape, const Example& ex, Rng* dropout = nullptr);
  // Negative log-likelihood of the gold tags without dropout or gradients.
  double nll(const Example& ex) const;

  TagSequence predict(const Sentence& s) const;
  SimilarityTensor similarity(const Sentence& s, Direction dir) const;

 private:
  struct Binder;

  Var build(Binder& bind, const Sentence& s, Rng* dropout) const;

  ModelConfig cfg_;
  Vocabulary vocab_;
  ParamStore params_;
};

}  // namespace pmnet

#endif  // PMNET_MODEL_HPP_
