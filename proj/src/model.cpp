#include "pmnet/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "pmnet/crf.hpp"
#include "pmnet/error.hpp"

namespace pmnet {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::identity: return "identity";
    case Variant::identity_handcrafted: return "identity+handcrafted";
    case Variant::identity_sim: return "identity+sim";
    case Variant::identity_sim_conv: return "identity+sim+conv";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::identity, Variant::identity_handcrafted, Variant::identity_sim,
                    Variant::identity_sim_conv}) {
    if (variant_name(v) == name) return v;
  }
  throw ParameterError("unknown model variant '" + std::string(name) + "'");
}

bool uses_similarity(Variant v) { return v == Variant::identity_sim || v == Variant::identity_sim_conv; }

static std::string_view direction_name(Direction d) { return d == Direction::backward ? "backward" : "forward"; }

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(window, "window");
  positive(token_dim, "token_dim");
  positive(pos_dim, "pos_dim");
  positive(similarity_dim, "similarity_dim");
  positive(filters_per_shape, "filters_per_shape");
  positive(pool_rate, "pool_rate");
  positive(lstm_hidden, "lstm_hidden");
  if (projection_dim < 0) throw ConfigError("projection_dim must be positive (0 selects token_dim + pos_dim)");
  if (filter_shapes.empty()) throw ConfigError("filter_shapes must not be empty");
  const Index limit = std::max<Index>(window, 5);
  for (const auto& f : filter_shapes) {
    if (f.time_extent < 1 || f.distance_extent < 1) throw ConfigError("filter extents must be positive");
    if (f.time_extent > limit || f.distance_extent > limit) {
      throw ConfigError("filter extent exceeds max(window, 5) = " + std::to_string(limit));
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(cosine_eps > 0.0)) throw ConfigError("cosine_eps must be positive");
}

FeatureConfig ModelConfig::feature_config() const {
  FeatureConfig f;
  f.window = static_cast<std::size_t>(window);
  f.max_gap = max_gap;
  return f;
}

Index ModelConfig::lstm_input_dim() const {
  switch (variant) {
    case Variant::identity: return embed_width();
    case Variant::identity_handcrafted: return embed_width() + feature_width(feature_config());
    case Variant::identity_sim: return embed_width() + 2 * window * similarity_dim;
    case Variant::identity_sim_conv: return embed_width() + 2 * pooled_rows() * conv_channels();
  }
  return 0;
}

std::string format_filter_shapes(const std::vector<FilterShape>& shapes) {
  std::string out;
  for (const auto& f : shapes) {
    if (!out.empty()) out += ',';
    out += std::to_string(f.time_extent) + "x" + std::to_string(f.distance_extent);
  }
  return out;
}

std::vector<FilterShape> parse_filter_shapes(const std::string& text) {
  std::vector<FilterShape> shapes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument("missing x");
      std::size_t used_t = 0, used_d = 0;
      const std::string ts = item.substr(0, x), ds = item.substr(x + 1);
      FilterShape f{std::stoll(ts, &used_t), std::stoll(ds, &used_d)};
      if (used_t != ts.size() || used_d != ds.size()) throw std::invalid_argument("trailing text");
      shapes.push_back(f);
    } catch (const std::logic_error&) {
      throw ConfigError("invalid filter shape '" + item + "' (expected TIMExDISTANCE)");
    }
  }
  if (shapes.empty()) throw ConfigError("filter_shapes must not be empty");
  return shapes;
}

KeyValues ModelConfig::to_kv() const {
  return {
      {"window", std::to_string(window)},
      {"token_dim", std::to_string(token_dim)},
      {"pos_dim", std::to_string(pos_dim)},
      {"projection_dim", std::to_string(proj_dim())},
      {"similarity_dim", std::to_string(similarity_dim)},
      {"filter_shapes", format_filter_shapes(filter_shapes)},
      {"filters_per_shape", std::to_string(filters_per_shape)},
      {"pool_rate", std::to_string(pool_rate)},
      {"variant", std::string(variant_name(variant))},
      {"lstm_hidden", std::to_string(lstm_hidden)},
      {"dropout", format_double(dropout)},
      {"max_gap", std::to_string(max_gap)},
      {"cosine_eps", format_double(cosine_eps)},
  };
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv) {
  ModelConfig c;
  c.window = kv_int(kv, "window", c.window);
  c.token_dim = kv_int(kv, "token_dim", c.token_dim);
  c.pos_dim = kv_int(kv, "pos_dim", c.pos_dim);
  c.projection_dim = kv_int(kv, "projection_dim", c.projection_dim);
  c.similarity_dim = kv_int(kv, "similarity_dim", c.similarity_dim);
  if (auto it = kv.find("filter_shapes"); it != kv.end()) c.filter_shapes = parse_filter_shapes(it->second);
  c.filters_per_shape = kv_int(kv, "filters_per_shape", c.filters_per_shape);
  c.pool_rate = kv_int(kv, "pool_rate", c.pool_rate);
  if (auto it = kv.find("variant"); it != kv.end()) {
    try {
      c.variant = parse_variant(it->second);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  c.lstm_hidden = kv_int(kv, "lstm_hidden", c.lstm_hidden);
  c.dropout = kv_double(kv, "dropout", c.dropout);
  c.max_gap = kv_uint(kv, "max_gap", c.max_gap);
  c.cosine_eps = kv_double(kv, "cosine_eps", c.cosine_eps);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::add(std::string name, Tensor t) {
  if (index_.contains(name)) throw ContractError("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(t));
  return entries_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named " + name);
  return entries_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named " + name);
  return entries_[it->second].second;
}

std::vector<Tensor*> ParamStore::tensors() {
  std::vector<Tensor*> out;
  for (auto& e : entries_) out.push_back(&e.second);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& [na, ta] = a.entries_[i];
    const auto& [nb, tb] = b.entries_[i];
    if (na != nb || ta.shape != tb.shape) return false;
    // Bitwise comparison so that checkpoint round-trips are checked exactly.
    if (std::memcmp(ta.values.data(), tb.values.data(), sizeof(double) * static_cast<std::size_t>(ta.size())) != 0) {
      return false;
    }
  }
  return true;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg, Index vocab_size, Index pos_size) {
  std::vector<std::pair<std::string, Shape>> layout;
  layout.push_back({"embed.token", {vocab_size, cfg.token_dim}});
  layout.push_back({"embed.pos", {pos_size, cfg.pos_dim}});
  if (uses_similarity(cfg.variant)) {
    for (Direction d : {Direction::backward, Direction::forward}) {
      const std::string p = "sim." + std::string(direction_name(d));
      layout.push_back({p + ".w1", {cfg.similarity_dim, cfg.proj_dim(), cfg.input_dim()}});
      layout.push_back({p + ".w2", {cfg.similarity_dim, cfg.proj_dim(), cfg.input_dim()}});
    }
  }
  if (cfg.variant == Variant::identity_sim_conv) {
    for (Direction d : {Direction::backward, Direction::forward}) {
      for (std::size_t s = 0; s < cfg.filter_shapes.size(); ++s) {
        const auto& f = cfg.filter_shapes[s];
        const std::string p = "conv." + std::string(direction_name(d)) + "." + std::to_string(s);
        layout.push_back(
            {p + ".filters", {f.distance_extent, f.time_extent, cfg.similarity_dim, cfg.filters_per_shape}});
        layout.push_back({p + ".bias", {cfg.filters_per_shape}});
      }
    }
  }
  const Index h = cfg.lstm_hidden, in = cfg.lstm_input_dim();
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string p = std::string("lstm.") + dir;
    layout.push_back({p + ".wx", {4 * h, in}});
    layout.push_back({p + ".wh", {4 * h, h}});
    layout.push_back({p + ".b", {4 * h}});
  }
  layout.push_back({"emit.w", {static_cast<Index>(kNumTags), 2 * h}});
  layout.push_back({"emit.b", {static_cast<Index>(kNumTags)}});
  layout.push_back({"crf.transitions", {static_cast<Index>(kNumTags), static_cast<Index>(kNumTags)}});
  layout.push_back({"crf.start", {static_cast<Index>(kNumTags)}});
  layout.push_back({"crf.stop", {static_cast<Index>(kNumTags)}});
  return layout;
}

ParamStore init_params(const ModelConfig& cfg, Index vocab_size, Index pos_size, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, Stream::init);
  ParamStore store;
  for (auto& [name, shape] : parameter_layout(cfg, vocab_size, pos_size)) {
    Tensor t(shape, true);
    t.values.setZero();
    if (shape.size() >= 2) {
      // Last two axes of a rank-3 projection are [out x in]; a rank-4 filter
      // bank is [kh x kw x in x out] with a kh*kw receptive field.
      double fan_in = 0, fan_out = 0;
      if (shape.size() == 2) {
        fan_in = static_cast<double>(shape[1]);
        fan_out = static_cast<double>(shape[0]);
      } else if (shape.size() == 3) {
        fan_in = static_cast<double>(shape[2]);
        fan_out = static_cast<double>(shape[1]);
      } else {
        const double field = static_cast<double>(shape[0] * shape[1]);
        fan_in = field * static_cast<double>(shape[2]);
        fan_out = field * static_cast<double>(shape[3]);
      }
      const bool crf = name.starts_with("crf.");
      if (!crf) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (Index i = 0; i < t.size(); ++i) t.values[i] = rng.uniform(-a, a);
      }
    }
    store.add(name, std::move(t));
  }
  return store;
}

// ---------------------------------------------------------------------------
// forward building blocks

EmbeddedSentence embed_inputs(Var token_table, Var pos_table, const Sentence& s, const Vocabulary& vocab) {
  const std::size_t n = s.tokens.size();
  if (n == 0) throw DimensionError("embed_inputs: empty sentence");
  std::vector<Index> tok(n), pos(n);
  Tensor flags({static_cast<Index>(n), 4});
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = s.tokens[i];
    tok[i] = vocab.token_id(t.surface);
    pos[i] = vocab.pos_id(t.pos);
    const Index r = static_cast<Index>(i) * 4;
    flags.values[r + 0] = t.flags.filled_pause ? 1.0 : 0.0;
    flags.values[r + 1] = t.flags.discourse_marker ? 1.0 : 0.0;
    flags.values[r + 2] = t.flags.edit_word ? 1.0 : 0.0;
    flags.values[r + 3] = t.flags.fragment ? 1.0 : 0.0;
  }
  Tape& tape = token_table.tape();
  const Var tok_e = embedding_lookup(token_table, tok);
  const Var pos_e = embedding_lookup(pos_table, pos);
  const Var fl = tape.constant(std::move(flags));
  EmbeddedSentence out;
  const Var parts[] = {tok_e, pos_e, fl};
  out.embeds = concat(parts, 1);

  Var sim_tok = tok_e;
  if (!s.similarity_surfaces.empty()) {
    if (s.similarity_surfaces.size() != n) throw ContractError("embed_inputs: side-channel length differs from sentence");
    std::vector<Index> side(n);
    for (std::size_t i = 0; i < n; ++i) side[i] = vocab.token_id(s.similarity_surfaces[i]);
    sim_tok = embedding_lookup(token_table, side);
  }
  const Var sim_parts[] = {sim_tok, pos_e};
  out.similarity_input = concat(sim_parts, 1);
  return out;
}

Var neighbor_similarity(Var x, Var w1, Var w2, Index window, Direction dir, double eps) {
  if (window < 1) throw ParameterError("neighbor_similarity: window must be >= 1");
  if (x.shape().size() != 2) throw DimensionError("neighbor_similarity: x must be [n x D]");
  const Index n = x.shape()[0], in = x.shape()[1];
  if (w1.shape().size() != 3 || w1.shape() != w2.shape() || w1.shape()[2] != in) {
    throw DimensionError("neighbor_similarity: projections must both be [d_f x d_g x " + std::to_string(in) +
                         "], got " + shape_string(w1.shape()) + " and " + shape_string(w2.shape()));
  }
  const Index df = w1.shape()[0], dg = w1.shape()[1];
  Tape& tape = x.tape();

  // Project every token by every W_f at once: [n x d_f*d_g].
  const Var p1 = matmul(x, reshape(w1, {df * dg, in}), true);
  const Var p2 = matmul(x, reshape(w2, {df * dg, in}), true);
  // Row n is all zeros and stands in for out-of-range neighbors.
  const Var pad[] = {p2, tape.constant(Tensor({1, df * dg}, Vector::Zero(df * dg)))};
  const Var p2z = concat(pad, 0);

  std::vector<Index> self(static_cast<std::size_t>(window * n)), other(self.size());
  for (Index d = 1; d <= window; ++d) {
    for (Index i = 0; i < n; ++i) {
      const Index j = dir == Direction::backward ? i - d : i + d;
      const auto k = static_cast<std::size_t>((d - 1) * n + i);
      self[k] = i;
      other[k] = (j >= 0 && j < n) ? j : n;
    }
  }
  const Var u = reshape(embedding_lookup(p1, self), {window * n * df, dg});
  const Var v = reshape(embedding_lookup(p2z, other), {window * n * df, dg});
  return reshape(cosine_sim(u, v, eps), {window, n, df});
}

Var conv_similarity(Var alpha, std::span<const ConvFilter> bank) {
  if (bank.empty()) throw ContractError("conv_similarity: empty filter bank");
  std::vector<Var> outs;
  outs.reserve(bank.size());
  for (const auto& f : bank) outs.push_back(conv2d_same(alpha, f.filters, f.bias));
  return tanh(outs.size() == 1 ? outs.front() : concat(outs, 2));
}

Var pool_similarity(Var conv, Index m) {
  if (m < 1) throw ParameterError("pool_similarity: m must be >= 1");
  return max_pool_axis(conv, 0, m, m);
}

namespace {

// [R x n x C] -> [n x R*C], one row per time step.
Var per_token(Var t) {
  const Shape& s = t.shape();
  return reshape(swap_axes01(t), {s[1], s[0] * s[2]});
}

}  // namespace

Var assemble_lstm_input(Variant variant, const AssemblyParts& parts) {
  auto need = [&](const std::optional<Var>& v, const char* what) -> Var {
    if (!v) {
      throw ContractError("assemble_lstm_input: variant " + std::string(variant_name(variant)) + " requires " + what);
    }
    return *v;
  };
  std::vector<Var> cols{need(parts.embeds, "embeddings")};
  switch (variant) {
    case Variant::identity: break;
    case Variant::identity_handcrafted: cols.push_back(need(parts.handcrafted, "hand-crafted features")); break;
    case Variant::identity_sim:
      cols.push_back(per_token(need(parts.alpha_backward, "the backward similarity tensor")));
      cols.push_back(per_token(need(parts.alpha_forward, "the forward similarity tensor")));
      break;
    case Variant::identity_sim_conv:
      cols.push_back(per_token(need(parts.pooled_backward, "the backward pooled tensor")));
      cols.push_back(per_token(need(parts.pooled_forward, "the forward pooled tensor")));
      break;
  }
  return cols.size() == 1 ? cols.front() : concat(cols, 1);
}

Var bilstm(Var input, const LstmWeights& fwd, const LstmWeights& bwd) {
  if (input.shape().size() != 2) throw DimensionError("bilstm: input must be [n x D]");
  const Index n = input.shape()[0], d = input.shape()[1];
  const Index h = fwd.w_hidden.shape().at(1);
  Tape& tape = input.tape();

  auto run = [&](const LstmWeights& w, bool reverse) {
    std::vector<Var> hs(static_cast<std::size_t>(n));
    Var state = tape.constant(Tensor({2 * h}, Vector::Zero(2 * h)));
    for (Index k = 0; k < n; ++k) {
      const Index t = reverse ? n - 1 - k : k;
      state = lstm_step(slice(input, t * d, d), state, w.w_input, w.w_hidden, w.bias);
      hs[static_cast<std::size_t>(t)] = slice(state, 0, h);
    }
    return reshape(concat(hs, 0), {n, h});
  };
  const Var parts[] = {run(fwd, false), run(bwd, true)};
  return concat(parts, 1);
}

// ---------------------------------------------------------------------------
// Tagger

struct Tagger::Binder {
  Tape& tape;
  const ParamStore& store;
  ParamStore* mutable_store;
  std::unordered_map<std::string, Var> cache;

  Var operator()(const std::string& name) {
    if (auto it = cache.find(name); it != cache.end()) return it->second;
    const Var v = mutable_store ? tape.parameter(mutable_store->get(name)) : tape.view(store.get(name));
    cache.emplace(name, v);
    return v;
  }
};

Tagger::Tagger(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  params_ = init_params(cfg_, vocab_.token_count(), vocab_.pos_count(), seed);
}

Tagger::Tagger(ModelConfig cfg, Vocabulary vocab, ParamStore params)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), params_(std::move(params)) {
  try {
    cfg_.validate();
  } catch (const ConfigError& e) {
    throw LoadError(std::string("invalid model configuration: ") + e.what());
  }
  const auto layout = parameter_layout(cfg_, vocab_.token_count(), vocab_.pos_count());
  if (layout.size() != params_.size()) {
    throw LoadError("expected " + std::to_string(layout.size()) + " parameter tensors, found " +
                    std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_.name(i) != layout[i].first) {
      throw LoadError("parameter " + std::to_string(i) + " is " + params_.name(i) + ", expected " + layout[i].first);
    }
    if (params_.at(i).shape != layout[i].second) {
      throw LoadError("parameter " + layout[i].first + " has shape " + shape_string(params_.at(i).shape) +
                      ", expected " + shape_string(layout[i].second));
    }
    params_.at(i).requires_grad = true;
  }
}

Var Tagger::build(Binder& p, const Sentence& s, Rng* dropout) const {
  const EmbeddedSentence emb = embed_inputs(p("embed.token"), p("embed.pos"), s, vocab_);
  AssemblyParts parts;
  parts.embeds = emb.embeds;
  if (cfg_.variant == Variant::identity_handcrafted) {
    const FeatureConfig fc = cfg_.feature_config();
    const RowMatrix oh = one_hot_features(extract_all(s, fc), fc);
    parts.handcrafted = p.tape.constant(Tensor({oh.rows(), oh.cols()}, oh.reshaped<Eigen::RowMajor>()));
  }
  if (uses_similarity(cfg_.variant)) {
    for (Direction d : {Direction::backward, Direction::forward}) {
      const std::string dn(direction_name(d));
      const Var alpha = neighbor_similarity(emb.similarity_input, p("sim." + dn + ".w1"), p("sim." + dn + ".w2"),
                                            cfg_.window, d, cfg_.cosine_eps);
      const bool back = d == Direction::backward;
      if (cfg_.variant == Variant::identity_sim) {
        (back ? parts.alpha_backward : parts.alpha_forward) = alpha;
        continue;
      }
      std::vector<ConvFilter> bank;
      for (std::size_t k = 0; k < cfg_.filter_shapes.size(); ++k) {
        const std::string pre = "conv." + dn + "." + std::to_string(k);
        bank.push_back({p(pre + ".filters"), p(pre + ".bias")});
      }
      (back ? parts.pooled_backward : parts.pooled_forward) =
          pool_similarity(conv_similarity(alpha, bank), cfg_.pool_rate);
    }
  }
  Var input = assemble_lstm_input(cfg_.variant, parts);
  if (dropout && cfg_.dropout > 0.0) {
    const double keep = 1.0 - cfg_.dropout;
    Tensor mask(input.shape());
    for (Index i = 0; i < mask.size(); ++i) mask.values[i] = dropout->uniform() < keep ? 1.0 / keep : 0.0;
    input = dropout_apply(input, mask);
  }
  const Var hidden = bilstm(input, {p("lstm.fwd.wx"), p("lstm.fwd.wh"), p("lstm.fwd.b")},
                            {p("lstm.bwd.wx"), p("lstm.bwd.wh"), p("lstm.bwd.b")});
  return add(matmul(hidden, p("emit.w"), true), p("emit.b"));
}

Var Tagger::emissions(Tape& tape, const Sentence& s, bool trainable, Rng* dropout) {
  Binder b{tape, params_, trainable ? &params_ : nullptr, {}};
  return build(b, s, dropout);
}

Var Tagger::emissions(Tape& tape, const Sentence& s) const {
  Binder b{tape, params_, nullptr, {}};
  return build(b, s, nullptr);
}

Var Tagger::loss(Tape& tape, const Example& ex, Rng* dropout) {
  Binder b{tape, params_, &params_, {}};
  const Var e = build(b, ex.sentence, dropout);
  return crf_nll(e, b("crf.transitions"), b("crf.start"), b("crf.stop"), ex.tags);
}

double Tagger::nll(const Example& ex) const {
  Tape tape;
  Binder b{tape, params_, nullptr, {}};
  const Var e = build(b, ex.sentence, nullptr);
  return crf_nll(e, b("crf.transitions"), b("crf.start"), b("crf.stop"), ex.tags).item();
}

TagSequence Tagger::predict(const Sentence& s) const {
  Tape tape;
  const Var e = emissions(tape, s);
  const Index n = e.shape()[0];
  const RowMatrix em = ConstMatrixMap(e.value().data(), n, static_cast<Index>(kNumTags));
  return crf_viterbi(em, params_.get("crf.transitions").matrix(), params_.get("crf.start").values,
                     params_.get("crf.stop").values);
}

SimilarityTensor Tagger::similarity(const Sentence& s, Direction dir) const {
  if (!uses_similarity(cfg_.variant)) {
    throw ContractError("variant " + std::string(variant_name(cfg_.variant)) + " has no similarity layer");
  }
  Tape tape;
  Binder p{tape, params_, nullptr, {}};
  const EmbeddedSentence emb = embed_inputs(p("embed.token"), p("embed.pos"), s, vocab_);
  const std::string dn(direction_name(dir));
  const Var alpha = neighbor_similarity(emb.similarity_input, p("sim." + dn + ".w1"), p("sim." + dn + ".w2"),
                                        cfg_.window, dir, cfg_.cosine_eps);
  return {alpha.tensor(), dir};
}

}  // namespace pmnet
