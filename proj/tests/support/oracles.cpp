#include "oracles.hpp"

#include <cctype>
#include <cmath>
#include <limits>

#include "pmnet/gradcheck.hpp"

namespace oracle {

using namespace pmnet;

Tensor random_tensor(const Shape& shape, Rng& rng, double scale, bool requires_grad) {
  Tensor t(shape, requires_grad);
  for (Index i = 0; i < t.size(); ++i) t.values[i] = rng.uniform(-scale, scale);
  return t;
}

double op_grad_error(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                     const std::vector<Tensor*>& params, Rng& rng) {
  std::optional<Tensor> weights;
  auto loss = [&](Tape& tape) {
    std::vector<Var> vars;
    for (Tensor* p : params) vars.push_back(tape.parameter(*p));
    const Var out = build(tape, vars);
    if (!weights) weights = random_tensor(out.shape(), rng, 1.0, false);
    if (out.shape().empty()) return out;
    return sum(mul(out, tape.constant(*weights)));
  };
  for (Tensor* p : params) p->grad.reset();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  const auto f = [&] {
    Tape tape;
    return loss(tape).item();
  };
  return grad_check(f, params).max_relative_error;
}

Tensor conv2d_same(const Tensor& input, const Tensor& filters, const Tensor& bias) {
  const Index H = input.dim(0), W = input.dim(1), C = input.dim(2);
  const Index kh = filters.dim(0), kw = filters.dim(1), O = filters.dim(3);
  const Index ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  Tensor out({H, W, O});
  for (Index y = 0; y < H; ++y) {
    for (Index x = 0; x < W; ++x) {
      for (Index o = 0; o < O; ++o) {
        double acc = bias.values[o];
        for (Index dy = 0; dy < kh; ++dy) {
          for (Index dx = 0; dx < kw; ++dx) {
            const Index yy = y + dy - ph, xx = x + dx - pw;
            if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
            for (Index c = 0; c < C; ++c) {
              acc += input.values[(yy * W + xx) * C + c] * filters.values[((dy * kw + dx) * C + c) * O + o];
            }
          }
        }
        out.values[(y * W + x) * O + o] = acc;
      }
    }
  }
  return out;
}

Tensor neighbor_similarity(const Tensor& x, const Tensor& w1, const Tensor& w2, Index window, bool backward,
                           double eps) {
  const Index n = x.dim(0), D = x.dim(1), df = w1.dim(0), dg = w1.dim(1);
  auto project = [&](const Tensor& w, Index f, Index i) {
    Vector out = Vector::Zero(dg);
    for (Index r = 0; r < dg; ++r) {
      for (Index c = 0; c < D; ++c) out[r] += w.values[(f * dg + r) * D + c] * x.values[i * D + c];
    }
    return out;
  };
  Tensor alpha({window, n, df});
  for (Index d = 1; d <= window; ++d) {
    for (Index i = 0; i < n; ++i) {
      const Index j = backward ? i - d : i + d;
      for (Index f = 0; f < df; ++f) {
        double v = 0.0;
        if (j >= 0 && j < n) {
          const Vector a = project(w1, f, i), b = project(w2, f, j);
          v = a.dot(b) / (std::max(a.norm(), eps) * std::max(b.norm(), eps));
        }
        alpha.values[((d - 1) * n + i) * df + f] = v;
      }
    }
  }
  return alpha;
}

namespace {

template <typename Fn>
void for_each_path(Index n, Fn&& fn) {
  std::vector<int> path(static_cast<std::size_t>(n), 0);
  while (true) {
    fn(path);
    Index k = n - 1;
    while (k >= 0 && ++path[static_cast<std::size_t>(k)] == 8) path[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) return;
  }
}

}  // namespace

double crf_score(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop,
                 const std::vector<int>& path) {
  double s = start[path.front()] + stop[path.back()];
  for (std::size_t i = 0; i < path.size(); ++i) {
    s += e(static_cast<Index>(i), path[i]);
    if (i) s += t(path[i - 1], path[i]);
  }
  return s;
}

double crf_log_partition(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop) {
  std::vector<double> scores;
  for_each_path(e.rows(), [&](const std::vector<int>& p) { scores.push_back(crf_score(e, t, start, stop, p)); });
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - mx);
  return mx + std::log(acc);
}

TagSequence crf_argmax(const RowMatrix& e, const RowMatrix& t, const Vector& start, const Vector& stop) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> arg;
  for_each_path(e.rows(), [&](const std::vector<int>& p) {
    const double s = crf_score(e, t, start, stop, p);
    if (s > best) {
      best = s;
      arg = p;
    }
  });
  TagSequence out;
  for (int a : arg) out.push_back(static_cast<Tag>(a));
  return out;
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Pattern of `kind` anchored at i, or empty when it would leave the sentence.
std::vector<std::string> pattern(const Sentence& s, long i, PatternKind kind) {
  const long n = static_cast<long>(s.tokens.size());
  auto w = [&](long k) { return lower(s.tokens[static_cast<std::size_t>(k)].surface); };
  auto p = [&](long k) { return s.tokens[static_cast<std::size_t>(k)].pos; };
  if (i < 0 || i >= n) return {};
  switch (kind) {
    case PatternKind::word: return {w(i)};
    case PatternKind::pos: return {p(i)};
    case PatternKind::bigram: return i + 1 < n ? std::vector<std::string>{w(i), w(i + 1)} : std::vector<std::string>{};
    case PatternKind::word_next_pos:
      return i + 1 < n ? std::vector<std::string>{w(i), p(i + 1)} : std::vector<std::string>{};
    case PatternKind::pos_bigram:
      return i + 1 < n ? std::vector<std::string>{p(i), p(i + 1)} : std::vector<std::string>{};
    case PatternKind::pos_trigram:
      return i + 2 < n ? std::vector<std::string>{p(i), p(i + 1), p(i + 2)} : std::vector<std::string>{};
  }
  return {};
}

}  // namespace

std::vector<PatternFeatureVector> scan_features(const Sentence& s, const FeatureConfig& cfg) {
  const long n = static_cast<long>(s.tokens.size());
  const long w = static_cast<long>(cfg.window);
  std::vector<PatternFeatureVector> out(static_cast<std::size_t>(n));
  auto word = [&](long k) { return lower(s.tokens[static_cast<std::size_t>(k)].surface); };
  for (long i = 0; i < n; ++i) {
    PatternFeatureVector& f = out[static_cast<std::size_t>(i)];
    for (int k = 0; k < 6; ++k) {
      const auto kind = static_cast<PatternKind>(k);
      const auto here = pattern(s, i, kind);
      for (int side = 0; side < 2; ++side) {
        if (here.empty()) continue;
        for (long d = 1; d <= w; ++d) {
          const long j = side == 0 ? i - d : i + d;
          if (pattern(s, j, kind) == here) {
            f.at(kind, static_cast<Side>(side)) = static_cast<std::size_t>(d);
            break;
          }
        }
      }
    }
    for (int side = 0; side < 2; ++side) {
      bool hit = false;
      if (i + 1 < n) {
        for (long d = 1; d <= w && !hit; ++d) {
          const long j = side == 0 ? i - d : i + d;
          if (j < 0 || j >= n || word(j) != word(i)) continue;
          for (long g = 0; g <= static_cast<long>(cfg.max_gap); ++g) {
            const long k2 = j + 1 + g;
            if (k2 < n && word(k2) == word(i + 1)) hit = true;
          }
        }
      }
      f.gapped_bigram[static_cast<std::size_t>(side)] = hit;
    }
    for (long d = 1; i + d < n; ++d) {
      if (cfg.conjunctions.contains(word(i + d))) {
        if (d <= w) f.conjunction = static_cast<std::size_t>(d);
        break;
      }
    }
  }
  return out;
}

std::vector<bool> span_membership(const Sentence& s) {
  std::vector<bool> m(s.tokens.size(), false);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (const auto& sp : s.spans) {
      if (sp.start <= i && i <= sp.ip) m[i] = true;
    }
  }
  return m;
}

TagSequence rule_tags(const Sentence& s) {
  const std::vector<bool> edit = span_membership(s);
  const std::size_t n = edit.size();
  TagSequence out(n, Tag::O);
  for (std::size_t i = 0; i < n; ++i) {
    bool onset = false;
    for (const auto& sp : s.spans) onset = onset || (sp.repair_start && *sp.repair_start == i);
    const bool begins = edit[i] && (i == 0 || !edit[i - 1]);
    const bool ends = edit[i] && (i + 1 == n || !edit[i + 1]);
    if (!edit[i]) {
      out[i] = onset ? Tag::C : Tag::O;
    } else if (begins && ends) {
      out[i] = onset ? Tag::C_BE_IP : Tag::BE_IP;
    } else if (ends) {
      out[i] = onset ? Tag::C_IP : Tag::IP;
    } else {
      out[i] = begins ? Tag::BE : Tag::IE;
    }
  }
  return out;
}

ModelConfig toy_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.window = 3;
  c.token_dim = 4;
  c.pos_dim = 3;
  c.similarity_dim = 4;
  c.filter_shapes = {{1, 1}, {3, 1}};
  c.filters_per_shape = 2;
  c.pool_rate = 2;
  c.lstm_hidden = 8;
  c.dropout = 0.0;
  return c;
}

namespace {

using LD = long double;
using Grid = std::vector<std::vector<std::vector<LD>>>;  // [rows][time][channels]

Grid grid(std::size_t a, std::size_t b, std::size_t c) {
  return Grid(a, std::vector<std::vector<LD>>(b, std::vector<LD>(c, 0.0L)));
}

LD sigm(LD v) { return 1.0L / (1.0L + std::exp(-v)); }

LD log_sum(const std::vector<LD>& v) {
  LD mx = v[0];
  for (LD x : v) mx = std::max(mx, x);
  LD acc = 0.0L;
  for (LD x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

// One-hot of the scanned features in the documented bucket layout.
std::vector<std::vector<LD>> one_hot(const std::vector<PatternFeatureVector>& feats, std::size_t w) {
  std::vector<std::vector<LD>> out;
  for (const auto& f : feats) {
    std::vector<LD> row;
    auto put = [&](const std::optional<std::size_t>& d) {
      for (std::size_t b = 1; b <= w + 1; ++b) row.push_back((d ? *d == b : b == w + 1) ? 1.0L : 0.0L);
    };
    for (const auto& d : f.repeat) put(d);
    row.push_back(f.gapped_bigram[0] ? 1.0L : 0.0L);
    row.push_back(f.gapped_bigram[1] ? 1.0L : 0.0L);
    put(f.conjunction);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

long double reference_nll(const Tagger& tagger, const Example& ex) {
  const ModelConfig& cfg = tagger.config();
  const ParamStore& P = tagger.params();
  const Vocabulary& vocab = tagger.vocab();
  const Sentence& s = ex.sentence;
  const std::size_t n = s.size();
  auto at = [&](const std::string& name, Index i) { return static_cast<LD>(P.get(name).values[i]); };

  const auto dt = static_cast<std::size_t>(cfg.token_dim), dp = static_cast<std::size_t>(cfg.pos_dim);
  std::vector<std::vector<LD>> embeds(n), sim_in(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = s.tokens[i];
    const Index tok = vocab.token_id(t.surface), pos = vocab.pos_id(t.pos);
    const Index side = s.similarity_surfaces.empty() ? tok : vocab.token_id(s.similarity_surfaces[i]);
    for (std::size_t k = 0; k < dt; ++k) {
      embeds[i].push_back(at("embed.token", tok * cfg.token_dim + static_cast<Index>(k)));
      sim_in[i].push_back(at("embed.token", side * cfg.token_dim + static_cast<Index>(k)));
    }
    for (std::size_t k = 0; k < dp; ++k) {
      embeds[i].push_back(at("embed.pos", pos * cfg.pos_dim + static_cast<Index>(k)));
      sim_in[i].push_back(at("embed.pos", pos * cfg.pos_dim + static_cast<Index>(k)));
    }
    for (bool b : {t.flags.filled_pause, t.flags.discourse_marker, t.flags.edit_word, t.flags.fragment}) {
      embeds[i].push_back(b ? 1.0L : 0.0L);
    }
  }

  std::vector<std::vector<LD>> input = embeds;
  if (cfg.variant == Variant::identity_handcrafted) {
    const auto oh = one_hot(scan_features(s, cfg.feature_config()), cfg.window);
    for (std::size_t i = 0; i < n; ++i) input[i].insert(input[i].end(), oh[i].begin(), oh[i].end());
  }
  if (uses_similarity(cfg.variant)) {
    const auto w = static_cast<std::size_t>(cfg.window), df = static_cast<std::size_t>(cfg.similarity_dim);
    const auto dg = static_cast<std::size_t>(cfg.proj_dim()), D = dt + dp;
    for (const std::string dir : {"backward", "forward"}) {
      const std::string pre = "sim." + dir;
      const Vector& w1 = P.get(pre + ".w1").values;
      const Vector& w2 = P.get(pre + ".w2").values;
      auto project = [&](const Vector& wt, std::size_t f, std::size_t i) {
        std::vector<LD> out(dg, 0.0L);
        for (std::size_t r = 0; r < dg; ++r) {
          for (std::size_t c = 0; c < D; ++c) {
            out[r] += static_cast<LD>(wt[static_cast<Index>((f * dg + r) * D + c)]) * sim_in[i][c];
          }
        }
        return out;
      };
      std::vector<std::vector<std::vector<LD>>> proj1(df), proj2(df);
      for (std::size_t f = 0; f < df; ++f) {
        for (std::size_t i = 0; i < n; ++i) {
          proj1[f].push_back(project(w1, f, i));
          proj2[f].push_back(project(w2, f, i));
        }
      }
      Grid alpha = grid(w, n, df);
      for (std::size_t d = 1; d <= w; ++d) {
        for (std::size_t i = 0; i < n; ++i) {
          const long j = dir == "backward" ? static_cast<long>(i) - static_cast<long>(d) : static_cast<long>(i + d);
          if (j < 0 || j >= static_cast<long>(n)) continue;
          for (std::size_t f = 0; f < df; ++f) {
            const auto& a = proj1[f][i];
            const auto& b = proj2[f][static_cast<std::size_t>(j)];
            LD dot = 0, na = 0, nb = 0;
            for (std::size_t r = 0; r < dg; ++r) {
              dot += a[r] * b[r];
              na += a[r] * a[r];
              nb += b[r] * b[r];
            }
            const LD eps = static_cast<LD>(cfg.cosine_eps);
            alpha[d - 1][i][f] = dot / (std::max(std::sqrt(na), eps) * std::max(std::sqrt(nb), eps));
          }
        }
      }
      Grid feat = alpha;
      if (cfg.variant == Variant::identity_sim_conv) {
        const auto l = static_cast<std::size_t>(cfg.filters_per_shape);
        Grid conv = grid(w, n, cfg.filter_shapes.size() * l);
        for (std::size_t k = 0; k < cfg.filter_shapes.size(); ++k) {
          const auto de = static_cast<long>(cfg.filter_shapes[k].distance_extent);
          const auto te = static_cast<long>(cfg.filter_shapes[k].time_extent);
          const std::string cp = "conv." + dir + "." + std::to_string(k);
          const Vector& filt = P.get(cp + ".filters").values;
          const Vector& bias = P.get(cp + ".bias").values;
          for (std::size_t y = 0; y < w; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
              for (std::size_t o = 0; o < l; ++o) {
                LD acc = static_cast<LD>(bias[static_cast<Index>(o)]);
                for (long a = 0; a < de; ++a) {
                  for (long b = 0; b < te; ++b) {
                    const long yy = static_cast<long>(y) + a - (de - 1) / 2, xx = static_cast<long>(x) + b - (te - 1) / 2;
                    if (yy < 0 || yy >= static_cast<long>(w) || xx < 0 || xx >= static_cast<long>(n)) continue;
                    for (std::size_t c = 0; c < df; ++c) {
                      const auto idx = ((static_cast<std::size_t>(a * te + b)) * df + c) * l + o;
                      acc += alpha[static_cast<std::size_t>(yy)][static_cast<std::size_t>(xx)][c] *
                             static_cast<LD>(filt[static_cast<Index>(idx)]);
                    }
                  }
                }
                conv[y][x][k * l + o] = std::tanh(acc);
              }
            }
          }
        }
        const auto m = static_cast<std::size_t>(cfg.pool_rate);
        const std::size_t rows = (w + m - 1) / m, C = conv[0][0].size();
        feat = grid(rows, n, C);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t c = 0; c < C; ++c) {
              LD best = conv[r * m][x][c];
              for (std::size_t y = r * m; y < std::min(w, r * m + m); ++y) best = std::max(best, conv[y][x][c]);
              feat[r][x][c] = best;
            }
          }
        }
      }
      for (std::size_t t = 0; t < n; ++t) {
        for (const auto& row : feat) input[t].insert(input[t].end(), row[t].begin(), row[t].end());
      }
    }
  }

  const auto H = static_cast<std::size_t>(cfg.lstm_hidden), in = input[0].size();
  std::vector<std::vector<LD>> hidden(n, std::vector<LD>(2 * H, 0.0L));
  for (const std::string dir : {"fwd", "bwd"}) {
    const std::string pre = "lstm." + dir;
    const Vector& wx = P.get(pre + ".wx").values;
    const Vector& wh = P.get(pre + ".wh").values;
    const Vector& bb = P.get(pre + ".b").values;
    std::vector<LD> h(H, 0.0L), c(H, 0.0L);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t t = dir == "fwd" ? k : n - 1 - k;
      std::vector<LD> z(4 * H);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        z[r] = static_cast<LD>(bb[static_cast<Index>(r)]);
        for (std::size_t q = 0; q < in; ++q) z[r] += static_cast<LD>(wx[static_cast<Index>(r * in + q)]) * input[t][q];
        for (std::size_t q = 0; q < H; ++q) z[r] += static_cast<LD>(wh[static_cast<Index>(r * H + q)]) * h[q];
      }
      for (std::size_t u = 0; u < H; ++u) {
        c[u] = sigm(z[H + u]) * c[u] + sigm(z[u]) * std::tanh(z[2 * H + u]);
        h[u] = sigm(z[3 * H + u]) * std::tanh(c[u]);
        hidden[t][(dir == "fwd" ? 0 : H) + u] = h[u];
      }
    }
  }

  const Vector& ew = P.get("emit.w").values;
  std::vector<std::vector<LD>> e(n, std::vector<LD>(kNumTags));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t y = 0; y < kNumTags; ++y) {
      LD v = at("emit.b", static_cast<Index>(y));
      for (std::size_t q = 0; q < 2 * H; ++q) v += static_cast<LD>(ew[static_cast<Index>(y * 2 * H + q)]) * hidden[t][q];
      e[t][y] = v;
    }
  }
  auto trans = [&](std::size_t a, std::size_t b) { return at("crf.transitions", static_cast<Index>(a * kNumTags + b)); };
  std::vector<LD> alpha(kNumTags);
  for (std::size_t y = 0; y < kNumTags; ++y) alpha[y] = at("crf.start", static_cast<Index>(y)) + e[0][y];
  for (std::size_t t = 1; t < n; ++t) {
    std::vector<LD> next(kNumTags);
    for (std::size_t y = 0; y < kNumTags; ++y) {
      std::vector<LD> terms(kNumTags);
      for (std::size_t a = 0; a < kNumTags; ++a) terms[a] = alpha[a] + trans(a, y);
      next[y] = log_sum(terms) + e[t][y];
    }
    alpha = next;
  }
  for (std::size_t y = 0; y < kNumTags; ++y) alpha[y] += at("crf.stop", static_cast<Index>(y));
  const LD log_z = log_sum(alpha);
  const auto g = [&](std::size_t t) { return static_cast<std::size_t>(ex.tags[t]); };
  LD gold = at("crf.start", static_cast<Index>(g(0))) + at("crf.stop", static_cast<Index>(g(n - 1)));
  for (std::size_t t = 0; t < n; ++t) {
    gold += e[t][g(t)];
    if (t) gold += trans(g(t - 1), g(t));
  }
  return log_z - gold;
}

void randomize_params(ParamStore& params, Rng& rng, double scale) {
  for (Tensor* t : params.tensors()) {
    for (Index i = 0; i < t->size(); ++i) t->values[i] = rng.uniform(-scale, scale);
  }
}

Sentence random_sentence(Rng& rng, std::size_t min_len, std::size_t max_len) {
  static const std::vector<std::string> words = {"a", "A", "b", "c", "the", "The", "and", "but", "uh", "go-"};
  static const std::vector<std::string> tags = {"DT", "NN", "VB", "CC"};
  Sentence s;
  const std::size_t n = min_len + rng.below(max_len - min_len + 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.tokens.push_back(Token{words[rng.below(words.size())], tags[rng.below(tags.size())], {}});
  }
  apply_lexicon_flags(s);
  return s;
}

Corpus toy_corpus(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  for (std::size_t k = 0; k < count; ++k) {
    Sentence s = random_sentence(rng, 2, 6);
    TagSequence t(s.size());
    for (auto& x : t) x = static_cast<Tag>(rng.below(kNumTags));
    c.push_back(Example{s, t});
  }
  return c;
}

GradCheckResult model_grad_check(Tagger& tagger, const Example& ex) {
  tagger.params().zero_grad();
  {
    Tape tape;
    tape.backward(tagger.loss(tape, ex));
  }
  const long double base = reference_nll(tagger, ex);
  const auto params = tagger.params().tensors();
  return grad_check([&] { return static_cast<double>(reference_nll(tagger, ex) - base); }, params);
}

}  // namespace oracle
