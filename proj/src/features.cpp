#include "pmnet/features.hpp"

#include <ostream>

#include "pmnet/error.hpp"

namespace pmnet {

namespace {

struct View {
  std::vector<std::string> words;
  const Sentence* s;

  explicit View(const Sentence& sentence) : s(&sentence) {
    words.reserve(sentence.size());
    for (const Token& t : sentence.tokens) words.push_back(lowercase(t.surface));
  }
  std::size_t size() const { return words.size(); }
  const std::string& pos(std::size_t i) const { return s->tokens[i].pos; }
};

std::size_t pattern_length(PatternKind k) {
  switch (k) {
    case PatternKind::word:
    case PatternKind::pos: return 1;
    case PatternKind::pos_trigram: return 3;
    default: return 2;
  }
}

bool same_pattern(const View& v, PatternKind k, std::size_t a, std::size_t b) {
  const std::size_t len = pattern_length(k);
  if (a + len > v.size() || b + len > v.size()) return false;
  switch (k) {
    case PatternKind::word: return v.words[a] == v.words[b];
    case PatternKind::bigram: return v.words[a] == v.words[b] && v.words[a + 1] == v.words[b + 1];
    case PatternKind::pos: return v.pos(a) == v.pos(b);
    case PatternKind::word_next_pos: return v.words[a] == v.words[b] && v.pos(a + 1) == v.pos(b + 1);
    case PatternKind::pos_bigram: return v.pos(a) == v.pos(b) && v.pos(a + 1) == v.pos(b + 1);
    case PatternKind::pos_trigram:
      return v.pos(a) == v.pos(b) && v.pos(a + 1) == v.pos(b + 1) && v.pos(a + 2) == v.pos(b + 2);
  }
  return false;
}

std::optional<std::size_t> repeat_distance(const View& v, std::size_t i, PatternKind k, Side side, std::size_t w) {
  for (std::size_t d = 1; d <= w; ++d) {
    if (side == Side::preceding) {
      if (d > i) break;
      if (same_pattern(v, k, i, i - d)) return d;
    } else {
      if (i + d >= v.size()) break;
      if (same_pattern(v, k, i, i + d)) return d;
    }
  }
  return std::nullopt;
}

bool gapped_repeat(const View& v, std::size_t i, Side side, std::size_t w, std::size_t max_gap) {
  const std::size_t n = v.size();
  if (i + 1 >= n) return false;
  for (std::size_t d = 1; d <= w; ++d) {
    std::size_t j;
    if (side == Side::preceding) {
      if (d > i) break;
      j = i - d;
    } else {
      j = i + d;
      if (j >= n) break;
    }
    if (v.words[j] != v.words[i]) continue;
    for (std::size_t g = 0; g <= max_gap && j + 1 + g < n; ++g) {
      if (v.words[j + 1 + g] == v.words[i + 1]) return true;
    }
  }
  return false;
}

std::optional<std::size_t> conj_distance(const View& v, std::size_t i, const std::set<std::string>& conj) {
  for (std::size_t j = i + 1; j < v.size(); ++j) {
    if (conj.contains(v.words[j])) return j - i;
  }
  return std::nullopt;
}

void check_index(const Sentence& s, std::size_t i) {
  if (i >= s.size()) {
    throw ParameterError("token index " + std::to_string(i) + " outside sentence of length " + std::to_string(s.size()));
  }
}

}  // namespace

std::string_view pattern_kind_name(PatternKind k) {
  switch (k) {
    case PatternKind::word: return "word";
    case PatternKind::bigram: return "bigram";
    case PatternKind::pos: return "pos";
    case PatternKind::word_next_pos: return "word_next_pos";
    case PatternKind::pos_bigram: return "pos_bigram";
    case PatternKind::pos_trigram: return "pos_trigram";
  }
  return "?";
}

std::optional<std::size_t> distance_to_repeat(const Sentence& s, std::size_t i, PatternKind kind, Side side,
                                              std::size_t window) {
  check_index(s, i);
  if (window < 1) throw ParameterError("distance_to_repeat: window must be at least 1");
  return repeat_distance(View(s), i, kind, side, window);
}

bool gapped_bigram_repeat(const Sentence& s, std::size_t i, Side side, std::size_t window, std::size_t max_gap) {
  check_index(s, i);
  return gapped_repeat(View(s), i, side, window, max_gap);
}

std::optional<std::size_t> distance_to_conjunction(const Sentence& s, std::size_t i,
                                                   const std::set<std::string>& conjunctions) {
  check_index(s, i);
  return conj_distance(View(s), i, conjunctions);
}

std::vector<PatternFeatureVector> extract_all(const Sentence& s, const FeatureConfig& cfg) {
  if (cfg.window < 1) throw ParameterError("extract_all: window must be at least 1");
  const View v(s);
  std::vector<PatternFeatureVector> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    PatternFeatureVector& f = out[i];
    for (std::size_t k = 0; k < kNumPatternKinds; ++k) {
      for (Side side : {Side::preceding, Side::following}) {
        f.at(static_cast<PatternKind>(k), side) = repeat_distance(v, i, static_cast<PatternKind>(k), side, cfg.window);
      }
    }
    f.gapped_bigram[0] = gapped_repeat(v, i, Side::preceding, cfg.window, cfg.max_gap);
    f.gapped_bigram[1] = gapped_repeat(v, i, Side::following, cfg.window, cfg.max_gap);
    f.conjunction = conj_distance(v, i, cfg.conjunctions);
    if (f.conjunction && *f.conjunction > cfg.window) f.conjunction.reset();
  }
  return out;
}

Index feature_width(const FeatureConfig& cfg) {
  const auto slot = static_cast<Index>(cfg.window + 1);
  return static_cast<Index>(2 * kNumPatternKinds) * slot + 2 + slot;
}

RowMatrix one_hot_features(const std::vector<PatternFeatureVector>& feats, const FeatureConfig& cfg) {
  const auto slot = static_cast<Index>(cfg.window + 1);
  RowMatrix m = RowMatrix::Zero(static_cast<Index>(feats.size()), feature_width(cfg));
  auto bucket = [&](const std::optional<std::size_t>& d) {
    return d ? static_cast<Index>(*d) - 1 : slot - 1;
  };
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto r = static_cast<Index>(i);
    Index col = 0;
    for (const auto& d : feats[i].repeat) {
      m(r, col + bucket(d)) = 1.0;
      col += slot;
    }
    m(r, col++) = feats[i].gapped_bigram[0] ? 1.0 : 0.0;
    m(r, col++) = feats[i].gapped_bigram[1] ? 1.0 : 0.0;
    m(r, col + bucket(feats[i].conjunction)) = 1.0;
  }
  return m;
}

void write_feature_dump(std::ostream& out, const Corpus& corpus, const FeatureConfig& cfg,
                        const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  auto value = [](const std::optional<std::size_t>& d) { return d ? std::to_string(*d) : std::string("none"); };
  for (const Example& ex : corpus) {
    const auto feats = extract_all(ex.sentence, cfg);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const Token& t = ex.sentence.tokens[i];
      out << (i + 1) << '\t' << t.surface << '\t' << t.pos;
      for (std::size_t k = 0; k < kNumPatternKinds; ++k) {
        const auto kind = static_cast<PatternKind>(k);
        out << '\t' << pattern_kind_name(kind) << "_prev=" << value(feats[i].at(kind, Side::preceding));
        out << '\t' << pattern_kind_name(kind) << "_next=" << value(feats[i].at(kind, Side::following));
      }
      out << "\tgapped_bigram_prev=" << (feats[i].gapped_bigram[0] ? 1 : 0);
      out << "\tgapped_bigram_next=" << (feats[i].gapped_bigram[1] ? 1 : 0);
      out << "\tconj=" << value(feats[i].conjunction);
      out << '\t' << (i < ex.tags.size() ? tag_name(ex.tags[i]) : std::string_view("O")) << '\n';
    }
    out << '\n';
  }
}

}  // namespace pmnet
