#include "pmnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pmnet/error.hpp"
#include "pmnet/random.hpp"

namespace pmnet {

namespace {

const std::vector<std::string> kContentClasses = {"NN", "VB", "VBD", "JJ", "RB"};

struct ClosedClass {
  std::string pos;
  std::vector<std::string> words;
};

const std::map<std::string, ClosedClass>& closed_classes() {
  static const std::map<std::string, ClosedClass> classes = {
      {"SUBJ", {"PRP", {"i", "you", "we", "they", "he", "she"}}},
      {"OBJ", {"PRP", {"him", "her", "them", "it", "me", "us"}}},
      {"DT", {"DT", {"the", "a", "this", "that", "some"}}},
      {"IN", {"IN", {"in", "on", "at", "with", "for", "about", "from"}}},
      {"MD", {"MD", {"will", "would", "can", "could", "should"}}},
      {"CC", {"CC", {"and", "but", "or"}}},
      {"TO", {"TO", {"to"}}},
  };
  return classes;
}

struct Filler {
  std::vector<Token> tokens;
};

const std::vector<Filler>& fillers() {
  static const std::vector<Filler> f = {
      {{{"uh", "UH", {}}}},
      {{{"um", "UH", {}}}},
      {{{"well", "UH", {}}}},
      {{{"you", "PRP", {}}, {"know", "VBP", {}}}},
      {{{"i", "PRP", {}}, {"mean", "VBP", {}}}},
  };
  return f;
}

std::string make_root(Rng& rng) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  const std::size_t syllables = 2 + rng.below(2);
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += consonants[rng.below(consonants.size())];
    w += vowels[rng.below(vowels.size())];
  }
  if (rng.bernoulli(0.3)) w += consonants[rng.below(consonants.size())];
  return w;
}

// Zipf-weighted sampler over indices {0..n-1}.
class ZipfSampler {
 public:
  ZipfSampler() = default;
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double total = 0;
    for (std::size_t k = 0; k < n; ++k) {
      total += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
      cdf_[k] = total;
    }
    for (double& c : cdf_) c /= total;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

class Generator {
 public:
  Generator(const SynthConfig& cfg, BaseVocabulary vocab) : cfg_(cfg), vocab_(std::move(vocab)), rng_(make_rng(cfg.seed, Stream::corpus)) {
    for (const auto& cls : kContentClasses) zipf_[cls] = ZipfSampler(vocab_.content.at(cls).size(), cfg.zipf_exponent);
  }

  Sentence next() {
    const bool rep = rng_.bernoulli(cfg_.p_repetition);
    const bool sub = rng_.bernoulli(cfg_.p_substitution_repair);
    const bool restart = rng_.bernoulli(cfg_.p_restart);
    const std::size_t rep_len = rep ? geometric() : 0;
    const std::size_t sub_len = sub ? geometric() : 0;

    std::vector<Token> base = sentence();
    for (int tries = 0; base.size() < rep_len + sub_len && tries < 200; ++tries) base = sentence();
    if (base.size() < rep_len + sub_len) throw ConfigError("synthetic generator: cannot fit reparandum lengths");

    struct Region {
      std::size_t start, length;
      bool repetition;
    };
    std::vector<Region> regions;
    if (rep || sub) {
      const bool rep_first = rng_.bernoulli(0.5);
      const std::size_t len1 = rep_first ? rep_len : sub_len, len2 = rep_first ? sub_len : rep_len;
      const std::size_t s1 = rng_.below(base.size() - len1 - len2 + 1);
      const std::size_t s2 = s1 + len1 + rng_.below(base.size() - len2 - (s1 + len1) + 1);
      if (len1) regions.push_back({s1, len1, rep_first});
      if (len2) regions.push_back({s2, len2, !rep_first});
    }

    Sentence s;
    std::size_t cursor = 0;
    for (const Region& r : regions) {
      for (; cursor < r.start; ++cursor) s.tokens.push_back(base[cursor]);
      const std::vector<Token> repair(base.begin() + static_cast<std::ptrdiff_t>(r.start),
                                      base.begin() + static_cast<std::ptrdiff_t>(r.start + r.length));
      const std::vector<Token> reparandum = r.repetition ? repair : substitute(repair);
      const std::size_t at = s.tokens.size();
      s.tokens.insert(s.tokens.end(), reparandum.begin(), reparandum.end());
      s.tokens.insert(s.tokens.end(), repair.begin(), repair.end());
      s.spans.push_back({at, at + r.length - 1, at + r.length, at + 2 * r.length});
      cursor = r.start + r.length;
    }
    for (; cursor < base.size(); ++cursor) s.tokens.push_back(base[cursor]);

    if (restart) {
      const std::vector<Token> abandoned = clause();
      const std::size_t len = std::clamp<std::size_t>(geometric(), 1, abandoned.size() - 1);
      s.tokens.insert(s.tokens.begin(), abandoned.begin(), abandoned.begin() + static_cast<std::ptrdiff_t>(len));
      for (DisflSpan& sp : s.spans) shift(sp, len);
      s.spans.insert(s.spans.begin(), DisflSpan{0, len - 1, std::nullopt, len});
    }

    insert_fillers(s);
    apply_lexicon_flags(s);
    return s;
  }

 private:
  static void shift(DisflSpan& sp, std::size_t by) {
    sp.start += by;
    sp.ip += by;
    if (sp.repair_start) *sp.repair_start += by;
    sp.end += by;
  }

  std::size_t geometric() {
    std::size_t len = 1;
    while (!rng_.bernoulli(cfg_.length_p) && len < 64) ++len;
    return len;
  }

  Token closed(const std::string& cls) {
    const ClosedClass& c = closed_classes().at(cls);
    return Token{c.words[rng_.below(c.words.size())], c.pos, {}};
  }

  Token open(const std::string& pos) {
    const auto& words = vocab_.content.at(pos);
    return Token{words[zipf_.at(pos)(rng_)], pos, {}};
  }

  std::vector<Token> noun_phrase(bool subject) {
    std::vector<Token> np;
    if (rng_.bernoulli(0.4)) {
      np.push_back(closed(subject ? "SUBJ" : "OBJ"));
      return np;
    }
    np.push_back(closed("DT"));
    if (rng_.bernoulli(0.35)) {
      np.push_back(open("JJ"));
      if (rng_.bernoulli(0.15)) np.push_back(open("JJ"));
    }
    np.push_back(open("NN"));
    if (rng_.bernoulli(0.15)) np.push_back(open("NN"));
    return np;
  }

  // Object position: occasionally a coordinated pair.
  std::vector<Token> object_phrase() {
    std::vector<Token> np = noun_phrase(false);
    if (rng_.bernoulli(0.1)) {
      np.push_back(closed("CC"));
      auto more = noun_phrase(false);
      np.insert(np.end(), more.begin(), more.end());
    }
    return np;
  }

  std::vector<Token> clause() {
    std::vector<Token> c = noun_phrase(true);
    auto append = [&c](std::vector<Token> more) { c.insert(c.end(), more.begin(), more.end()); };
    if (rng_.bernoulli(0.2)) c.push_back(open("RB"));
    const double form = rng_.uniform();
    if (form < 0.45) {
      c.push_back(open("VBD"));
      append(object_phrase());
    } else if (form < 0.7) {
      c.push_back(closed("MD"));
      c.push_back(open("VB"));
      append(object_phrase());
    } else if (form < 0.85) {
      c.push_back(open("VBD"));
      c.push_back(closed("TO"));
      c.push_back(open("VB"));
      append(noun_phrase(false));
    } else {
      c.push_back(open("VBD"));
      c.push_back(open("JJ"));
    }
    if (rng_.bernoulli(0.35)) {
      c.push_back(closed("IN"));
      append(noun_phrase(false));
      if (rng_.bernoulli(0.3)) {
        c.push_back(closed("IN"));
        append(noun_phrase(false));
      }
    }
    return c;
  }

  std::vector<Token> sentence() {
    std::vector<Token> s = clause();
    if (rng_.bernoulli(0.3)) {
      s.push_back(closed("CC"));
      auto more = clause();
      s.insert(s.end(), more.begin(), more.end());
    }
    return s;
  }

  Token replacement(const Token& t) {
    if (vocab_.content.contains(t.pos)) {
      const auto& words = vocab_.content.at(t.pos);
      for (int tries = 0; tries < 16; ++tries) {
        Token r = open(t.pos);
        if (r.surface != t.surface) return r;
      }
      return Token{words[(std::find(words.begin(), words.end(), t.surface) - words.begin() + 1) % words.size()], t.pos, {}};
    }
    for (const auto& [name, cls] : closed_classes()) {
      if (cls.pos != t.pos || std::find(cls.words.begin(), cls.words.end(), t.surface) == cls.words.end()) continue;
      if (cls.words.size() < 2) return t;
      for (int tries = 0; tries < 16; ++tries) {
        Token r = closed(name);
        if (r.surface != t.surface) return r;
      }
    }
    return t;
  }

  // A same-length reparandum that shares the repair's first POS and differs
  // from it in at least one word.
  std::vector<Token> substitute(const std::vector<Token>& repair) {
    std::vector<Token> out = repair;
    out[0] = replacement(repair[0]);
    for (std::size_t k = 1; k < out.size(); ++k) {
      if (rng_.bernoulli(0.5)) out[k] = replacement(repair[k]);
    }
    if (out == repair) {
      for (std::size_t k = 0; k < out.size() && out == repair; ++k) out[k] = replacement(repair[k]);
    }
    return out;
  }

  void insert_fillers(Sentence& s) {
    if (cfg_.filler_rate <= 0) return;
    Sentence out;
    out.spans = s.spans;
    for (std::size_t p = 0; p <= s.size(); ++p) {
      const bool inside = std::any_of(s.spans.begin(), s.spans.end(),
                                      [p](const DisflSpan& sp) { return sp.start < p && p < sp.end; });
      if (!inside && rng_.bernoulli(cfg_.filler_rate)) {
        const Filler& f = fillers()[rng_.below(fillers().size())];
        out.tokens.insert(out.tokens.end(), f.tokens.begin(), f.tokens.end());
        for (std::size_t k = 0; k < s.spans.size(); ++k) {
          if (s.spans[k].start >= p) shift(out.spans[k], f.tokens.size());
        }
      }
      if (p < s.size()) out.tokens.push_back(s.tokens[p]);
    }
    s = std::move(out);
  }

  const SynthConfig& cfg_;
  BaseVocabulary vocab_;
  Rng rng_;
  std::map<std::string, ZipfSampler> zipf_;
};

}  // namespace

BaseVocabulary BaseVocabulary::generate(std::uint64_t seed, std::size_t words_per_class, const BaseVocabulary* exclude) {
  Rng rng(seed, static_cast<std::uint64_t>(Stream::vocabulary));
  std::set<std::string> taken;
  for (const auto& [name, cls] : closed_classes()) taken.insert(cls.words.begin(), cls.words.end());
  for (const auto& f : fillers())
    for (const auto& t : f.tokens) taken.insert(t.surface);
  for (const auto& w : Lexicons::defaults().edit_words) taken.insert(w);
  for (const auto& w : Lexicons::defaults().conjunctions) taken.insert(w);
  for (const auto& w : Lexicons::defaults().filled_pauses) taken.insert(w);
  for (const auto& m : Lexicons::defaults().discourse_markers) taken.insert(m.begin(), m.end());
  if (exclude) {
    for (const auto& w : exclude->all_words()) taken.insert(w);
  }
  auto fresh = [&](const std::string& suffix) {
    while (true) {
      std::string w = make_root(rng);
      if (!taken.contains(w) && !taken.contains(w + suffix)) {
        taken.insert(w);
        return w;
      }
    }
  };
  BaseVocabulary v;
  for (std::size_t i = 0; i < words_per_class; ++i) v.content["NN"].push_back(fresh(""));
  for (std::size_t i = 0; i < words_per_class; ++i) {
    const std::string root = fresh("ed");
    v.content["VB"].push_back(root);
    v.content["VBD"].push_back(root + "ed");
    taken.insert(root + "ed");
  }
  for (std::size_t i = 0; i < words_per_class; ++i) v.content["JJ"].push_back(fresh(""));
  for (std::size_t i = 0; i < words_per_class; ++i) {
    const std::string w = fresh("ly") + "ly";
    taken.insert(w);
    v.content["RB"].push_back(w);
  }
  return v;
}

std::vector<std::string> BaseVocabulary::all_words() const {
  std::vector<std::string> out;
  for (const auto& [pos, words] : content) out.insert(out.end(), words.begin(), words.end());
  return out;
}

void SynthConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(p_repetition, "p_repetition");
  prob(p_substitution_repair, "p_substitution_repair");
  prob(p_restart, "p_restart");
  prob(filler_rate, "filler_rate");
  if (!(length_p > 0.0 && length_p < 1.0)) throw ConfigError("length_p must lie in (0, 1)");
  if (!(zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be non-negative");
  if (!vocabulary && content_words < 2) throw ConfigError("vocabulary too small for templates: content_words < 2");
  if (vocabulary) {
    for (const auto& cls : kContentClasses) {
      auto it = vocabulary->content.find(cls);
      if (it == vocabulary->content.end() || it->second.size() < 2) {
        throw ConfigError("vocabulary too small for templates: class " + cls + " needs at least 2 words");
      }
    }
    if (vocabulary->content.at("VB").size() != vocabulary->content.at("VBD").size()) {
      throw ConfigError("vocabulary VB and VBD lists must align");
    }
  }
}

BaseVocabulary SynthConfig::resolve_vocabulary() const {
  if (vocabulary) return *vocabulary;
  if (exclude_vocab_seed) {
    const BaseVocabulary other = BaseVocabulary::generate(*exclude_vocab_seed, content_words);
    return BaseVocabulary::generate(vocab_seed, content_words, &other);
  }
  return BaseVocabulary::generate(vocab_seed, content_words);
}

KeyValues SynthConfig::to_kv() const {
  KeyValues kv{
      {"seed", std::to_string(seed)},
      {"sentences", std::to_string(sentence_count)},
      {"domain", domain},
      {"vocab_seed", std::to_string(vocab_seed)},
      {"content_words", std::to_string(content_words)},
      {"zipf_exponent", format_double(zipf_exponent)},
      {"p_repetition", format_double(p_repetition)},
      {"p_substitution_repair", format_double(p_substitution_repair)},
      {"p_restart", format_double(p_restart)},
      {"length_p", format_double(length_p)},
      {"filler_rate", format_double(filler_rate)},
  };
  if (exclude_vocab_seed) kv["exclude_vocab_seed"] = std::to_string(*exclude_vocab_seed);
  return kv;
}

SynthConfig SynthConfig::from_kv(const KeyValues& kv) {
  SynthConfig c;
  c.seed = kv_uint(kv, "seed", c.seed);
  c.sentence_count = kv_uint(kv, "sentences", c.sentence_count);
  c.domain = kv_string(kv, "domain", c.domain);
  c.vocab_seed = kv_uint(kv, "vocab_seed", c.vocab_seed);
  c.content_words = kv_uint(kv, "content_words", c.content_words);
  if (kv.contains("exclude_vocab_seed")) c.exclude_vocab_seed = kv_uint(kv, "exclude_vocab_seed", 0);
  c.zipf_exponent = kv_double(kv, "zipf_exponent", c.zipf_exponent);
  c.p_repetition = kv_double(kv, "p_repetition", c.p_repetition);
  c.p_substitution_repair = kv_double(kv, "p_substitution_repair", c.p_substitution_repair);
  c.p_restart = kv_double(kv, "p_restart", c.p_restart);
  c.length_p = kv_double(kv, "length_p", c.length_p);
  c.filler_rate = kv_double(kv, "filler_rate", c.filler_rate);
  c.validate();
  return c;
}

Corpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Generator gen(cfg, cfg.resolve_vocabulary());
  Corpus corpus;
  corpus.reserve(cfg.sentence_count);
  for (std::size_t i = 0; i < cfg.sentence_count; ++i) corpus.push_back(make_example(gen.next()));
  return corpus;
}

}  // namespace pmnet
