#ifndef PMNET_SYNTH_HPP_
#define PMNET_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmnet/corpus.hpp"
#include "pmnet/kvconfig.hpp"

namespace pmnet {

// Open-class words keyed by POS (NN, VB, VBD, JJ, RB). VB and VBD lists are
// index-aligned. Closed-class words are shared by every domain.
struct BaseVocabulary {
  std::map<std::string, std::vector<std::string>> content;

  // Pseudo-words built from CV syllables. Words appearing in `exclude` are
  // skipped, so two vocabularies can be made disjoint.
  static BaseVocabulary generate(std::uint64_t seed, std::size_t words_per_class,
                                 const BaseVocabulary* exclude = nullptr);

  std::vector<std::string> all_words() const;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t sentence_count = 1000;
  std::string domain = "A";

  // Base vocabulary: generated from vocab_seed unless `vocabulary` is set.
  std::uint64_t vocab_seed = 1;
  std::size_t content_words = 150;
  std::optional<std::uint64_t> exclude_vocab_seed;
  std::optional<BaseVocabulary> vocabulary;
  double zipf_exponent = 1.0;

  // Per-sentence injection probabilities.
  double p_repetition = 0.3;
  double p_substitution_repair = 0.15;
  double p_restart = 0.05;
  // Reparandum lengths are geometric on {1, 2, ...} with this success probability.
  double length_p = 0.5;
  // Probability of a filler at each eligible gap between tokens.
  double filler_rate = 0.03;

  void validate() const;
  BaseVocabulary resolve_vocabulary() const;

  // An explicit `vocabulary` has no key=value form.
  KeyValues to_kv() const;
  static SynthConfig from_kv(const KeyValues& kv);
};

Corpus generate_synthetic(const SynthConfig& cfg);

}  // namespace pmnet

#endif  // PMNET_SYNTH_HPP_
