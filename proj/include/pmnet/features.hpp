#ifndef PMNET_FEATURES_HPP_
#define PMNET_FEATURES_HPP_

#include <array>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmnet/corpus.hpp"
#include "pmnet/tensor.hpp"

namespace pmnet {

enum class PatternKind { word, bigram, pos, word_next_pos, pos_bigram, pos_trigram };
inline constexpr std::size_t kNumPatternKinds = 6;

enum class Side { preceding, following };

std::string_view pattern_kind_name(PatternKind k);

struct FeatureConfig {
  std::size_t window = 10;
  std::size_t max_gap = 3;
  std::set<std::string> conjunctions = Lexicons::defaults().conjunctions;
};

// Smallest offset d in [1, w] whose pattern at i -/+ d equals the pattern at
// i. Words compare case-insensitively; patterns never cross the sentence end.
std::optional<std::size_t> distance_to_repeat(const Sentence& s, std::size_t i, PatternKind kind, Side side,
                                              std::size_t window);

// Whether the bigram (i, i+1) reappears starting within `window` tokens on
// `side`, with up to `max_gap` tokens between its two words.
bool gapped_bigram_repeat(const Sentence& s, std::size_t i, Side side, std::size_t window, std::size_t max_gap);

std::optional<std::size_t> distance_to_conjunction(const Sentence& s, std::size_t i,
                                                   const std::set<std::string>& conjunctions =
                                                       Lexicons::defaults().conjunctions);

struct PatternFeatureVector {
  // Indexed by kind * 2 + side.
  std::array<std::optional<std::size_t>, 2 * kNumPatternKinds> repeat{};
  std::array<bool, 2> gapped_bigram{};
  // Bucketed: distances beyond the window are recorded as none.
  std::optional<std::size_t> conjunction;

  std::optional<std::size_t>& at(PatternKind k, Side s) {
    return repeat[static_cast<std::size_t>(k) * 2 + static_cast<std::size_t>(s)];
  }
  const std::optional<std::size_t>& at(PatternKind k, Side s) const {
    return repeat[static_cast<std::size_t>(k) * 2 + static_cast<std::size_t>(s)];
  }

  friend bool operator==(const PatternFeatureVector&, const PatternFeatureVector&) = default;
};

std::vector<PatternFeatureVector> extract_all(const Sentence& s, const FeatureConfig& cfg = {});

// One-hot layout per token: each repeat slot over {1..w, none}, the two gapped
// bigram bits, then the conjunction slot over {1..w, none}.
Index feature_width(const FeatureConfig& cfg);
RowMatrix one_hot_features(const std::vector<PatternFeatureVector>& feats, const FeatureConfig& cfg);

// Columnar dump: INDEX, TOKEN, POS, name=value features, TAG; TAB-separated.
void write_feature_dump(std::ostream& out, const Corpus& corpus, const FeatureConfig& cfg,
                        const std::vector<std::string>& header = {});

}  // namespace pmnet

#endif  // PMNET_FEATURES_HPP_
