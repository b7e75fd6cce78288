#ifndef PMNET_VOCAB_HPP_
#define PMNET_VOCAB_HPP_

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pmnet/corpus.hpp"
#include "pmnet/tensor.hpp"

namespace pmnet {

class Vocabulary {
 public:
  static constexpr Index kPadId = 0;
  static constexpr Index kUnkId = 1;
  static constexpr Index kPosPadId = 0;
  static constexpr Index kPosUnkId = 1;

  Vocabulary();
  // Rebuilds a vocabulary from its id-ordered entry lists (reserved entries first).
  Vocabulary(std::vector<std::string> tokens, std::vector<std::string> pos_tags, std::size_t min_count);

  Index token_id(std::string_view surface) const;
  Index pos_id(std::string_view pos) const;
  bool contains(std::string_view surface) const;

  Index token_count() const { return static_cast<Index>(tokens_.size()); }
  Index pos_count() const { return static_cast<Index>(pos_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& pos_tags() const { return pos_; }
  std::size_t min_count() const { return min_count_; }
  // Training-set surface counts, when built from data.
  const std::map<std::string, std::size_t>& counts() const { return counts_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.pos_ == b.pos_ && a.min_count_ == b.min_count_;
  }

 private:
  friend Vocabulary build_vocab(const Corpus&, std::size_t);
  void index();

  std::vector<std::string> tokens_;
  std::vector<std::string> pos_;
  std::unordered_map<std::string, Index> token_ids_;
  std::unordered_map<std::string, Index> pos_ids_;
  std::size_t min_count_ = 10;
  std::map<std::string, std::size_t> counts_;
};

// Surfaces seen fewer than min_count times are left out and resolve to UNK.
// Every POS tag seen is kept.
Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count = 10);

enum class UnkMode { lookup, full_ablation };
UnkMode parse_unk_mode(std::string_view name);

// lookup: OOV surfaces become UNK (requires `vocab`). full_ablation: every
// surface becomes UNK and the originals move to Sentence::similarity_surfaces.
// POS tags, flags and gold tags are untouched.
Corpus unk_transform(const Corpus& corpus, UnkMode mode, const Vocabulary* vocab = nullptr);

}  // namespace pmnet

#endif  // PMNET_VOCAB_HPP_
