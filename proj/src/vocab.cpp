#include "pmnet/vocab.hpp"

#include "pmnet/error.hpp"

namespace pmnet {

Vocabulary::Vocabulary() : tokens_{"<pad>", std::string(kUnknownToken)}, pos_{"<pad>", std::string(kUnknownPos)} {
  index();
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::string> pos_tags, std::size_t min_count)
    : tokens_(std::move(tokens)), pos_(std::move(pos_tags)), min_count_(min_count) {
  if (tokens_.size() < 2 || tokens_[kUnkId] != kUnknownToken || pos_.size() < 2 || pos_[kPosUnkId] != kUnknownPos) {
    throw LoadError("vocabulary lacks its reserved entries");
  }
  index();
}

void Vocabulary::index() {
  token_ids_.clear();
  pos_ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!token_ids_.emplace(tokens_[i], static_cast<Index>(i)).second) throw LoadError("duplicate vocabulary entry " + tokens_[i]);
  }
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    if (!pos_ids_.emplace(pos_[i], static_cast<Index>(i)).second) throw LoadError("duplicate POS entry " + pos_[i]);
  }
}

Index Vocabulary::token_id(std::string_view surface) const {
  auto it = token_ids_.find(std::string(surface));
  return it == token_ids_.end() ? kUnkId : it->second;
}

Index Vocabulary::pos_id(std::string_view pos) const {
  auto it = pos_ids_.find(std::string(pos));
  return it == pos_ids_.end() ? kPosUnkId : it->second;
}

bool Vocabulary::contains(std::string_view surface) const { return token_ids_.contains(std::string(surface)); }

Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) throw ParameterError("build_vocab: min_count must be at least 1");
  std::size_t token_total = 0;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::size_t> pos_counts;
  for (const Example& ex : corpus) {
    for (const Token& t : ex.sentence.tokens) {
      ++counts[t.surface];
      ++pos_counts[t.pos];
      ++token_total;
    }
  }
  if (token_total == 0) throw DataError("build_vocab: empty corpus");
  Vocabulary v;
  v.min_count_ = min_count;
  for (const auto& [word, c] : counts) {
    if (c >= min_count && word != v.tokens_[Vocabulary::kPadId] && word != kUnknownToken) v.tokens_.push_back(word);
  }
  for (const auto& [pos, c] : pos_counts) {
    if (pos != v.pos_[Vocabulary::kPosPadId] && pos != kUnknownPos) v.pos_.push_back(pos);
  }
  v.counts_ = std::move(counts);
  v.index();
  return v;
}

UnkMode parse_unk_mode(std::string_view name) {
  if (name == "lookup") return UnkMode::lookup;
  if (name == "full_ablation") return UnkMode::full_ablation;
  throw ParameterError("unknown UNK mode '" + std::string(name) + "'");
}

Corpus unk_transform(const Corpus& corpus, UnkMode mode, const Vocabulary* vocab) {
  if (mode == UnkMode::lookup && !vocab) throw ContractError("unk_transform: lookup mode needs a vocabulary");
  Corpus out = corpus;
  for (Example& ex : out) {
    Sentence& s = ex.sentence;
    if (mode == UnkMode::lookup) {
      for (Token& t : s.tokens) {
        if (!vocab->contains(t.surface)) t.surface = std::string(kUnknownToken);
      }
      continue;
    }
    if (s.similarity_surfaces.empty()) {
      for (const Token& t : s.tokens) s.similarity_surfaces.push_back(t.surface);
    }
    for (Token& t : s.tokens) t.surface = std::string(kUnknownToken);
  }
  return out;
}

}  // namespace pmnet
