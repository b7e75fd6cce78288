#ifndef PMNET_CORPUS_HPP_
#define PMNET_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pmnet {

inline constexpr std::string_view kUnknownPos = "UNK_POS";
inline constexpr std::string_view kUnknownToken = "UNK";

struct TokenFlags {
  bool filled_pause = false;
  bool discourse_marker = false;
  bool edit_word = false;
  bool fragment = false;

  friend bool operator==(const TokenFlags&, const TokenFlags&) = default;
};

struct Token {
  std::string surface;
  std::string pos{kUnknownPos};
  TokenFlags flags;

  friend bool operator==(const Token&, const Token&) = default;
};

// One bracketed disfluency "[ reparandum + repair ]". Indices are token
// positions: the reparandum is [start, ip] inclusive, the repair runs from
// ip + 1 to `end` (exclusive, the position of "]"). `repair_start` is absent
// when the repair is empty (a restart).
struct DisflSpan {
  std::size_t start = 0;
  std::size_t ip = 0;
  std::optional<std::size_t> repair_start;
  std::size_t end = 0;

  friend bool operator==(const DisflSpan&, const DisflSpan&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  // Ordered by start ascending, then end descending (bracket opening order).
  std::vector<DisflSpan> spans;
  // Original surfaces kept aside by a full UNK ablation; empty otherwise.
  std::vector<std::string> similarity_surfaces;

  std::size_t size() const { return tokens.size(); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

enum class Tag : std::uint8_t { O = 0, BE, IE, IP, BE_IP, C, C_IP, C_BE_IP };
inline constexpr std::size_t kNumTags = 8;

using TagSequence = std::vector<Tag>;

std::string_view tag_name(Tag t);
// Throws ParameterError for names outside the inventory.
Tag parse_tag(std::string_view name);
bool is_edit(Tag t);

struct Example {
  Sentence sentence;
  TagSequence tags;

  friend bool operator==(const Example&, const Example&) = default;
};

using Corpus = std::vector<Example>;

// Word lists behind the identity flags and the conjunction feature. Entries
// are lower-cased; multi-word entries are stored as token sequences.
struct Lexicons {
  std::set<std::string> filled_pauses;
  std::vector<std::vector<std::string>> discourse_markers;
  std::set<std::string> edit_words;
  std::set<std::string> fragments;
  std::set<std::string> conjunctions;

  static const Lexicons& defaults();
};

// Reads a lexicon file: one entry per line, '#' starts a comment.
std::vector<std::vector<std::string>> read_lexicon_file(const std::string& path);

std::string lowercase(std::string_view s);

// Recomputes every token's flags from the lexicons.
void apply_lexicon_flags(Sentence& s, const Lexicons& lex = Lexicons::defaults());

// Checks span bounds and nesting; throws DataError.
void validate_spans(const Sentence& s);

Sentence parse_bracketed(std::string_view line, const Lexicons& lex = Lexicons::defaults());
std::string render_bracketed(const Sentence& s);

TagSequence encode_bio8(const Sentence& s);
std::vector<bool> edit_mask(const TagSequence& t);
// Structural check of a tag sequence (open/close discipline). Returns an
// empty string when valid, otherwise a description of the first violation.
std::string tag_structure_error(const TagSequence& t);
struct TagStructureIssue {
  std::size_t position;
  std::string message;
};
// Same check, reporting the offending token index.
std::optional<TagStructureIssue> find_tag_structure_issue(const TagSequence& t);
// Reconstructs reparandum spans from tags. Repair extents are not encoded in
// tags, so a present repair is given a one-token extent.
std::vector<DisflSpan> decode_spans(const TagSequence& t);

Example make_example(Sentence s);

}  // namespace pmnet

#endif  // PMNET_CORPUS_HPP_
