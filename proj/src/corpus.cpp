#include "pmnet/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "pmnet/error.hpp"

namespace pmnet {

namespace {

constexpr std::array<std::string_view, kNumTags> kTagNames = {"O", "BE", "IE", "IP", "BE_IP", "C", "C_IP", "C_BE_IP"};

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string_view tag_name(Tag t) { return kTagNames[static_cast<std::size_t>(t)]; }

Tag parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kNumTags; ++i) {
    if (kTagNames[i] == name) return static_cast<Tag>(i);
  }
  throw ParameterError("unknown tag '" + std::string(name) + "'");
}

bool is_edit(Tag t) { return t != Tag::O && t != Tag::C; }

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ---------------------------------------------------------------------------
// lexicons

const Lexicons& Lexicons::defaults() {
  static const Lexicons lex = [] {
    Lexicons l;
    l.filled_pauses = {"uh", "um", "eh", "ah", "er", "hm", "uh-huh", "um-hum"};
    l.discourse_markers = {{"well"}, {"like"}, {"so"}, {"actually"}, {"anyway"}, {"you", "know"}, {"i", "mean"}};
    l.edit_words = {"oh", "okay", "right"};
    l.conjunctions = {"and", "but", "or", "because", "so", "then"};
    return l;
  }();
  return lex;
}

std::vector<std::vector<std::string>> read_lexicon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file " + path);
  std::vector<std::vector<std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto words = split_ws(lowercase(line));
    if (!words.empty()) entries.push_back(std::move(words));
  }
  return entries;
}

void apply_lexicon_flags(Sentence& s, const Lexicons& lex) {
  std::vector<std::string> lower;
  lower.reserve(s.size());
  for (const Token& t : s.tokens) lower.push_back(lowercase(t.surface));
  for (std::size_t i = 0; i < s.size(); ++i) {
    TokenFlags& f = s.tokens[i].flags;
    f = TokenFlags{};
    f.filled_pause = lex.filled_pauses.contains(lower[i]);
    f.edit_word = lex.edit_words.contains(lower[i]);
    f.fragment = (!lower[i].empty() && lower[i].back() == '-') || lex.fragments.contains(lower[i]);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (const auto& phrase : lex.discourse_markers) {
      if (phrase.empty() || i + phrase.size() > s.size()) continue;
      if (!std::equal(phrase.begin(), phrase.end(), lower.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      for (std::size_t k = 0; k < phrase.size(); ++k) s.tokens[i + k].flags.discourse_marker = true;
    }
  }
}

// ---------------------------------------------------------------------------
// spans

void validate_spans(const Sentence& s) {
  const std::size_t n = s.size();
  for (std::size_t k = 0; k < s.spans.size(); ++k) {
    const DisflSpan& sp = s.spans[k];
    const std::string where = "span " + std::to_string(k);
    if (!(sp.start <= sp.ip && sp.ip < sp.end && sp.end <= n)) throw DataError(where + ": indices out of order or range");
    const bool has_repair = sp.ip + 1 < sp.end;
    if (has_repair != sp.repair_start.has_value() || (has_repair && *sp.repair_start != sp.ip + 1)) {
      throw DataError(where + ": repair_start inconsistent with bracket extent");
    }
    if (k > 0) {
      const DisflSpan& prev = s.spans[k - 1];
      if (sp.start < prev.start || (sp.start == prev.start && sp.end > prev.end)) {
        throw DataError(where + ": spans not in bracket-opening order");
      }
    }
  }
  for (std::size_t a = 0; a < s.spans.size(); ++a) {
    for (std::size_t b = a + 1; b < s.spans.size(); ++b) {
      const DisflSpan& outer = s.spans[a];
      const DisflSpan& inner = s.spans[b];
      if (inner.start >= outer.end) continue;
      if (inner.end > outer.end) throw DataError("spans " + std::to_string(a) + " and " + std::to_string(b) + " cross");
      const bool in_reparandum = inner.end <= outer.ip + 1;
      const bool in_repair = inner.start >= outer.ip + 1;
      if (!in_reparandum && !in_repair) {
        throw DataError("span " + std::to_string(b) + " straddles the interruption point of span " + std::to_string(a));
      }
    }
  }
}

Sentence parse_bracketed(std::string_view line, const Lexicons& lex) {
  struct Open {
    std::size_t span_index;
    std::size_t start;
    std::optional<std::size_t> ip;
  };
  Sentence s;
  std::vector<Open> stack;
  const auto items = split_ws(line);
  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    const std::string& item = items[pos];
    if (item == "[") {
      stack.push_back({s.spans.size(), s.size(), std::nullopt});
      s.spans.emplace_back();
    } else if (item == "+") {
      if (stack.empty()) throw ParseError("'+' outside brackets", 0, pos);
      Open& top = stack.back();
      if (top.ip) throw ParseError("second '+' inside one bracket", 0, pos);
      if (s.size() == top.start) throw ParseError("empty reparandum", 0, pos);
      top.ip = s.size() - 1;
    } else if (item == "]") {
      if (stack.empty()) throw ParseError("unbalanced ']'", 0, pos);
      const Open top = stack.back();
      stack.pop_back();
      if (!top.ip) throw ParseError("bracket closed without '+'", 0, pos);
      DisflSpan& sp = s.spans[top.span_index];
      sp.start = top.start;
      sp.ip = *top.ip;
      sp.end = s.size();
      if (sp.end > sp.ip + 1) sp.repair_start = sp.ip + 1;
    } else {
      Token t;
      const auto bar = item.rfind('|');
      if (bar != std::string::npos && bar > 0 && bar + 1 < item.size()) {
        t.surface = item.substr(0, bar);
        t.pos = item.substr(bar + 1);
      } else {
        t.surface = item;
      }
      s.tokens.push_back(std::move(t));
    }
  }
  if (!stack.empty()) throw ParseError("unbalanced '['", 0, items.size());
  apply_lexicon_flags(s, lex);
  return s;
}

namespace {

void render_range(const Sentence& s, std::size_t from, std::size_t to, std::vector<std::size_t> spans,
                  std::vector<std::string>& out) {
  std::size_t cursor = from;
  auto emit_tokens = [&](std::size_t upto) {
    for (; cursor < upto; ++cursor) {
      const Token& t = s.tokens[cursor];
      out.push_back(t.pos == kUnknownPos ? t.surface : t.surface + "|" + t.pos);
    }
  };
  std::size_t k = 0;
  while (k < spans.size()) {
    const DisflSpan& sp = s.spans[spans[k]];
    std::vector<std::size_t> left, right;
    std::size_t next = k + 1;
    for (; next < spans.size(); ++next) {
      const DisflSpan& c = s.spans[spans[next]];
      if (c.start >= sp.end) break;
      (c.end <= sp.ip + 1 ? left : right).push_back(spans[next]);
    }
    emit_tokens(sp.start);
    out.emplace_back("[");
    render_range(s, sp.start, sp.ip + 1, std::move(left), out);
    cursor = sp.ip + 1;
    out.emplace_back("+");
    render_range(s, sp.ip + 1, sp.end, std::move(right), out);
    cursor = sp.end;
    out.emplace_back("]");
    k = next;
  }
  emit_tokens(to);
}

}  // namespace

std::string render_bracketed(const Sentence& s) {
  validate_spans(s);
  std::vector<std::size_t> all(s.spans.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::string> items;
  render_range(s, 0, s.size(), std::move(all), items);
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ' ';
    out += items[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// 8-state tagging

TagSequence encode_bio8(const Sentence& s) {
  const std::size_t n = s.size();
  std::vector<bool> edit(n, false), onset(n, false);
  for (const DisflSpan& sp : s.spans) {
    for (std::size_t i = sp.start; i <= sp.ip && i < n; ++i) edit[i] = true;
    if (sp.repair_start && *sp.repair_start < n) onset[*sp.repair_start] = true;
  }
  TagSequence tags(n, Tag::O);
  for (std::size_t i = 0; i < n; ++i) {
    if (!edit[i]) continue;
    const bool first = i == 0 || !edit[i - 1];
    const bool last = i + 1 == n || !edit[i + 1];
    tags[i] = first && last ? Tag::BE_IP : first ? Tag::BE : last ? Tag::IP : Tag::IE;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!onset[i]) continue;
    switch (tags[i]) {
      case Tag::O: tags[i] = Tag::C; break;
      case Tag::IP: tags[i] = Tag::C_IP; break;
      case Tag::BE_IP: tags[i] = Tag::C_BE_IP; break;
      default: break;
    }
  }
  return tags;
}

std::vector<bool> edit_mask(const TagSequence& t) {
  std::vector<bool> mask(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) mask[i] = is_edit(t[i]);
  return mask;
}

std::optional<TagStructureIssue> find_tag_structure_issue(const TagSequence& t) {
  bool open = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::string name(tag_name(t[i]));
    switch (t[i]) {
      case Tag::O:
      case Tag::C:
      case Tag::BE_IP:
      case Tag::C_BE_IP:
      case Tag::BE:
        if (open) return TagStructureIssue{i, name + " inside an open reparandum"};
        open = t[i] == Tag::BE;
        break;
      case Tag::IE:
        if (!open) return TagStructureIssue{i, "IE without an open reparandum"};
        break;
      case Tag::IP:
      case Tag::C_IP:
        if (!open) return TagStructureIssue{i, name + " without an open reparandum"};
        open = false;
        break;
    }
  }
  if (open) return TagStructureIssue{t.size() - 1, "reparandum left open at end of sentence"};
  return std::nullopt;
}

std::string tag_structure_error(const TagSequence& t) {
  const auto issue = find_tag_structure_issue(t);
  if (!issue) return {};
  return issue->message + " at position " + std::to_string(issue->position);
}

std::vector<DisflSpan> decode_spans(const TagSequence& t) {
  const std::size_t n = t.size();
  std::vector<std::pair<std::size_t, std::size_t>> regions;
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < n; ++i) {
    switch (t[i]) {
      case Tag::O:
      case Tag::C:
        if (open) regions.emplace_back(*open, i - 1);
        open.reset();
        break;
      case Tag::BE:
        if (open) regions.emplace_back(*open, i - 1);
        open = i;
        break;
      case Tag::IE:
        if (!open) open = i;
        break;
      case Tag::IP:
      case Tag::C_IP:
        regions.emplace_back(open.value_or(i), i);
        open.reset();
        break;
      case Tag::BE_IP:
      case Tag::C_BE_IP:
        if (open) regions.emplace_back(*open, i - 1);
        regions.emplace_back(i, i);
        open.reset();
        break;
    }
  }
  if (open) regions.emplace_back(*open, n - 1);
  std::vector<DisflSpan> spans;
  for (auto [s, e] : regions) {
    DisflSpan sp{s, e, std::nullopt, e + 1};
    if (e + 1 < n && t[e + 1] == Tag::C) {
      sp.repair_start = e + 1;
      sp.end = e + 2;
    }
    spans.push_back(sp);
  }
  return spans;
}

Example make_example(Sentence s) {
  TagSequence tags = encode_bio8(s);
  return Example{std::move(s), std::move(tags)};
}

}  // namespace pmnet
