#include "pmnet/corpus_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "pmnet/error.hpp"

namespace pmnet {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

}  // namespace

Corpus read_conll(std::istream& in, const Lexicons& lex) {
  Corpus corpus;
  Sentence current;
  TagSequence tags;
  std::vector<std::size_t> token_lines;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (const auto issue = find_tag_structure_issue(tags)) {
      throw ParseError("invalid tag sequence: " + issue->message, token_lines[issue->position], 3);
    }
    token_lines.clear();
    apply_lexicon_flags(current, lex);
    current.spans = decode_spans(tags);
    corpus.push_back(Example{std::move(current), std::move(tags)});
    current = Sentence{};
    tags.clear();
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 4) throw ParseError("expected 4 columns, found " + std::to_string(cols.size()), lineno, cols.size());
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError("bad token index '" + cols[0] + "'", lineno, 0);
    }
    if (index != current.size() + 1) {
      throw ParseError("non-contiguous index " + cols[0] + ", expected " + std::to_string(current.size() + 1), lineno, 0);
    }
    if (cols[1].empty()) throw ParseError("empty token", lineno, 1);
    if (cols[2].empty()) throw ParseError("empty POS", lineno, 2);
    Tag tag;
    try {
      tag = parse_tag(cols[3]);
    } catch (const ParameterError&) {
      throw ParseError("unknown tag '" + cols[3] + "'", lineno, 3);
    }
    current.tokens.push_back(Token{cols[1], cols[2], {}});
    tags.push_back(tag);
    token_lines.push_back(lineno);
  }
  flush();
  return corpus;
}

Corpus read_conll(const std::string& path, const Lexicons& lex) {
  auto in = open_in(path);
  return read_conll(in, lex);
}

void write_conll(std::ostream& out, const Corpus& corpus, const std::vector<std::string>& header) {
  write_header(out, header);
  for (const Example& ex : corpus) {
    const auto& toks = ex.sentence.tokens;
    if (ex.tags.size() != toks.size()) throw ContractError("write_conll: tag count differs from token count");
    for (std::size_t i = 0; i < toks.size(); ++i) {
      out << (i + 1) << '\t' << toks[i].surface << '\t' << toks[i].pos << '\t' << tag_name(ex.tags[i]) << '\n';
    }
    out << '\n';
  }
}

void write_conll(const std::string& path, const Corpus& corpus, const std::vector<std::string>& header) {
  auto out = open_out(path);
  write_conll(out, corpus, header);
}

Corpus read_bracketed(std::istream& in, const Lexicons& lex) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    try {
      corpus.push_back(make_example(parse_bracketed(line, lex)));
    } catch (const ParseError& e) {
      throw ParseError(e.message(), lineno, e.position());
    }
  }
  return corpus;
}

Corpus read_bracketed(const std::string& path, const Lexicons& lex) {
  auto in = open_in(path);
  return read_bracketed(in, lex);
}

void write_bracketed(std::ostream& out, const Corpus& corpus, const std::vector<std::string>& header) {
  write_header(out, header);
  for (const Example& ex : corpus) out << render_bracketed(ex.sentence) << '\n';
}

void write_bracketed(const std::string& path, const Corpus& corpus, const std::vector<std::string>& header) {
  auto out = open_out(path);
  write_bracketed(out, corpus, header);
}

Corpus read_corpus(const std::string& path, const Lexicons& lex) {
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".conll") || ends_with(".tsv")) return read_conll(path, lex);
  return read_bracketed(path, lex);
}

}  // namespace pmnet
