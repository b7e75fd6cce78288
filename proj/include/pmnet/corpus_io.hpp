#ifndef PMNET_CORPUS_IO_HPP_
#define PMNET_CORPUS_IO_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "pmnet/corpus.hpp"

namespace pmnet {

// Columnar format: INDEX<TAB>TOKEN<TAB>POS<TAB>TAG per line, 1-based
// contiguous indices, blank line between sentences, '#' comment lines.
// Spans are rebuilt from the tags (see decode_spans).
Corpus read_conll(std::istream& in, const Lexicons& lex = Lexicons::defaults());
Corpus read_conll(const std::string& path, const Lexicons& lex = Lexicons::defaults());
// `header` lines are written as "# <line>" comments before the data.
void write_conll(std::ostream& out, const Corpus& corpus, const std::vector<std::string>& header = {});
void write_conll(const std::string& path, const Corpus& corpus, const std::vector<std::string>& header = {});

// Bracketed format: one sentence per line, '#' comment lines skipped. Tags
// are derived from the spans.
Corpus read_bracketed(std::istream& in, const Lexicons& lex = Lexicons::defaults());
Corpus read_bracketed(const std::string& path, const Lexicons& lex = Lexicons::defaults());
void write_bracketed(std::ostream& out, const Corpus& corpus, const std::vector<std::string>& header = {});
void write_bracketed(const std::string& path, const Corpus& corpus, const std::vector<std::string>& header = {});

// Picks the columnar reader for *.conll / *.tsv paths, the bracketed one otherwise.
Corpus read_corpus(const std::string& path, const Lexicons& lex = Lexicons::defaults());

}  // namespace pmnet

#endif  // PMNET_CORPUS_IO_HPP_
