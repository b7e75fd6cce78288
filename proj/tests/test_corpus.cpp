#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "pmnet/corpus.hpp"
#include "pmnet/corpus_io.hpp"
#include "pmnet/error.hpp"
#include "pmnet/synth.hpp"
#include "pmnet/vocab.hpp"
#include "support/oracles.hpp"

using namespace pmnet;

namespace {

const char* kNested = "[ I do n't think + [ I know her + but I 've ] ] heard of her";

TagSequence tags(std::initializer_list<Tag> t) { return TagSequence(t); }

Corpus synthetic(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.sentence_count = n;
  return generate_synthetic(cfg);
}

std::string conll_text(const Corpus& c) {
  std::ostringstream out;
  write_conll(out, c);
  return out.str();
}

std::string bracketed_text(const Corpus& c) {
  std::ostringstream out;
  write_bracketed(out, c);
  return out.str();
}

}  // namespace

TEST_CASE("parse_bracketed examples") {
  const Sentence simple = parse_bracketed("[ I was + I was ] happy");
  CHECK(simple.size() == 5);
  REQUIRE(simple.spans.size() == 1);
  CHECK(simple.spans[0].start == 0);
  CHECK(simple.spans[0].ip == 1);
  CHECK(simple.spans[0].repair_start == 2u);
  CHECK(simple.tokens[0].pos == kUnknownPos);

  const Sentence nested = parse_bracketed(kNested);
  CHECK(nested.size() == 13);
  REQUIRE(nested.spans.size() == 2);
  const DisflSpan& outer = nested.spans[0];
  const DisflSpan& inner = nested.spans[1];
  CHECK(outer.start == 0);
  CHECK(outer.ip == 3);
  CHECK(inner.start == 4);
  CHECK(inner.ip == 6);
  CHECK(inner.start >= *outer.repair_start);
  CHECK(inner.end <= outer.end);

  const Sentence fluent = parse_bracketed("happy day");
  CHECK(fluent.size() == 2);
  CHECK(fluent.spans.empty());
}

TEST_CASE("parse_bracketed reads POS suffixes and flags") {
  const Sentence s = parse_bracketed("uh|UH I|PRP go-|NN you know well");
  CHECK(s.tokens[0].pos == "UH");
  CHECK(s.tokens[0].flags.filled_pause);
  CHECK(s.tokens[2].flags.fragment);
  CHECK(s.tokens[3].flags.discourse_marker);
  CHECK(s.tokens[4].flags.discourse_marker);
  CHECK(s.tokens[5].flags.discourse_marker);
  CHECK_FALSE(s.tokens[1].flags.fragment);
}

TEST_CASE("parse_bracketed errors carry a position") {
  auto position_of = [](const char* line) -> std::size_t {
    try {
      parse_bracketed(line);
    } catch (const ParseError& e) {
      return e.position();
    }
    FAIL("no ParseError for " << line);
    return 0;
  };
  CHECK(position_of("a [ b + c") == 5);
  CHECK(position_of("a b ] c") == 2);
  CHECK(position_of("a + b") == 1);
  CHECK(position_of("[ + b ]") == 1);
  CHECK(position_of("[ a + b + c ]") == 4);
  CHECK_THROWS_AS(parse_bracketed("[ a b ]"), ParseError);
}

TEST_CASE("encode_bio8 examples") {
  using enum Tag;
  CHECK(encode_bio8(parse_bracketed("[ I was + I was ] happy")) == tags({BE, IP, C, O, O}));
  CHECK(encode_bio8(parse_bracketed("happy day today")) == tags({O, O, O}));
  CHECK(encode_bio8(parse_bracketed("[ a + b ] c")) == tags({BE_IP, C, O}));
  CHECK(encode_bio8(parse_bracketed("[ a b c + ] d")) == tags({BE, IE, IP, O}));
  CHECK(encode_bio8(parse_bracketed("[ a + [ b + c ] ]")) == tags({BE, C_IP, C}));
  CHECK(encode_bio8(parse_bracketed("[ a + [ b c + d ] ]")) == tags({BE, IE, IP, C}));
}

TEST_CASE("nested example edit mask and rule oracle") {
  const Sentence s = parse_bracketed(kNested);
  const TagSequence t = encode_bio8(s);
  const std::vector<bool> mask = edit_mask(t);
  // Both reparanda ("I do n't think", "I know her") are edits and adjoin.
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(mask[i] == (i <= 6));
  CHECK(t == oracle::rule_tags(s));
  CHECK(tag_structure_error(t).empty());
}

TEST_CASE("edit_mask examples") {
  using enum Tag;
  CHECK(edit_mask(tags({BE, IP, C, O, O})) == std::vector<bool>{true, true, false, false, false});
  CHECK(edit_mask(tags({O, O})) == std::vector<bool>{false, false});
  CHECK(edit_mask(tags({IE, C_IP, C_BE_IP, BE_IP})) == std::vector<bool>{true, true, true, true});
}

TEST_CASE("tag structure checks") {
  using enum Tag;
  CHECK_FALSE(tag_structure_error(tags({O, IE})).empty());
  CHECK_FALSE(tag_structure_error(tags({IP})).empty());
  CHECK_FALSE(tag_structure_error(tags({BE, IE})).empty());
  CHECK(tag_structure_error(tags({BE, IE, IP, C})).empty());
  CHECK_THROWS_AS(parse_tag("XX"), ParameterError);
  for (std::size_t k = 0; k < kNumTags; ++k) CHECK(parse_tag(tag_name(static_cast<Tag>(k))) == static_cast<Tag>(k));
}

TEST_CASE("encoding properties over generated sentences") {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.sentence_count = 1000;
  cfg.p_repetition = 0.5;
  cfg.p_substitution_repair = 0.4;
  cfg.p_restart = 0.3;
  const Corpus corpus = generate_synthetic(cfg);
  std::size_t with_spans = 0;
  for (const Example& ex : corpus) {
    CHECK(ex.tags == encode_bio8(ex.sentence));
    CHECK(edit_mask(ex.tags) == oracle::span_membership(ex.sentence));
    CHECK(ex.tags == oracle::rule_tags(ex.sentence));
    CHECK(tag_structure_error(ex.tags).empty());
    CHECK_NOTHROW(validate_spans(ex.sentence));
    with_spans += !ex.sentence.spans.empty();
  }
  CHECK(with_spans > 500);
}

TEST_CASE("render and parse are inverse") {
  for (const Example& ex : synthetic(1000, 4)) {
    const std::string text = render_bracketed(ex.sentence);
    CHECK(parse_bracketed(text) == ex.sentence);
    CHECK(render_bracketed(parse_bracketed(text)) == text);
  }
  const std::string nested = "[ I|PRP do|VBP + [ I|PRP + ] but|CC ] ok|JJ";
  CHECK(render_bracketed(parse_bracketed(nested)) == nested);
}

TEST_CASE("build_vocab examples") {
  const Corpus one = {make_example(parse_bracketed("a a b"))};
  const Vocabulary v2 = build_vocab(one, 2);
  CHECK(v2.contains("a"));
  CHECK(v2.token_id("b") == Vocabulary::kUnkId);
  CHECK(v2.token_id("a") > Vocabulary::kUnkId);

  const Corpus corpus = synthetic(300, 5);
  const Vocabulary v1 = build_vocab(corpus, 1);
  for (const Example& ex : corpus) {
    for (const Token& t : ex.sentence.tokens) CHECK(v1.token_id(t.surface) != Vocabulary::kUnkId);
  }
  CHECK_THROWS_AS(build_vocab(Corpus{}, 1), DataError);
  CHECK_THROWS_AS(build_vocab(one, 0), ParameterError);
}

TEST_CASE("vocabulary counts match a recount") {
  const Corpus corpus = synthetic(500, 6);
  std::unordered_map<std::string, std::size_t> recount;
  for (const Example& ex : corpus) {
    for (const Token& t : ex.sentence.tokens) ++recount[t.surface];
  }
  const Vocabulary v = build_vocab(corpus, 10);
  CHECK(v.counts().size() == recount.size());
  for (const auto& [word, c] : recount) {
    CHECK(v.counts().at(word) == c);
    CHECK(v.contains(word) == (c >= 10));
  }
  CHECK(v.tokens()[Vocabulary::kUnkId] == kUnknownToken);
  CHECK(v.pos_tags()[Vocabulary::kPosUnkId] == kUnknownPos);
  const Vocabulary rebuilt(v.tokens(), v.pos_tags(), v.min_count());
  CHECK(rebuilt == v);
  CHECK(rebuilt.token_id(kUnknownToken) == Vocabulary::kUnkId);
}

TEST_CASE("unk_transform examples and invariants") {
  const Corpus one = {make_example(parse_bracketed("I was I was happy"))};
  const Corpus ablated = unk_transform(one, UnkMode::full_ablation);
  const Sentence& s = ablated[0].sentence;
  for (const Token& t : s.tokens) CHECK(t.surface == kUnknownToken);
  CHECK(s.similarity_surfaces == std::vector<std::string>{"I", "was", "I", "was", "happy"});
  CHECK(unk_transform(ablated, UnkMode::full_ablation) == ablated);

  const Corpus corpus = synthetic(200, 7);
  const Corpus once = unk_transform(corpus, UnkMode::full_ablation);
  CHECK(unk_transform(once, UnkMode::full_ablation) == once);
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    CHECK(once[k].tags == corpus[k].tags);
    REQUIRE(once[k].sentence.size() == corpus[k].sentence.size());
    for (std::size_t i = 0; i < corpus[k].sentence.size(); ++i) {
      CHECK(once[k].sentence.tokens[i].pos == corpus[k].sentence.tokens[i].pos);
      CHECK(once[k].sentence.tokens[i].flags == corpus[k].sentence.tokens[i].flags);
    }
  }

  const Vocabulary v = build_vocab(corpus, 1);
  CHECK(unk_transform(corpus, UnkMode::lookup, &v) == corpus);
  const Vocabulary strict = build_vocab(corpus, 1000000);
  for (const Example& ex : unk_transform(corpus, UnkMode::lookup, &strict)) {
    for (const Token& t : ex.sentence.tokens) CHECK(t.surface == kUnknownToken);
  }
  CHECK_THROWS_AS(unk_transform(corpus, UnkMode::lookup), ContractError);
  CHECK_THROWS_AS(parse_unk_mode("sometimes"), ParameterError);
  CHECK(parse_unk_mode("full_ablation") == UnkMode::full_ablation);
}

TEST_CASE("generate_synthetic examples") {
  SynthConfig fluent;
  fluent.sentence_count = 300;
  fluent.p_repetition = fluent.p_substitution_repair = fluent.p_restart = 0.0;
  for (const Example& ex : generate_synthetic(fluent)) CHECK(ex.sentence.spans.empty());

  SynthConfig cfg;
  cfg.sentence_count = 200;
  cfg.seed = 9;
  CHECK(generate_synthetic(cfg) == generate_synthetic(cfg));
  SynthConfig other = cfg;
  other.seed = 10;
  CHECK(generate_synthetic(cfg) != generate_synthetic(other));
  CHECK(SynthConfig::from_kv(cfg.to_kv()).to_kv() == cfg.to_kv());
}

TEST_CASE("reparandum length follows the geometric mean") {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.sentence_count = 10000;
  cfg.p_repetition = 1.0;
  cfg.p_substitution_repair = 0.0;
  cfg.p_restart = 0.0;
  cfg.length_p = 0.5;
  double total = 0.0;
  std::size_t spans = 0;
  for (const Example& ex : generate_synthetic(cfg)) {
    for (const DisflSpan& sp : ex.sentence.spans) {
      total += static_cast<double>(sp.ip - sp.start + 1);
      ++spans;
    }
  }
  REQUIRE(spans == 10000);
  CHECK(std::abs(total / static_cast<double>(spans) - 2.0) <= 0.1);
}

TEST_CASE("generated disfluencies have the documented shapes") {
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.sentence_count = 2000;
  cfg.filler_rate = 0.0;
  std::size_t repetitions = 0, substitutions = 0, restarts = 0;
  for (const Example& ex : generate_synthetic(cfg)) {
    const Sentence& s = ex.sentence;
    for (const DisflSpan& sp : s.spans) {
      if (!sp.repair_start) {
        ++restarts;
        CHECK(sp.start == 0);
        continue;
      }
      const std::size_t len = sp.ip - sp.start + 1;
      REQUIRE(sp.end - *sp.repair_start == len);
      bool same = true;
      for (std::size_t k = 0; k < len; ++k) {
        same = same && s.tokens[sp.start + k].surface == s.tokens[*sp.repair_start + k].surface;
      }
      if (same) {
        ++repetitions;
      } else {
        ++substitutions;
        CHECK(s.tokens[sp.start].pos == s.tokens[*sp.repair_start].pos);
      }
    }
  }
  CHECK(repetitions > 400);
  CHECK(substitutions > 150);
  CHECK(restarts > 40);
}

TEST_CASE("disjoint base vocabularies") {
  const BaseVocabulary a = BaseVocabulary::generate(1, 150);
  const BaseVocabulary b = BaseVocabulary::generate(2, 150, &a);
  const auto wa = a.all_words();
  for (const std::string& w : b.all_words()) CHECK(std::find(wa.begin(), wa.end(), w) == wa.end());
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.p_restart = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.length_p = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.content_words = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

TEST_CASE("read_conll examples") {
  std::istringstream empty("");
  CHECK(read_conll(empty).empty());

  std::istringstream one("1\tI\tPRP\tBE\n2\twas\tVBD\tIP\n3\tI\tPRP\tC\n");
  const Corpus c = read_conll(one);
  REQUIRE(c.size() == 1);
  CHECK(c[0].sentence.tokens[0].surface == "I");
  CHECK(c[0].sentence.tokens[0].pos == "PRP");
  CHECK(c[0].tags[0] == Tag::BE);
  REQUIRE(c[0].sentence.spans.size() == 1);
  CHECK(c[0].sentence.spans[0].repair_start == 2u);

  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_conll(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    FAIL("no ParseError for " << text);
    return 0;
  };
  CHECK(line_of("# c\n1\tI\tPRP\n") == 2);
  CHECK(line_of("1\tI\tPRP\tO\n2\ta\tDT\tXX\n") == 2);
  CHECK(line_of("1\tI\tPRP\tO\n3\ta\tDT\tO\n") == 2);
  CHECK(line_of("1\tI\tPRP\tO\n\n2\ta\tDT\tO\n") == 3);
  CHECK(line_of("1\tI\tPRP\tIE\n") == 1);
}

TEST_CASE("columnar round-trip is byte-identical") {
  const Corpus corpus = synthetic(1000, 13);
  const std::string first = conll_text(corpus);
  std::istringstream in(first);
  const Corpus back = read_conll(in);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    CHECK(back[k].tags == corpus[k].tags);
    CHECK(back[k].sentence.tokens == corpus[k].sentence.tokens);
  }
  CHECK(conll_text(back) == first);
}

TEST_CASE("bracketed round-trip is byte-identical") {
  const Corpus corpus = synthetic(1000, 14);
  const std::string first = bracketed_text(corpus);
  std::istringstream in(first);
  const Corpus back = read_bracketed(in);
  CHECK(back == corpus);
  CHECK(bracketed_text(back) == first);
}

TEST_CASE("bracketed reader reports the line") {
  std::istringstream in("# header\nok line\n[ broken\n");
  try {
    read_bracketed(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("lexicon files") {
  const std::string path = "lexicon_test.txt";
  {
    std::ofstream out(path);
    out << "# comment\nyou know\n\nUh\n";
  }
  const auto entries = read_lexicon_file(path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0] == std::vector<std::string>{"you", "know"});
  CHECK(entries[1] == std::vector<std::string>{"uh"});
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_lexicon_file("no/such/file.txt"), DataError);
}
