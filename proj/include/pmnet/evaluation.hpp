#ifndef PMNET_EVALUATION_HPP_
#define PMNET_EVALUATION_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmnet/corpus.hpp"
#include "pmnet/model.hpp"

namespace pmnet {

// Token-level edit detection scores. Counts are over reparandum tokens only.
struct ScoreReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::string domain;
  std::string variant;
  // Across-seed aggregates of f1; a single run has mean f1 and std 0.
  double seed_mean_f1 = 1.0;
  double seed_std_f1 = 0.0;
};

// Ratios from counts. A ratio with an empty denominator is 1 when there were
// neither gold nor predicted edits, otherwise 0.
ScoreReport make_report(std::size_t tp, std::size_t fp, std::size_t fn);

// Micro-averaged over every token of the corpus. Throws ContractError naming
// the first sentence whose lengths differ.
ScoreReport score(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold);
double tag_accuracy(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold);

std::vector<TagSequence> gold_tags(const Corpus& corpus);
// `jobs` > 1 decodes sentences on that many threads.
std::vector<TagSequence> predict_corpus(const Tagger& tagger, const Corpus& corpus, std::size_t jobs = 1);
ScoreReport evaluate(const Tagger& tagger, const Corpus& corpus, std::size_t jobs = 1);

struct Mean {
  double mean = 0.0;
  // Population standard deviation (denominator N).
  double std = 0.0;
};
Mean mean_std(const std::vector<double>& values);

// One model variant; several taggers are independent seed runs.
struct ModelEntry {
  std::string label;
  std::vector<const Tagger*> runs;
};

struct DomainEntry {
  std::string label;
  // Empty when the domain's data could not be found.
  std::optional<Corpus> corpus;
};

struct CrossDomainCell {
  std::string variant;
  std::string domain;
  // Absent when the domain has no data.
  std::optional<ScoreReport> report;
};

// Scores every model on every domain. With several runs, the counts are summed,
// precision, recall and f1 are seed means, and seed_std_f1 is the population std.
std::vector<CrossDomainCell> cross_domain_eval(const std::vector<ModelEntry>& models,
                                               const std::vector<DomainEntry>& domains, std::size_t jobs = 1);

// Replaces every surface with UNK, keeping the originals for the similarity
// layer only, then predicts and scores.
ScoreReport unk_ablation_eval(const Tagger& tagger, const Corpus& corpus, std::size_t jobs = 1);

enum class ReportFormat { tsv, markdown };
ReportFormat parse_report_format(std::string_view name);

inline constexpr const char* kReportColumns[] = {"model",  "domain",       "precision",  "recall",
                                                 "f1",     "seed_mean_f1", "seed_std_f1"};

// Rows sorted by variant, then domain. Ratios are printed with 6 decimals.
// `header` lines are emitted first as "# " comments.
std::string emit_report(std::vector<ScoreReport> reports, ReportFormat format,
                        const std::vector<std::string>& header = {});
// Reads the TSV form back; '#' lines are skipped. Throws ParseError.
std::vector<ScoreReport> parse_report_tsv(std::string_view text);

}  // namespace pmnet

#endif  // PMNET_EVALUATION_HPP_
