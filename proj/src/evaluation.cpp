#include "pmnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "pmnet/error.hpp"
#include "pmnet/parallel.hpp"
#include "pmnet/vocab.hpp"

namespace pmnet {

namespace {

void check_lengths(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold) {
  if (pred.size() != gold.size()) {
    throw ContractError("score: " + std::to_string(pred.size()) + " predicted sentences but " +
                        std::to_string(gold.size()) + " gold sentences");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gold[i].size()) {
      throw ContractError("score: sentence " + std::to_string(i) + " has " + std::to_string(pred[i].size()) +
                          " predicted tags but " + std::to_string(gold[i].size()) + " gold tags");
    }
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ScoreReport make_report(std::size_t tp, std::size_t fp, std::size_t fn) {
  ScoreReport r;
  r.true_positives = tp;
  r.false_positives = fp;
  r.false_negatives = fn;
  const bool nothing = tp + fp == 0 && tp + fn == 0;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : (nothing ? 1.0 : 0.0);
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : (nothing ? 1.0 : 0.0);
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.seed_mean_f1 = r.f1;
  r.seed_std_f1 = 0.0;
  return r;
}

ScoreReport score(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold) {
  check_lengths(pred, gold);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    for (std::size_t i = 0; i < pred[s].size(); ++i) {
      const bool p = is_edit(pred[s][i]), g = is_edit(gold[s][i]);
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
  }
  return make_report(tp, fp, fn);
}

double tag_accuracy(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold) {
  check_lengths(pred, gold);
  std::size_t right = 0, total = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    for (std::size_t i = 0; i < pred[s].size(); ++i) right += pred[s][i] == gold[s][i];
    total += pred[s].size();
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 1.0;
}

std::vector<TagSequence> gold_tags(const Corpus& corpus) {
  std::vector<TagSequence> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) out.push_back(ex.tags);
  return out;
}

std::vector<TagSequence> predict_corpus(const Tagger& tagger, const Corpus& corpus, std::size_t jobs) {
  std::vector<TagSequence> out(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) { out[i] = tagger.predict(corpus[i].sentence); });
  return out;
}

ScoreReport evaluate(const Tagger& tagger, const Corpus& corpus, std::size_t jobs) {
  ScoreReport r = score(predict_corpus(tagger, corpus, jobs), gold_tags(corpus));
  r.variant = variant_name(tagger.config().variant);
  return r;
}

Mean mean_std(const std::vector<double>& values) {
  Mean m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(values.size()));
  return m;
}

std::vector<CrossDomainCell> cross_domain_eval(const std::vector<ModelEntry>& models,
                                               const std::vector<DomainEntry>& domains, std::size_t jobs) {
  std::vector<CrossDomainCell> cells;
  for (const auto& m : models) {
    for (const auto& d : domains) cells.push_back({m.label, d.label, std::nullopt});
  }
  parallel_for(cells.size(), jobs, [&](std::size_t c) {
    const ModelEntry& m = models[c / domains.size()];
    const DomainEntry& d = domains[c % domains.size()];
    if (!d.corpus || m.runs.empty()) return;
    std::vector<ScoreReport> runs;
    for (const Tagger* t : m.runs) runs.push_back(evaluate(*t, *d.corpus));
    ScoreReport r;
    if (runs.size() == 1) {
      r = runs.front();
    } else {
      std::vector<double> p, rc, f;
      for (const auto& x : runs) {
        r.true_positives += x.true_positives;
        r.false_positives += x.false_positives;
        r.false_negatives += x.false_negatives;
        p.push_back(x.precision);
        rc.push_back(x.recall);
        f.push_back(x.f1);
      }
      r.precision = mean_std(p).mean;
      r.recall = mean_std(rc).mean;
      const Mean fm = mean_std(f);
      r.f1 = r.seed_mean_f1 = fm.mean;
      r.seed_std_f1 = fm.std;
    }
    r.variant = m.label;
    r.domain = d.label;
    cells[c].report = r;
  });
  return cells;
}

ScoreReport unk_ablation_eval(const Tagger& tagger, const Corpus& corpus, std::size_t jobs) {
  return evaluate(tagger, unk_transform(corpus, UnkMode::full_ablation), jobs);
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "tsv") return ReportFormat::tsv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw ParameterError("unknown report format '" + std::string(name) + "' (expected tsv or markdown)");
}

std::string emit_report(std::vector<ScoreReport> reports, ReportFormat format,
                        const std::vector<std::string>& header) {
  std::stable_sort(reports.begin(), reports.end(), [](const ScoreReport& a, const ScoreReport& b) {
    return std::tie(a.variant, a.domain) < std::tie(b.variant, b.domain);
  });
  std::ostringstream out;
  for (const auto& h : header) out << (format == ReportFormat::markdown ? "<!-- " : "# ") << h
                                   << (format == ReportFormat::markdown ? " -->\n" : "\n");
  auto row = [&](const std::vector<std::string>& cells) {
    if (format == ReportFormat::tsv) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
      out << '\n';
    } else {
      out << '|';
      for (const auto& c : cells) out << ' ' << c << " |";
      out << '\n';
    }
  };
  row({std::begin(kReportColumns), std::end(kReportColumns)});
  if (format == ReportFormat::markdown) row({"---", "---", "---:", "---:", "---:", "---:", "---:"});
  for (const auto& r : reports) {
    row({r.variant, r.domain, fixed6(r.precision), fixed6(r.recall), fixed6(r.f1), fixed6(r.seed_mean_f1),
         fixed6(r.seed_std_f1)});
  }
  return out.str();
}

std::vector<ScoreReport> parse_report_tsv(std::string_view text) {
  std::vector<ScoreReport> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      cols.push_back(line.substr(start, tab - start));
    }
    cols.push_back(line.substr(start));
    if (cols.size() != std::size(kReportColumns)) {
      throw ParseError("expected " + std::to_string(std::size(kReportColumns)) + " columns, found " +
                           std::to_string(cols.size()),
                       lineno, 0);
    }
    if (!seen_header) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] != kReportColumns[i]) throw ParseError("unexpected column '" + cols[i] + "'", lineno, i);
      }
      seen_header = true;
      continue;
    }
    ScoreReport r;
    r.variant = cols[0];
    r.domain = cols[1];
    double* fields[] = {&r.precision, &r.recall, &r.f1, &r.seed_mean_f1, &r.seed_std_f1};
    for (std::size_t i = 0; i < 5; ++i) {
      try {
        std::size_t used = 0;
        *fields[i] = std::stod(cols[i + 2], &used);
        if (used != cols[i + 2].size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw ParseError("invalid number '" + cols[i + 2] + "'", lineno, i + 2);
      }
    }
    out.push_back(r);
  }
  if (!seen_header) throw ParseError("missing report header", 0, 0);
  return out;
}

}  // namespace pmnet
