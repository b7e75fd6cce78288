#include "pmnet/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "pmnet/checkpoint.hpp"
#include "pmnet/corpus_io.hpp"
#include "pmnet/error.hpp"
#include "pmnet/evaluation.hpp"
#include "pmnet/features.hpp"
#include "pmnet/synth.hpp"
#include "pmnet/training.hpp"

namespace pmnet {

namespace fs = std::filesystem;

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    for (const auto& kv : {ModelConfig{}.to_kv(), TrainConfig{}.to_kv(), SynthConfig{}.to_kv()}) {
      for (const auto& [key, value] : kv) k.insert(key);
    }
    k.insert("exclude_vocab_seed");
    return k;
  }();
  return keys;
}

void check_config_keys(const KeyValues& kv, const std::string& source) {
  for (const auto& [k, v] : kv) {
    if (!known_config_keys().contains(k)) throw ConfigError(source + ": unknown configuration key '" + k + "'");
  }
}

std::string kebab_case(const std::string& key) {
  std::string out = key;
  for (char& c : out) {
    if (c == '_') c = '-';
  }
  return out;
}

namespace {

// Config keys exposed as --kebab-case flags on one subcommand.
class KeyFlags {
 public:
  KeyFlags(CLI::App* app, const KeyValues& defaults, const std::string& group) : app_(app) {
    for (const auto& [k, v] : defaults) add(k, v, group);
  }

  void add(const std::string& key, const std::string& fallback, const std::string& group) {
    const std::string flag = "--" + kebab_case(key);
    flags_.emplace_back(key, flag);
    app_->add_option(flag, values_[key], fallback.empty() ? "" : "default: " + fallback)->group(group);
  }

  KeyValues given() const {
    KeyValues kv;
    for (const auto& [key, flag] : flags_) {
      if (app_->count(flag) > 0) kv[key] = values_.at(key);
    }
    return kv;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::string>> flags_;
  std::map<std::string, std::string> values_;
};

// Config file (explicit or from PMNET_CONFIG), overlaid with command-line flags.
KeyValues merge_config(const std::string& config_path, const std::vector<const KeyFlags*>& flags) {
  KeyValues kv;
  std::string path = config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("PMNET_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) {
    kv = read_key_values(path);
    check_config_keys(kv, path);
  }
  for (const KeyFlags* f : flags) {
    for (const auto& [k, v] : f->given()) kv[k] = v;
  }
  return kv;
}

KeyValues pick(const KeyValues& kv, const KeyValues& owned) {
  KeyValues out;
  for (const auto& [k, v] : kv) {
    if (owned.contains(k) || (k == "exclude_vocab_seed" && owned.contains("vocab_seed"))) out[k] = v;
  }
  return out;
}

std::vector<std::string> header_lines(const KeyValues& kv) { return key_value_lines(kv); }

Lexicons load_lexicons(const std::string& dir) {
  if (dir.empty()) return Lexicons::defaults();
  Lexicons lex = Lexicons::defaults();
  auto words = [&](const char* name, std::set<std::string>& target) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) return;
    target.clear();
    for (const auto& entry : read_lexicon_file(p.string())) {
      std::string joined;
      for (const auto& w : entry) joined += (joined.empty() ? "" : " ") + w;
      target.insert(joined);
    }
  };
  words("filled_pauses.txt", lex.filled_pauses);
  words("edit_words.txt", lex.edit_words);
  words("fragments.txt", lex.fragments);
  words("conjunctions.txt", lex.conjunctions);
  if (const fs::path p = fs::path(dir) / "discourse_markers.txt"; fs::exists(p)) {
    lex.discourse_markers = read_lexicon_file(p.string());
  }
  return lex;
}

Corpus load_corpus(const std::string& path, const Lexicons& lex) {
  if (!fs::exists(path)) throw DataError("no such corpus file: " + path);
  try {
    return read_corpus(path, lex);
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << text;
}

std::pair<std::string, std::string> split_label(const std::string& arg, const char* what) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
    throw ConfigError(std::string(what) + " must be given as LABEL=PATH, got '" + arg + "'");
  }
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gen_corpus(const KeyValues& merged, const std::string& out_dir, const std::string& name, std::ostream& out) {
  const SynthConfig cfg = SynthConfig::from_kv(pick(merged, SynthConfig{}.to_kv()));
  const Corpus corpus = generate_synthetic(cfg);
  fs::create_directories(out_dir);
  const auto header = header_lines(cfg.to_kv());
  const std::string base = (fs::path(out_dir) / name).string();
  write_bracketed(base + ".txt", corpus, header);
  write_conll(base + ".conll", corpus, header);
  std::size_t spans = 0, tokens = 0;
  for (const auto& ex : corpus) {
    spans += ex.sentence.spans.size();
    tokens += ex.tags.size();
  }
  out << "wrote " << corpus.size() << " sentences (" << tokens << " tokens, " << spans << " disfluencies) to "
      << base << ".txt and " << base << ".conll\n";
  return kExitOk;
}

int cmd_train(const KeyValues& merged, const std::string& train_path, const std::string& dev_path,
              const std::string& test_path, const std::string& out_dir, std::size_t jobs, const Lexicons& lex,
              std::ostream& out) {
  const ModelConfig mcfg = ModelConfig::from_kv(pick(merged, ModelConfig{}.to_kv()));
  const TrainConfig tcfg = TrainConfig::from_kv(pick(merged, TrainConfig{}.to_kv()));
  const Corpus train_set = load_corpus(train_path, lex);
  const Corpus dev_set = load_corpus(dev_path, lex);
  std::optional<Corpus> test_set;
  if (!test_path.empty()) test_set = load_corpus(test_path, lex);
  if (train_set.empty()) throw DataError(train_path + ": training corpus is empty");
  if (dev_set.empty()) throw DataError(dev_path + ": development corpus is empty");

  KeyValues header = mcfg.to_kv();
  for (const auto& [k, v] : tcfg.to_kv()) header[k] = v;
  header["train"] = train_path;
  header["dev"] = dev_path;
  if (test_set) header["test"] = test_path;

  const MultiSeedResult res =
      multi_seed(mcfg, tcfg, train_set, dev_set, test_set ? &*test_set : nullptr, out_dir, jobs, header);

  std::ostringstream summary;
  for (const auto& line : header_lines(header)) summary << "# " << line << '\n';
  summary << "seed\tbest_epoch\tepochs\tdev_f1\ttest_f1\taborted\n";
  char buf[64];
  auto num = [&](const std::optional<ScoreReport>& r) {
    if (!r) return std::string("NA");
    std::snprintf(buf, sizeof buf, "%.6f", r->f1);
    return std::string(buf);
  };
  std::vector<ScoreReport> dev_runs, test_runs;
  for (const auto& run : res.runs) {
    summary << run.record.seed << '\t' << run.record.best_epoch << '\t' << run.record.epochs.size() << '\t'
            << num(run.dev) << '\t' << num(run.test) << '\t' << (run.record.aborted ? "yes" : "no") << '\n';
    if (run.dev) dev_runs.push_back(*run.dev);
    if (run.test) test_runs.push_back(*run.test);
    if (run.record.aborted) out << "seed " << run.record.seed << " aborted: " << run.record.diagnostic << '\n';
  }
  write_text((fs::path(out_dir) / "summary.tsv").string(), summary.str(), out);

  auto aggregate = [&](const std::vector<ScoreReport>& runs, const std::string& domain) {
    ScoreReport r;
    std::vector<double> p, rc, f;
    for (const auto& x : runs) {
      p.push_back(x.precision);
      rc.push_back(x.recall);
      f.push_back(x.f1);
    }
    r.precision = mean_std(p).mean;
    r.recall = mean_std(rc).mean;
    const Mean m = mean_std(f);
    r.f1 = r.seed_mean_f1 = m.mean;
    r.seed_std_f1 = m.std;
    r.variant = variant_name(mcfg.variant);
    r.domain = domain;
    return r;
  };
  std::vector<ScoreReport> reports;
  if (!dev_runs.empty()) reports.push_back(aggregate(dev_runs, "dev"));
  if (!test_runs.empty()) reports.push_back(aggregate(test_runs, "test"));
  if (!reports.empty()) {
    const std::string report = emit_report(reports, ReportFormat::tsv, header_lines(header));
    write_text((fs::path(out_dir) / "report.tsv").string(), report, out);
    out << emit_report(reports, ReportFormat::tsv);
  }
  if (!res.aborted_seeds.empty()) {
    out << res.aborted_seeds.size() << " of " << res.runs.size() << " seed runs aborted\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_eval(const std::vector<std::string>& model_args, const std::vector<std::string>& domain_args,
             const std::string& format_name, const std::string& out_path, std::size_t jobs, const Lexicons& lex,
             std::ostream& out, std::ostream& err) {
  const ReportFormat format = parse_report_format(format_name);
  KeyValues header;
  std::vector<std::unique_ptr<Tagger>> owned;
  std::vector<ModelEntry> models;
  for (const auto& arg : model_args) {
    auto [label, paths] = split_label(arg, "--model");
    header["model." + label] = paths;
    ModelEntry m{label, {}};
    for (const auto& p : split_commas(paths)) {
      owned.push_back(std::make_unique<Tagger>(load_tagger(p)));
      m.runs.push_back(owned.back().get());
    }
    models.push_back(std::move(m));
  }
  std::vector<DomainEntry> domains;
  for (const auto& arg : domain_args) {
    auto [label, path] = split_label(arg, "--domain");
    header["domain." + label] = path;
    DomainEntry d{label, std::nullopt};
    if (fs::exists(path)) d.corpus = load_corpus(path, lex);
    domains.push_back(std::move(d));
  }
  const auto cells = cross_domain_eval(models, domains, jobs);
  std::vector<ScoreReport> reports;
  std::vector<std::string> lines = header_lines(header);
  bool missing = false;
  for (const auto& c : cells) {
    if (c.report) {
      reports.push_back(*c.report);
    } else {
      missing = true;
      lines.push_back("absent: " + c.variant + " on " + c.domain);
      err << "no data for domain " << c.domain << "; cell " << c.variant << " x " << c.domain << " is absent\n";
    }
  }
  write_text(out_path, emit_report(reports, format, lines), out);
  return missing ? kExitData : kExitOk;
}

int cmd_ablate(const std::string& model_path, const std::string& data_path, const std::string& label_arg,
               const std::string& format_name, const std::string& out_path, std::size_t jobs, const Lexicons& lex,
               std::ostream& out) {
  const ReportFormat format = parse_report_format(format_name);
  const Tagger tagger = load_tagger(model_path);
  const Corpus corpus = load_corpus(data_path, lex);
  const std::string label = label_arg.empty() ? fs::path(data_path).stem().string() : label_arg;
  ScoreReport regular = evaluate(tagger, corpus, jobs);
  regular.domain = label;
  ScoreReport ablated = unk_ablation_eval(tagger, corpus, jobs);
  ablated.domain = label + "+unk";
  const KeyValues header{{"model", model_path}, {"data", data_path}, {"unk_mode", "full_ablation"}};
  write_text(out_path, emit_report({regular, ablated}, format, header_lines(header)), out);
  return kExitOk;
}

int cmd_extract_features(const KeyValues& merged, const std::string& data_path, const std::string& out_path,
                         const Lexicons& lex, std::ostream& out) {
  const ModelConfig mcfg = ModelConfig::from_kv(pick(merged, ModelConfig{}.to_kv()));
  const FeatureConfig fcfg = mcfg.feature_config();
  const Corpus corpus = load_corpus(data_path, lex);
  const KeyValues header{{"window", std::to_string(fcfg.window)}, {"max_gap", std::to_string(fcfg.max_gap)},
                         {"data", data_path}};
  std::ostringstream dump;
  write_feature_dump(dump, corpus, fcfg, header_lines(header));
  write_text(out_path, dump.str(), out);
  return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(path);
  out << "config\n";
  for (const auto& [k, v] : ck.config) {
    if (k == "vocab.tokens" || k == "vocab.pos") {
      std::istringstream words(v);
      std::size_t n = 0;
      for (std::string w; words >> w;) ++n;
      out << "  " << k << " (" << n << " entries)\n";
      continue;
    }
    out << "  " << k << '=' << v << '\n';
  }
  out << "vocabulary\n  tokens=" << ck.vocab.token_count() << "\n  pos=" << ck.vocab.pos_count() << '\n';
  out << "params\n";
  Index total = 0;
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    out << "  " << ck.params.name(i) << ' ' << shape_string(ck.params.at(i).shape) << '\n';
    total += ck.params.at(i).size();
  }
  out << "total " << total << '\n';
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) return kExitUsage;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitData;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Disfluency detection with pattern match networks"};
  app.name("pmnet");
  app.require_subcommand(1);

  std::string config_path, lexicon_dir, out_dir, name = "corpus";
  std::string train_path, dev_path, test_path, data_path, out_path, model_path, label;
  std::string format = "tsv";
  std::size_t jobs = 1;
  std::vector<std::string> model_args, domain_args;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value file (default: $PMNET_CONFIG)");
  };
  auto lexicons = [&](CLI::App* sub) {
    sub->add_option("--lexicon-dir", lexicon_dir, "directory with lexicon files");
  };

  CLI::App* gen = app.add_subcommand("gen-corpus", "write a synthetic corpus in both formats");
  common(gen);
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--name", name, "file name stem")->capture_default_str();
  KeyFlags gen_keys(gen, SynthConfig{}.to_kv(), "Generator");
  gen_keys.add("exclude_vocab_seed", "", "Generator");

  CLI::App* tr = app.add_subcommand("train", "train one or more seeds");
  common(tr);
  lexicons(tr);
  tr->add_option("--train", train_path, "training corpus");
  tr->add_option("--dev", dev_path, "development corpus");
  tr->add_option("--test", test_path, "test corpus");
  tr->add_option("--out", out_dir, "output directory");
  tr->add_option("--jobs", jobs, "parallel seed runs")->capture_default_str();
  KeyFlags tr_model(tr, ModelConfig{}.to_kv(), "Model");
  KeyFlags tr_train(tr, TrainConfig{}.to_kv(), "Training");

  CLI::App* ev = app.add_subcommand("eval", "score checkpoints on one or more domains");
  lexicons(ev);
  ev->add_option("--model", model_args, "LABEL=CKPT[,CKPT...]; repeatable");
  ev->add_option("--domain", domain_args, "LABEL=CORPUS; repeatable");
  ev->add_option("--format", format, "tsv or markdown")->capture_default_str();
  ev->add_option("--out", out_path, "report file (default: stdout)");
  ev->add_option("--jobs", jobs, "parallel cells")->capture_default_str();

  CLI::App* ab = app.add_subcommand("ablate", "score a checkpoint with every token replaced by UNK");
  lexicons(ab);
  ab->add_option("--model", model_path, "checkpoint");
  ab->add_option("--data", data_path, "corpus");
  ab->add_option("--label", label, "domain label (default: file stem)");
  ab->add_option("--format", format, "tsv or markdown")->capture_default_str();
  ab->add_option("--out", out_path, "report file (default: stdout)");
  ab->add_option("--jobs", jobs, "decoding threads")->capture_default_str();

  CLI::App* fx = app.add_subcommand("extract-features", "dump hand-crafted pattern features");
  common(fx);
  lexicons(fx);
  fx->add_option("--data", data_path, "corpus");
  fx->add_option("--out", out_path, "output file (default: stdout)");
  const ModelConfig mdef;
  KeyValues fx_defaults{{"window", std::to_string(mdef.window)}, {"max_gap", std::to_string(mdef.max_gap)}};
  KeyFlags fx_keys(fx, fx_defaults, "Features");

  CLI::App* ins = app.add_subcommand("inspect-checkpoint", "print a checkpoint's config and parameter shapes");
  ins->add_option("checkpoint", model_path, "checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    // Checked here rather than by the parser so unknown flags are reported first.
    auto require = [](CLI::App* sub, const char* opt) {
      if (sub->count(opt) == 0) throw ConfigError(sub->get_name() + ": " + opt + " is required");
    };
    if (*gen) require(gen, "--out");
    if (*tr) {
      for (const char* o : {"--train", "--dev", "--out"}) require(tr, o);
    }
    if (*ev) {
      for (const char* o : {"--model", "--domain"}) require(ev, o);
    }
    if (*ab) {
      for (const char* o : {"--model", "--data"}) require(ab, o);
    }
    if (*fx) require(fx, "--data");
    if (*ins) require(ins, "checkpoint");
    if (jobs < 1) throw ConfigError("--jobs must be at least 1");
    if (*gen) return cmd_gen_corpus(merge_config(config_path, {&gen_keys}), out_dir, name, out);
    if (*tr) {
      return cmd_train(merge_config(config_path, {&tr_model, &tr_train}), train_path, dev_path, test_path, out_dir,
                       jobs, load_lexicons(lexicon_dir), out);
    }
    if (*ev) return cmd_eval(model_args, domain_args, format, out_path, jobs, load_lexicons(lexicon_dir), out, err);
    if (*ab) return cmd_ablate(model_path, data_path, label, format, out_path, jobs, load_lexicons(lexicon_dir), out);
    if (*fx) {
      return cmd_extract_features(merge_config(config_path, {&fx_keys}), data_path, out_path,
                                  load_lexicons(lexicon_dir), out);
    }
    if (*ins) return cmd_inspect(model_path, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace pmnet
