#include "pmnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "pmnet/checkpoint.hpp"
#include "pmnet/error.hpp"
#include "pmnet/parallel.hpp"
#include "pmnet/vocab.hpp"

namespace pmnet {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (seeds.empty()) throw ConfigError("seed list must not be empty");
}

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) {
    if (!out.empty()) out += ',';
    out += std::to_string(s);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    KeyValues one{{"seed", item}};
    seeds.push_back(kv_uint(one, "seed", 0));
  }
  if (seeds.empty()) throw ConfigError("seed list must not be empty");
  return seeds;
}

KeyValues TrainConfig::to_kv() const {
  return {
      {"learning_rate", format_double(learning_rate)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"adam_eps", format_double(adam_eps)},
      {"clip_norm", format_double(clip_norm)},
      {"max_epochs", std::to_string(max_epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"patience", std::to_string(patience)},
      {"min_count", std::to_string(min_count)},
      {"seeds", format_seeds(seeds)},
  };
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
  TrainConfig c;
  c.learning_rate = kv_double(kv, "learning_rate", c.learning_rate);
  c.beta1 = kv_double(kv, "beta1", c.beta1);
  c.beta2 = kv_double(kv, "beta2", c.beta2);
  c.adam_eps = kv_double(kv, "adam_eps", c.adam_eps);
  c.clip_norm = kv_double(kv, "clip_norm", c.clip_norm);
  c.max_epochs = kv_uint(kv, "max_epochs", c.max_epochs);
  c.batch_size = kv_uint(kv, "batch_size", c.batch_size);
  c.patience = kv_uint(kv, "patience", c.patience);
  c.min_count = kv_uint(kv, "min_count", c.min_count);
  if (auto it = kv.find("seeds"); it != kv.end()) c.seeds = parse_seeds(it->second);
  c.validate();
  return c;
}

void Adam::step(ParamStore& params) {
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.push_back(Vector::Zero(params.at(i).size()));
      v_.push_back(Vector::Zero(params.at(i).size()));
    }
  }
  if (m_.size() != params.size()) throw ContractError("Adam: parameter set changed between steps");
  ++step_count_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params.at(i);
    if (!t.grad) continue;
    const Vector& g = *t.grad;
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
    t.values.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_global_norm(std::span<Tensor* const> params, double max_norm) {
  double ss = 0.0;
  for (const Tensor* t : params) {
    if (t->grad) ss += t->grad->squaredNorm();
  }
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor* t : params) {
      if (t->grad) *t->grad *= f;
    }
  }
  return norm;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string header_text(const KeyValues& kv) {
  std::string out;
  for (const auto& line : key_value_lines(kv)) out += "# " + line + "\n";
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> make_batches(const Corpus& corpus, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return corpus[a].tags.size() < corpus[b].tags.size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  shuffle(batches, rng);
  return batches;
}

std::string run_log_header() { return "epoch\ttrain_loss\tdev_p\tdev_r\tdev_f1\tseconds"; }

std::string run_log_line(const EpochRecord& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.3f", e.epoch, e.train_loss, e.dev.precision,
                e.dev.recall, e.dev.f1, e.seconds);
  return buf;
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const Corpus& train_set, const Corpus& dev_set,
                  std::uint64_t seed, const TrainOptions& opts) {
  if (train_set.empty()) throw DataError("training corpus is empty");
  tcfg.validate();
  cfg.validate();
  return train(Tagger(cfg, build_vocab(train_set, tcfg.min_count), seed), tcfg, train_set, dev_set, seed, opts);
}

TrainResult train(Tagger model, const TrainConfig& tcfg, const Corpus& train_set, const Corpus& dev_set,
                  std::uint64_t seed, const TrainOptions& opts) {
  if (train_set.empty()) throw DataError("training corpus is empty");
  if (dev_set.empty()) throw DataError("development corpus is empty");
  tcfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  RunRecord& rec = result.record;
  rec.seed = seed;
  rec.checkpoint_path = opts.checkpoint_path;

  KeyValues header = opts.header;
  for (auto& [k, v] : tcfg.to_kv()) header.try_emplace(k, v);
  for (auto& [k, v] : model.config().to_kv()) header.try_emplace(k, v);
  header["seed"] = std::to_string(seed);

  std::ofstream log;
  if (!opts.log_path.empty()) {
    log.open(opts.log_path);
    if (!log) throw Error("cannot open run log " + opts.log_path);
    log << header_text(header) << run_log_header() << '\n' << std::flush;
  }

  Rng shuffle_rng = make_rng(seed, Stream::shuffle);
  Rng dropout_rng = make_rng(seed, Stream::dropout);
  Adam adam(tcfg);
  const std::vector<Tensor*> params = model.params().tensors();
  const std::vector<TagSequence> dev_gold = gold_tags(dev_set);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (const auto& batch : make_batches(train_set, tcfg.batch_size, shuffle_rng)) {
      model.params().zero_grad();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        Tape tape;
        const Var loss = model.loss(tape, train_set[idx], &dropout_rng);
        const double l = loss.item();
        if (!std::isfinite(l)) {
          rec.aborted = true;
          rec.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) + " on training sentence " +
                           std::to_string(idx);
          break;
        }
        loss_sum += l;
        tape.backward(scale(loss, inv));
      }
      if (rec.aborted) break;
      const double norm = clip_global_norm(params, tcfg.clip_norm);
      if (!std::isfinite(norm)) {
        rec.aborted = true;
        rec.diagnostic = "non-finite gradient norm at epoch " + std::to_string(epoch);
        break;
      }
      adam.step(model.params());
    }
    if (rec.aborted) break;

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = loss_sum / static_cast<double>(train_set.size());
    const std::vector<TagSequence> pred = predict_corpus(model, dev_set, opts.eval_jobs);
    er.dev = score(pred, dev_gold);
    er.dev_tag_accuracy = tag_accuracy(pred, dev_gold);
    std::vector<double> dev_nll(dev_set.size());
    parallel_for(dev_set.size(), opts.eval_jobs, [&](std::size_t i) { dev_nll[i] = model.nll(dev_set[i]); });
    for (double l : dev_nll) er.dev_loss += l;
    er.dev_loss /= static_cast<double>(dev_set.size());
    er.seconds = seconds_since(te);
    rec.epochs.push_back(er);
    if (log) log << run_log_line(er) << '\n' << std::flush;

    const bool better = er.dev.f1 > rec.best_dev_f1 || (er.dev.f1 == rec.best_dev_f1 && er.dev_loss < best_loss);
    if (better) {
      rec.best_dev_f1 = er.dev.f1;
      rec.best_epoch = epoch;
      best_loss = er.dev_loss;
      stale = 0;
      result.best.emplace(model);
      for (std::size_t i = 0; i < result.best->params().size(); ++i) result.best->params().at(i).grad.reset();
      if (!opts.checkpoint_path.empty()) {
        KeyValues ck = header;
        ck["best_epoch"] = std::to_string(epoch);
        ck["best_dev_f1"] = format_double(er.dev.f1);
        save_checkpoint(opts.checkpoint_path, *result.best, ck);
      }
    } else if (++stale >= tcfg.patience) {
      break;
    }
  }
  if (log && rec.aborted) log << "# aborted: " << rec.diagnostic << '\n';
  rec.wall_seconds = seconds_since(t0);
  return result;
}

MultiSeedResult multi_seed(const ModelConfig& cfg, const TrainConfig& tcfg, const Corpus& train_set,
                           const Corpus& dev_set, const Corpus* test_set, const std::string& out_dir,
                           std::size_t jobs, const KeyValues& header) {
  tcfg.validate();
  cfg.validate();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  MultiSeedResult res;
  res.runs.resize(tcfg.seeds.size());
  parallel_for(tcfg.seeds.size(), jobs, [&](std::size_t i) {
    const std::uint64_t seed = tcfg.seeds[i];
    TrainOptions opts;
    opts.header = header;
    if (!out_dir.empty()) {
      const std::string base = out_dir + "/seed-" + std::to_string(seed);
      opts.checkpoint_path = base + ".ckpt";
      opts.log_path = base + ".log";
    }
    TrainResult tr = train(cfg, tcfg, train_set, dev_set, seed, opts);
    SeedRun& run = res.runs[i];
    run.record = std::move(tr.record);
    run.model = std::move(tr.best);
    if (run.model && !run.record.aborted) {
      run.dev = evaluate(*run.model, dev_set);
      if (test_set) run.test = evaluate(*run.model, *test_set);
    }
  });
  std::vector<double> dev, test;
  for (const auto& r : res.runs) {
    if (r.record.aborted || !r.dev) {
      res.aborted_seeds.push_back(r.record.seed);
      continue;
    }
    dev.push_back(r.dev->f1);
    if (r.test) test.push_back(r.test->f1);
  }
  res.dev_f1 = mean_std(dev);
  if (test_set && !test.empty()) res.test_f1 = mean_std(test);
  return res;
}

}  // namespace pmnet
