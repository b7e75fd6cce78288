#ifndef PMNET_TRAINING_HPP_
#define PMNET_TRAINING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmnet/corpus.hpp"
#include "pmnet/evaluation.hpp"
#include "pmnet/kvconfig.hpp"
#include "pmnet/model.hpp"

namespace pmnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  std::size_t max_epochs = 50;
  std::size_t batch_size = 16;
  std::size_t patience = 5;
  // Training surfaces seen fewer times map to UNK.
  std::size_t min_count = 10;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};

  void validate() const;
  KeyValues to_kv() const;
  static TrainConfig from_kv(const KeyValues& kv);
};

std::string format_seeds(const std::vector<std::uint64_t>& seeds);
std::vector<std::uint64_t> parse_seeds(const std::string& text);

// Adam on every tensor of a store; moment buffers are created on first use.
class Adam {
 public:
  explicit Adam(const TrainConfig& cfg)
      : lr_(cfg.learning_rate), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.adam_eps) {}
  void step(ParamStore& params);

 private:
  double lr_, b1_, b2_, eps_;
  long step_count_ = 0;
  std::vector<Vector> m_, v_;
};

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor* const> params, double max_norm);

// Length-bucketed batches of example indices. Order depends only on `rng`.
std::vector<std::vector<std::size_t>> make_batches(const Corpus& corpus, std::size_t batch_size, Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  ScoreReport dev;
  double dev_tag_accuracy = 0.0;
  // Mean per-sentence NLL on the dev set.
  double dev_loss = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_f1 = -1.0;
  std::string checkpoint_path;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

struct TrainOptions {
  // Written whenever a new best model is found; empty to skip.
  std::string checkpoint_path;
  // Per-epoch TSV log; empty to skip.
  std::string log_path;
  // Extra key=value lines for the checkpoint and log headers.
  KeyValues header;
  // Threads used when decoding the dev set.
  std::size_t eval_jobs = 1;
};

struct TrainResult {
  RunRecord record;
  // Parameters of the best epoch; absent only if no epoch completed.
  std::optional<Tagger> best;
};

// Trains one seed. The best model maximizes dev edit-F1, with lower dev loss
// breaking ties; patience counts epochs without such an improvement. A
// non-finite loss stops training and marks the record as aborted.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const Corpus& train_set, const Corpus& dev_set,
                  std::uint64_t seed, const TrainOptions& opts = {});

// Same as above, starting from an existing model (vocabulary and parameters).
TrainResult train(Tagger model, const TrainConfig& tcfg, const Corpus& train_set, const Corpus& dev_set,
                  std::uint64_t seed, const TrainOptions& opts = {});

std::string run_log_header();
std::string run_log_line(const EpochRecord& e);

struct SeedRun {
  RunRecord record;
  std::optional<Tagger> model;
  std::optional<ScoreReport> dev;
  std::optional<ScoreReport> test;
};

struct MultiSeedResult {
  std::vector<SeedRun> runs;
  // Over non-aborted runs only.
  Mean dev_f1;
  std::optional<Mean> test_f1;
  std::vector<std::uint64_t> aborted_seeds;
};

// Independent runs for every seed in tcfg.seeds, `jobs` at a time. When
// `out_dir` is set, each seed writes seed-<s>.ckpt and seed-<s>.log there.
MultiSeedResult multi_seed(const ModelConfig& cfg, const TrainConfig& tcfg, const Corpus& train_set,
                           const Corpus& dev_set, const Corpus* test_set, const std::string& out_dir = "",
                           std::size_t jobs = 1, const KeyValues& header = {});

}  // namespace pmnet

#endif  // PMNET_TRAINING_HPP_
