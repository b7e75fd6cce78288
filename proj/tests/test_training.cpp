#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "pmnet/checkpoint.hpp"
#include "pmnet/corpus.hpp"
#include "pmnet/error.hpp"
#include "pmnet/synth.hpp"
#include "pmnet/training.hpp"
#include "pmnet/vocab.hpp"
#include "support/oracles.hpp"

using namespace pmnet;

namespace {

Corpus small_synthetic(std::size_t count, std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  sc.sentence_count = count;
  sc.content_words = 20;
  return generate_synthetic(sc);
}

Corpus one_sentence() {
  return {make_example(parse_bracketed("i want [ a flight + a flight ] to boston"))};
}

TrainConfig quick_config() {
  TrainConfig t;
  t.min_count = 1;
  t.max_epochs = 3;
  t.batch_size = 4;
  t.seeds = {1};
  return t;
}

std::string checkpoint_bytes(const Tagger& t) {
  std::ostringstream out;
  save_checkpoint(out, t);
  return out.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pmnet_training_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("train config key values round trip and validate") {
  TrainConfig t;
  t.learning_rate = 0.0125;
  t.clip_norm = 2.5;
  t.patience = 7;
  t.seeds = {3, 9, 27};
  const TrainConfig back = TrainConfig::from_kv(t.to_kv());
  CHECK(back.learning_rate == t.learning_rate);
  CHECK(back.clip_norm == t.clip_norm);
  CHECK(back.patience == 7);
  CHECK(back.seeds == t.seeds);
  CHECK(back.to_kv() == t.to_kv());

  CHECK(TrainConfig{}.seeds.size() == 15);
  CHECK(parse_seeds("4,5,6") == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(format_seeds({10, 2}) == "10,2");
  CHECK_THROWS_AS(parse_seeds(""), ConfigError);
  CHECK_THROWS_AS(parse_seeds("1,x"), ConfigError);

  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.learning_rate = -1e-3; });
  bad([](TrainConfig& c) { c.beta1 = 1.0; });
  bad([](TrainConfig& c) { c.clip_norm = 0.0; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.patience = 0; });
  bad([](TrainConfig& c) { c.max_epochs = 0; });
  bad([](TrainConfig& c) { c.seeds.clear(); });
  CHECK_THROWS_AS(TrainConfig::from_kv({{"batch_size", "many"}}), ConfigError);
}

TEST_CASE("clip global norm bounds the joint gradient norm") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> store;
    for (int k = 0; k < 4; ++k) {
      Tensor t = oracle::random_tensor({static_cast<Index>(1 + rng.below(6)), 3}, rng);
      t.grad = Vector::Zero(t.size());
      for (Index i = 0; i < t.size(); ++i) (*t.grad)(i) = rng.uniform(-3.0, 3.0);
      store.push_back(std::move(t));
    }
    std::vector<Tensor*> ptrs;
    double ss = 0.0;
    for (auto& t : store) {
      ptrs.push_back(&t);
      for (Index i = 0; i < t.size(); ++i) ss += (*t.grad)(i) * (*t.grad)(i);
    }
    const std::vector<Vector> before = [&] {
      std::vector<Vector> g;
      for (auto& t : store) g.push_back(*t.grad);
      return g;
    }();
    const double max_norm = rng.uniform(0.1, 8.0);
    const double reported = clip_global_norm(ptrs, max_norm);
    CHECK(reported == doctest::Approx(std::sqrt(ss)).epsilon(1e-12));

    double after = 0.0;
    for (auto& t : store) after += t.grad->squaredNorm();
    CHECK(std::sqrt(after) <= max_norm + 1e-9);
    // Direction is kept; gradients under the bound are untouched.
    const double f = reported > max_norm ? max_norm / reported : 1.0;
    for (std::size_t k = 0; k < store.size(); ++k) {
      CHECK(((*store[k].grad) - f * before[k]).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("make batches partition the corpus by length") {
  const Corpus corpus = small_synthetic(37, 3);
  Rng a(9), b(9);
  const auto first = make_batches(corpus, 5, a);
  CHECK(first == make_batches(corpus, 5, b));

  std::multiset<std::size_t> seen;
  for (const auto& batch : first) {
    CHECK(!batch.empty());
    CHECK(batch.size() <= 5);
    for (auto i : batch) seen.insert(i);
  }
  CHECK(seen.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(seen.count(i) == 1);

  // Length-sorted before chunking: a batch never straddles another batch's lengths.
  for (const auto& x : first) {
    for (const auto& y : first) {
      if (&x == &y) continue;
      std::size_t xmax = 0, ymin = std::numeric_limits<std::size_t>::max(), ymax = 0, xmin = ymin;
      for (auto i : x) xmax = std::max(xmax, corpus[i].tags.size()), xmin = std::min(xmin, corpus[i].tags.size());
      for (auto i : y) ymax = std::max(ymax, corpus[i].tags.size()), ymin = std::min(ymin, corpus[i].tags.size());
      CHECK((xmax <= ymin || ymax <= xmin));
    }
  }
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged") {
  const Corpus corpus = small_synthetic(12, 4);
  TrainConfig t = quick_config();
  t.learning_rate = 0.0;
  const ModelConfig cfg = oracle::toy_config();
  const Tagger initial(cfg, build_vocab(corpus, 1), 21);

  Tagger stepped = initial;
  Adam adam(t);
  for (int step = 0; step < 3; ++step) {
    stepped.params().zero_grad();
    for (const Example& ex : corpus) {
      Tape tape;
      tape.backward(stepped.loss(tape, ex));
    }
    adam.step(stepped.params());
  }
  for (std::size_t i = 0; i < initial.params().size(); ++i) {
    CHECK(stepped.params().at(i).values == initial.params().at(i).values);
  }

  const TrainResult r = train(initial, t, corpus, corpus, 21, {});
  REQUIRE(r.best);
  for (std::size_t i = 0; i < initial.params().size(); ++i) {
    CHECK(r.best->params().at(i).values == initial.params().at(i).values);
  }
}

TEST_CASE("loss decreases over the first steps on a fixed batch") {
  const Corpus corpus = small_synthetic(8, 6);
  TrainConfig t = quick_config();
  Tagger tagger(oracle::toy_config(), build_vocab(corpus, 1), 2);
  const std::vector<Tensor*> params = tagger.params().tensors();
  Adam adam(t);
  std::vector<double> losses;
  for (int step = 0; step <= 5; ++step) {
    tagger.params().zero_grad();
    double total = 0.0;
    for (const Example& ex : corpus) {
      Tape tape;
      const Var l = tagger.loss(tape, ex);
      total += l.item();
      tape.backward(scale(l, 1.0 / static_cast<double>(corpus.size())));
    }
    losses.push_back(total);
    clip_global_norm(params, t.clip_norm);
    adam.step(tagger.params());
  }
  for (std::size_t k = 1; k < losses.size(); ++k) CHECK(losses[k] < losses[k - 1]);
}

TEST_CASE("training is deterministic for a seed") {
  const Corpus train_set = small_synthetic(24, 7);
  const Corpus dev = small_synthetic(8, 8);
  ModelConfig cfg = oracle::toy_config();
  cfg.dropout = 0.25;
  const TrainConfig t = quick_config();
  const TrainResult a = train(cfg, t, train_set, dev, 5, {});
  const TrainResult b = train(cfg, t, train_set, dev, 5, {});
  REQUIRE(a.best);
  REQUIRE(b.best);
  CHECK(checkpoint_bytes(*a.best) == checkpoint_bytes(*b.best));
  REQUIRE(a.record.epochs.size() == b.record.epochs.size());
  for (std::size_t e = 0; e < a.record.epochs.size(); ++e) {
    CHECK(a.record.epochs[e].train_loss == b.record.epochs[e].train_loss);
    CHECK(a.record.epochs[e].dev_loss == b.record.epochs[e].dev_loss);
  }
  const TrainResult c = train(cfg, t, train_set, dev, 6, {});
  CHECK(checkpoint_bytes(*c.best) != checkpoint_bytes(*a.best));
}

TEST_CASE("early stopping keeps the best dev epoch") {
  const Corpus train_set = small_synthetic(40, 9);
  const Corpus dev = small_synthetic(15, 10);
  TrainConfig t = quick_config();
  t.max_epochs = 12;
  t.patience = 2;
  t.learning_rate = 0.01;
  const auto dir = scratch_dir("early");
  TrainOptions opts;
  opts.checkpoint_path = (dir / "best.ckpt").string();
  opts.log_path = (dir / "run.log").string();
  const TrainResult r = train(oracle::toy_config(), t, train_set, dev, 3, opts);
  REQUIRE(r.best);
  const RunRecord& rec = r.record;
  REQUIRE(!rec.epochs.empty());
  REQUIRE(rec.best_epoch >= 1);

  double best = -1.0;
  for (const auto& e : rec.epochs) best = std::max(best, e.dev.f1);
  CHECK(rec.best_dev_f1 == best);
  CHECK(rec.epochs[rec.best_epoch - 1].dev.f1 == best);
  for (std::size_t e = 0; e + 1 < rec.best_epoch; ++e) CHECK(rec.epochs[e].dev.f1 <= rec.best_dev_f1);
  // Stops at most `patience` epochs past the best one.
  CHECK(rec.epochs.size() <= rec.best_epoch + t.patience);

  const Tagger reloaded = load_tagger(opts.checkpoint_path);
  CHECK(reloaded.params() == r.best->params());
  CHECK(evaluate(reloaded, dev).f1 == rec.best_dev_f1);

  std::ifstream log(opts.log_path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(log, line)) lines.push_back(line);
  std::size_t header_at = 0;
  while (header_at < lines.size() && lines[header_at].starts_with("# ")) ++header_at;
  CHECK(header_at > 0);
  REQUIRE(header_at < lines.size());
  CHECK(lines[header_at] == run_log_header());
  CHECK(lines.size() - header_at - 1 == rec.epochs.size());
  CHECK(lines[header_at + 1] == run_log_line(rec.epochs[0]));
  CHECK(std::count(lines[header_at + 1].begin(), lines[header_at + 1].end(), '\t') == 5);
}

TEST_CASE("overfits a single sentence") {
  const Corpus one = one_sentence();
  TrainConfig t = quick_config();
  t.learning_rate = 0.05;
  t.max_epochs = 400;
  t.patience = 400;
  const TrainResult r = train(oracle::toy_config(), t, one, one, 1, {});
  REQUIRE(r.best);
  CHECK(r.record.best_dev_f1 == 1.0);
  CHECK(r.best->nll(one[0]) < 0.01);
  CHECK(r.best->predict(one[0].sentence) == one[0].tags);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const Corpus corpus = small_synthetic(6, 11);
  Tagger tagger(oracle::toy_config(), build_vocab(corpus, 1), 1);
  tagger.params().get("emit.b").values(0) = std::numeric_limits<double>::quiet_NaN();
  const TrainResult r = train(tagger, quick_config(), corpus, corpus, 1, {});
  CHECK(r.record.aborted);
  CHECK(r.record.diagnostic.find("non-finite loss") != std::string::npos);
  CHECK(r.record.epochs.empty());
  CHECK(!r.best);
}

TEST_CASE("empty corpora are data errors") {
  const Corpus corpus = small_synthetic(4, 12);
  CHECK_THROWS_AS(train(oracle::toy_config(), quick_config(), Corpus{}, corpus, 1, {}), DataError);
  CHECK_THROWS_AS(train(oracle::toy_config(), quick_config(), corpus, Corpus{}, 1, {}), DataError);
}

TEST_CASE("multi seed aggregates independent runs") {
  const Corpus train_set = small_synthetic(30, 13);
  const Corpus dev = small_synthetic(10, 14);
  const Corpus test = small_synthetic(10, 15);
  TrainConfig t = quick_config();
  t.learning_rate = 0.01;

  SUBCASE("one seed has zero spread") {
    t.seeds = {4};
    const MultiSeedResult r = multi_seed(oracle::toy_config(), t, train_set, dev, &test);
    REQUIRE(r.runs.size() == 1);
    REQUIRE(r.runs[0].dev);
    CHECK(r.dev_f1.mean == r.runs[0].dev->f1);
    CHECK(r.dev_f1.std == 0.0);
    REQUIRE(r.test_f1);
    CHECK(r.test_f1->std == 0.0);
  }

  SUBCASE("mean and population std over seeds") {
    t.seeds = {1, 2, 3};
    const auto dir = scratch_dir("multi");
    const MultiSeedResult r = multi_seed(oracle::toy_config(), t, train_set, dev, nullptr, dir.string(), 2);
    REQUIRE(r.runs.size() == 3);
    CHECK(r.aborted_seeds.empty());
    CHECK(!r.test_f1);
    std::vector<double> f;
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      CHECK(r.runs[i].record.seed == t.seeds[i]);
      REQUIRE(r.runs[i].dev);
      f.push_back(r.runs[i].dev->f1);
      CHECK(std::filesystem::exists(dir / ("seed-" + std::to_string(t.seeds[i]) + ".ckpt")));
      CHECK(std::filesystem::exists(dir / ("seed-" + std::to_string(t.seeds[i]) + ".log")));
    }
    const double mean = (f[0] + f[1] + f[2]) / 3.0;
    double var = 0.0;
    for (double x : f) var += (x - mean) * (x - mean);
    CHECK(std::abs(r.dev_f1.mean - mean) <= 1e-12);
    CHECK(std::abs(r.dev_f1.std - std::sqrt(var / 3.0)) <= 1e-12);

    // Seeded runs are independent of how many run at once.
    t.seeds = {2};
    const MultiSeedResult single = multi_seed(oracle::toy_config(), t, train_set, dev, nullptr);
    CHECK(single.runs[0].dev->f1 == r.runs[1].dev->f1);
    CHECK(single.runs[0].model->params() == r.runs[1].model->params());
  }
}
