// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "cad/checkpoint.hpp"
#include "cad/commands.hpp"
#include "cad/eval.hpp"
#include "cad/log.hpp"
#include "cad/numkit/gradcheck.hpp"
#include "cad/train.hpp"
#include "op_cases.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace cad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------- 1
Outcome gradient_integrity() {
  double model_worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    model_worst = std::max(model_worst, testing::toy_model_gradcheck(seed));

  auto cases = testing::op_gradcheck_cases();
  cases.push_back({"dropout", {6}, [](numkit::Graph& g, numkit::Var x) {
                     Rng mask(99);  // same mask on every evaluation
                     return testing::weighted_sum(g, numkit::dropout(numkit::tanh(x), 0.5, numkit::Mode::Train, mask));
                   }});
  cases.push_back({"weighted_cross_entropy", {3, 8}, [](numkit::Graph&, numkit::Var x) {
                     train::ClassWeights w;
                     for (std::size_t c = 0; c < 8; ++c) w.w[c] = 0.5 + 0.25 * static_cast<double>(c);
                     const std::size_t gold[] = {1, 4, 7};
                     return train::weighted_cross_entropy(train::probabilities(x), gold, w);
                   }});
  double op_worst = 0.0;
  std::string worst_op;
  for (const auto& c : cases)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed * 7919 + 3);
      double e = numkit::gradcheck(c.f, testing::random_tensor(rng, c.shape), 1e-5);
      if (e > op_worst) {
        op_worst = e;
        worst_op = c.name;
      }
    }
  return {model_worst < 1e-4 && op_worst < 1e-6,
          fmt("model max rel err %.2e over 20 seeds; per-op max %.2e", model_worst, op_worst) + " (" + worst_op +
              ")"};
}

// ---------------------------------------------------------------- 2
Outcome metric_closure() {
  const std::vector<double> friends = {75.14, 83.88, 65.88, 72.67}, support = {1287, 304, 85, 161};
  const std::vector<double> push = {87.62, 83.84, 73.56, 75.68};
  const double wa = eval::weighted_accuracy(friends, support);
  const double uwa = eval::unweighted_accuracy(friends);
  const double push_uwa = eval::unweighted_accuracy(push);
  const bool ok = std::abs(wa - 75.94) <= 0.05 && std::abs(uwa - 74.39) <= 0.01 && std::abs(push_uwa - 80.18) <= 0.01;
  return {ok, fmt("Friends WA %.4f UWA %.4f; EmotionPush UWA %.4f", wa, uwa, push_uwa)};
}

// Shared fixture for the training criteria.
struct SyntheticRun {
  model::ModelConfig cfg = testing::tiny_config(32);
  corpus::DatasetSplit train_split, val_split;
  embed::Vocabulary vocab;
  std::vector<model::PreparedDialogue> train, val;
  embed::FeatureStore store = testing::tiny_store(cfg);

  SyntheticRun(std::uint64_t corpus_seed, testing::SyntheticOptions opt = {}) {
    cfg.word_dim = 32;
    opt.dialogues = 20;
    opt.utterances = 5;
    train_split = testing::synthetic_split(corpus::SplitName::Train, corpus_seed, opt);
    opt.dialogues = 5;
    val_split = testing::synthetic_split(corpus::SplitName::Validation, corpus_seed + 1, opt);
    vocab = embed::build_vocab(train_split);
    train = model::prepare(train_split, vocab, cfg.max_tokens);
    val = model::prepare(val_split, vocab, cfg.max_tokens);
  }
  model::ModelParams init(std::uint64_t seed) const {
    Rng rng(seed);
    return model::ModelParams::initialize(cfg, vocab.size(), rng);
  }
  train::TrainConfig config(std::size_t epochs, std::uint64_t seed) const {
    train::TrainConfig tc;
    tc.lr0 = 0.00025 * 8;
    tc.max_epochs = epochs;
    tc.patience = epochs;
    tc.seed = seed;
    tc.record_timing = false;
    return tc;
  }
};

double accuracy_on(const model::ModelParams& p, const std::vector<model::PreparedDialogue>& ds,
                   const embed::FeatureStore& store) {
  return cli::plain_accuracy(eval::evaluate(p, ds, store, eval::default_active_classes()));
}

// ---------------------------------------------------------------- 3
Outcome synthetic_overfit() {
  std::string detail;
  bool all = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticRun run(100 + seed);
    train::ClassWeights w = train::compute_class_weights(train::histogram(run.train), eval::default_active_classes());
    std::optional<std::size_t> reached;
    double held_out = 0.0, best_train = 0.0;
    // Training stops at the first epoch whose parameters fit the training set.
    struct Reached {};
    try {
      train::train_loop(run.init(seed), run.train, run.val, run.store, run.config(200, seed), w,
                        [&](const train::EpochRecord& r, const model::ModelParams& p) {
                          const double acc = accuracy_on(p, run.train, run.store);
                          best_train = std::max(best_train, acc);
                          if (acc >= 0.99) {
                            reached = r.epoch;
                            held_out = accuracy_on(p, run.val, run.store);
                            throw Reached{};
                          }
                        });
    } catch (const Reached&) {
    }
    const bool ok = reached && held_out >= 0.90;
    all = all && ok;
    if (!detail.empty()) detail += "; ";
    detail += "seed " + std::to_string(seed) + ": " +
              (reached ? "train >= 99% at epoch " + std::to_string(*reached) + fmt(", held-out %.1f%%", 100 * held_out)
                       : fmt("best train %.1f%% after 200 epochs", 100 * best_train));
  }
  return {all, detail};
}

// ---------------------------------------------------------------- 4
Outcome exclusion_contract() {
  testing::SyntheticOptions opt;
  opt.inactive_noise = true;
  SyntheticRun run(7, opt);
  const eval::ActiveSet active = eval::default_active_classes();
  train::ClassWeights w = train::compute_class_weights(train::histogram(run.train), active);

  std::vector<model::PreparedDialogue> removed = run.train;
  std::size_t dropped = 0;
  for (auto& d : removed)
    for (std::size_t i = 0; i < d.gold.size(); ++i)
      if (!active[corpus::code(d.gold[i])]) {
        d.labeled[i] = false;
        ++dropped;
      }
  train::ClassWeights w_removed = w;
  for (std::size_t c = 0; c < 8; ++c)
    if (!active[c]) w_removed.w[c] = 1.0;

  // Snapshot every parameter after every epoch, for both runs.
  auto trajectory = [&](const std::vector<model::PreparedDialogue>& data, const train::ClassWeights& weights) {
    std::vector<std::vector<numkit::Tensor>> snaps;
    train::train_loop(run.init(5), data, run.val, run.store, run.config(5, 5), weights,
                      [&](const train::EpochRecord&, const model::ModelParams& p) {
                        std::vector<numkit::Tensor> s;
                        for (const auto* q : p.parameters()) s.push_back(q->value());
                        snaps.push_back(std::move(s));
                      });
    return snaps;
  };
  auto a = trajectory(run.train, w), b = trajectory(removed, w_removed);
  bool same = dropped > 0 && a.size() == b.size() && !a.empty();
  std::size_t compared = 0;
  for (std::size_t e = 0; same && e < a.size(); ++e)
    for (std::size_t k = 0; same && k < a[e].size(); ++k) {
      same = numkit::bitwise_equal(a[e][k], b[e][k]);
      ++compared;
    }
  return {same, std::to_string(dropped) + " excluded utterances, " + std::to_string(a.size()) + " epochs, " +
                    std::to_string(compared) + " tensor snapshots compared bitwise"};
}

// ---------------------------------------------------------------- 5
Outcome masking_invariance() {
  SyntheticRun run(11);
  model::ModelParams params = run.init(3);
  Rng rng(2024);
  std::size_t trials = 0, differing = 0;
  for (; trials < 1000; ++trials) {
    const model::PreparedDialogue& d = run.val[rng() % run.val.size()];
    const auto base = model::predict(params, d, run.store);

    model::PreparedDialogue fuzzed = d;
    embed::FeatureStore store(run.store);
    auto& u = fuzzed.utterances[rng() % fuzzed.utterances.size()];
    for (std::size_t t = u.valid_len; t < u.token_ids.size(); ++t) {
      u.token_ids[t] = rng() % run.vocab.size();
      std::vector<double> noise(run.cfg.context_dim);
      for (double& v : noise) v = uniform(rng, -10, 10);
      store.add_word(u.dialogue_id, u.index, t, noise);
    }
    const auto out = model::predict(params, fuzzed, store);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].probabilities != base[i].probabilities) {
        ++differing;
        break;
      }
  }
  return {differing == 0, std::to_string(trials) + " fuzz trials, " + std::to_string(differing) + " changed outputs"};
}

// ---------------------------------------------------------------- 6
Outcome schedule_and_stopping() {
  train::TrainConfig cfg;
  bool lr_ok = true;
  for (std::size_t e = 0; e <= 50; ++e)
    lr_ok = lr_ok && train::lr_at(e, cfg) == std::ldexp(0.00025, -static_cast<int>(e / 15));

  // Rising for 7 epochs, then flat.
  train::EarlyStopping es(10);
  std::size_t stopped = 0;
  for (std::size_t e = 0; e < 100; ++e) {
    es.observe(e, std::min<double>(static_cast<double>(e), 6.0) / 10.0);
    if (es.should_stop(e)) {
      stopped = e;
      break;
    }
  }
  const bool curve_ok = es.best_epoch() == 6u && stopped == 16;

  // Inside the loop: the log ends exactly patience epochs after the best one.
  SyntheticRun run(21);
  train::ClassWeights w = train::compute_class_weights(train::histogram(run.train), eval::default_active_classes());
  train::TrainConfig tc = run.config(200, 4);
  tc.patience = 10;
  train::TrainResult r = train::train_loop(run.init(4), run.train, run.val, run.store, tc, w);
  const bool loop_ok = r.best_epoch && r.log.size() == *r.best_epoch + 11;

  return {lr_ok && curve_ok && loop_ok,
          std::string("lr_at exact on [0,50]: ") + (lr_ok ? "yes" : "no") + "; curve best 6 stop " +
              std::to_string(stopped) + "; loop best " + (r.best_epoch ? std::to_string(*r.best_epoch) : "none") +
              " last " + std::to_string(r.log.empty() ? 0 : r.log.back().epoch)};
}

// ---------------------------------------------------------------- 7
Outcome determinism() {
  testing::TempDir dir("cad-accept");
  testing::write_synthetic_corpus(dir / "corpus", 77);
  // Two runs that differ only in their output directory.
  for (const char* run : {"run_a", "run_b"}) {
    std::string text = testing::synthetic_config(40);
    text.replace(text.find("output_dir = out"), 16, std::string("output_dir = ") + run);
    testing::write_file(dir / (std::string(run) + ".cfg"), text);
  }
  std::ostringstream sink;
  cli::cmd_train(dir / "run_a.cfg", sink);
  cli::cmd_train(dir / "run_b.cfg", sink);
  bool same = true;
  std::string files;
  for (const char* f : {"train_log.jsonl", "checkpoint.json", "checkpoint.bin", "validation_report.json"}) {
    const std::string x = testing::read_file(dir / "run_a" / f), y = testing::read_file(dir / "run_b" / f);
    same = same && !x.empty() && x == y;
    files += std::string(files.empty() ? "" : ", ") + f + (x == y ? "" : " DIFFERS");
  }
  return {same, "byte-identical: " + files};
}

}  // namespace

int main() {
  log::set_level(log::Level::Off);
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"Gradient integrity", 30, gradient_integrity},
      {"Metric arithmetic closure", 1, metric_closure},
      {"Synthetic overfit", 300, synthetic_overfit},
      {"Exclusion contract", 0, exclusion_contract},
      {"Masking invariance", 0, masking_invariance},
      {"Schedule and stopping", 0, schedule_and_stopping},
      {"Determinism", 0, determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_s);
    }
    if (!o.pass) ++failures;
    std::printf("%s [%zu] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
