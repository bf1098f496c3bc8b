// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cad/corpus.hpp"
#include "cad/eval.hpp"
#include "cad/model.hpp"
#include "cad/numkit/graph.hpp"

namespace cad::train {

using corpus::kNumLabels;
using numkit::Parameter;
using numkit::Tensor;
using numkit::Var;

/// Per-class loss weights; inactive classes are exactly zero.
struct ClassWeights {
  std::array<double, kNumLabels> w{};
  double operator[](std::size_t c) const { return w[c]; }
};

/// Inverse frequency with mean one over the active classes:
/// w_c = N_active / (|active| * n_c). Throws ConfigError when an active
/// class has no examples or no class is active.
ClassWeights compute_class_weights(const corpus::LabelHistogram& counts, const eval::ActiveSet& active);

/// Row-wise softmax of logits [N x C].
Var probabilities(Var logits);

/// (1/N) sum_i w[gold_i] * -log probs[i, gold_i]. Rows whose weight is zero,
/// or whose `scored` flag is false, contribute nothing to the value and
/// nothing to the gradient. An empty `scored` scores every row. Gold codes
/// outside [0, C) throw DataError.
Var weighted_cross_entropy(Var probs, std::span<const std::size_t> gold, const ClassWeights& weights,
                           std::span<const bool> scored = {});

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter plus the step counter.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState for_params(std::span<Parameter* const> params);
};

/// One bias-corrected Adam step using each parameter's accumulated gradient.
void adam_update(std::span<Parameter* const> params, AdamState& state, double lr, const AdamConfig& cfg = {});

/// Scales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Parameter* const> params, double max_norm);

enum class StopMetric { WA, UWA };

struct TrainConfig {
  double lr0 = 0.00025;
  double decay_factor = 0.5;
  std::size_t decay_every = 15;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  AdamConfig adam;
  eval::ActiveSet active_classes = eval::default_active_classes();
  double clip_norm = 5.0;  // 0 disables clipping
  bool freeze_embeddings = false;
  StopMetric stop_metric = StopMetric::WA;
  bool record_timing = true;  // false writes elapsed_s = 0 for byte-stable logs

  /// Throws ConfigError for non-positive rates, factors outside (0, 1],
  /// decay_every == 0 or an empty active set.
  void validate() const;
};

/// lr0 * decay_factor^floor(epoch / decay_every).
double lr_at(std::size_t epoch, const TrainConfig& cfg);

/// Tracks the best validation score; improvement means strictly greater.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  /// Records an epoch's score; returns true if it is a new best.
  bool observe(std::size_t epoch, double score);
  /// True once `patience` epochs have passed without improvement.
  bool should_stop(std::size_t epoch) const;
  std::optional<std::size_t> best_epoch() const { return best_epoch_; }
  double best_score() const { return best_; }

 private:
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_epoch_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double val_wa = 0.0;
  double val_uwa = 0.0;
  double elapsed_s = 0.0;
};

/// One JSON object per line: {epoch, loss, lr, val_wa, val_uwa, elapsed_s}.
std::string to_json_line(const EpochRecord& r);

struct TrainResult {
  model::ModelParams best;
  std::vector<EpochRecord> log;
  std::optional<std::size_t> best_epoch;
  bool diverged = false;
  std::string divergence;
};

/// Train-mode forward and backward over one dialogue, adding into the
/// parameter gradients (no optimizer step). Unlabeled utterances keep their
/// position in the dialogue but carry no loss. Returns the loss value.
double accumulate_dialogue_gradient(model::ModelParams& params, const model::PreparedDialogue& dialogue,
                                    const embed::FeatureStore& store, const ClassWeights& weights, Rng& dropout_rng);

/// Epoch loop: seeded shuffle of the dialogue order, one optimizer step per
/// dialogue, then validation. Keeps the best-validation parameters and stops
/// after `patience` epochs without improvement or at max_epochs. A
/// non-finite loss ends training with `diverged` set and the best
/// parameters so far retained. `on_epoch` sees each record together with the
/// parameters at the end of that epoch.
using EpochCallback = std::function<void(const EpochRecord&, const model::ModelParams&)>;
TrainResult train_loop(model::ModelParams initial, std::span<const model::PreparedDialogue> train,
                       std::span<const model::PreparedDialogue> validation, const embed::FeatureStore& store,
                       const TrainConfig& cfg, const ClassWeights& weights,
                       const EpochCallback& on_epoch = {});

/// Label histogram over prepared dialogues (labeled utterances only).
corpus::LabelHistogram histogram(std::span<const model::PreparedDialogue> dialogues);

}  // namespace cad::train
