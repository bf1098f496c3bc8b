// SPDX-License-Identifier: Apache-2.0
#include "cad/train.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "cad/errors.hpp"
#include "cad/log.hpp"
#include "cad/numkit/kernels.hpp"
#include "cad/numkit/ops.hpp"
#include "json.hpp"

namespace cad::train {

namespace nk = numkit;

ClassWeights compute_class_weights(const corpus::LabelHistogram& counts, const eval::ActiveSet& active) {
  std::size_t n_active = 0, classes = 0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (!active[c]) continue;
    if (counts[c] == 0)
      throw ConfigError("active class '" + std::string(corpus::label_name(corpus::label_from_code(c))) +
                        "' has no training examples");
    n_active += counts[c];
    ++classes;
  }
  if (classes == 0) throw ConfigError("no active classes");
  ClassWeights w;
  for (std::size_t c = 0; c < kNumLabels; ++c)
    if (active[c])
      w.w[c] = static_cast<double>(n_active) / (static_cast<double>(classes) * static_cast<double>(counts[c]));
  return w;
}

Var probabilities(Var logits) {
  if (logits.value().rank() != 2) throw DimensionError("probabilities: logits must be [N x C]");
  std::vector<Var> rows;
  for (std::size_t i = 0; i < logits.value().rows(); ++i) rows.push_back(nk::softmax(nk::row(logits, i)));
  return nk::stack_rows(rows);
}

Var weighted_cross_entropy(Var probs, std::span<const std::size_t> gold, const ClassWeights& weights,
                           std::span<const bool> scored) {
  const Tensor& p = probs.value();
  if (p.rank() != 2) throw DimensionError("weighted_cross_entropy: probabilities must be [N x C]");
  const std::size_t N = p.rows(), C = p.cols();
  if (gold.size() != N)
    throw DimensionError("weighted_cross_entropy: " + std::to_string(gold.size()) + " labels for " +
                         std::to_string(N) + " rows");
  if (!scored.empty() && scored.size() != N) throw DimensionError("weighted_cross_entropy: scored mask length");
  std::vector<double> row_weight(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (gold[i] >= C || gold[i] >= kNumLabels)
      throw DataError("label error: gold code " + std::to_string(gold[i]) + " out of range");
    if (!scored.empty() && !scored[i]) continue;
    row_weight[i] = weights[gold[i]];
  }
  const double inv_n = 1.0 / static_cast<double>(N);
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    if (row_weight[i] != 0.0) loss += row_weight[i] * -std::log(p.at(i, gold[i]));
  loss *= inv_n;
  std::vector<std::size_t> gold_copy(gold.begin(), gold.end());
  return probs.graph()->record(
      "weighted_cross_entropy", Tensor::vector({loss}), {probs},
      [probs, gold_copy = std::move(gold_copy), row_weight = std::move(row_weight), inv_n](
          const Tensor& g, std::span<Tensor* const> d) {
        if (!d[0]) return;
        const Tensor& pv = probs.value();
        for (std::size_t i = 0; i < gold_copy.size(); ++i)
          if (row_weight[i] != 0.0) d[0]->at(i, gold_copy[i]) -= g[0] * row_weight[i] * inv_n / pv.at(i, gold_copy[i]);
      });
}

AdamState AdamState::for_params(std::span<Parameter* const> params) {
  AdamState s;
  for (Parameter* p : params) {
    s.m.emplace_back(p->value().shape());
    s.v.emplace_back(p->value().shape());
  }
  return s;
}

void adam_update(std::span<Parameter* const> params, AdamState& state, double lr, const AdamConfig& cfg) {
  if (state.m.size() != params.size()) throw DimensionError("adam_update: state does not match parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  nk::kernels::AdamCoeffs c{lr, cfg.beta1, cfg.beta2, cfg.eps, 1.0 - std::pow(cfg.beta1, t),
                            1.0 - std::pow(cfg.beta2, t)};
  const auto& K = nk::kernels::active();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (state.m[k].shape() != p.value().shape())
      throw DimensionError("adam_update: moment shape mismatch for " + p.name());
    K.adam(p.value().ptr(), p.grad().ptr(), state.m[k].ptr(), state.v[k].ptr(), p.value().size(), c);
  }
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  const auto& K = nk::kernels::active();
  double sq = 0.0;
  for (const Parameter* p : params) sq += K.sum_squares(p->grad().ptr(), p->grad().size());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad().data()) g *= scale;
  }
  return norm;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must be in (0, 1]");
  if (decay_every == 0) throw ConfigError("decay_every must be at least 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw ConfigError("Adam coefficients out of range");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  bool any = false;
  for (bool a : active_classes) any = any || a;
  if (!any) throw ConfigError("active_classes is empty");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

bool EarlyStopping::observe(std::size_t epoch, double score) {
  if (!best_epoch_ || score > best_) {
    best_ = score;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

bool EarlyStopping::should_stop(std::size_t epoch) const {
  return best_epoch_ && epoch >= *best_epoch_ + patience_;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j = {{"epoch", r.epoch},     {"loss", r.loss},       {"lr", r.lr},
                              {"val_wa", r.val_wa}, {"val_uwa", r.val_uwa}, {"elapsed_s", r.elapsed_s}};
  return j.dump();
}

corpus::LabelHistogram histogram(std::span<const model::PreparedDialogue> dialogues) {
  corpus::LabelHistogram h{};
  for (const auto& d : dialogues)
    for (std::size_t i = 0; i < d.gold.size(); ++i)
      if (d.labeled[i]) ++h[corpus::code(d.gold[i])];
  return h;
}

double accumulate_dialogue_gradient(model::ModelParams& params, const model::PreparedDialogue& dialogue,
                                    const embed::FeatureStore& store, const ClassWeights& weights, Rng& dropout_rng) {
  nk::Graph g;
  model::BoundModel m = model::bind(g, params);
  model::DialogueForward f = model::forward(m, dialogue, store, nk::Mode::Train, dropout_rng);
  std::vector<std::size_t> gold;
  gold.reserve(dialogue.gold.size());
  for (auto l : dialogue.gold) gold.push_back(corpus::code(l));
  // std::vector<bool> is bit-packed, so copy into a plain array for the span.
  const std::size_t n = dialogue.labeled.size();
  auto scored = std::make_unique<bool[]>(n);
  for (std::size_t i = 0; i < n; ++i) scored[i] = dialogue.labeled[i];
  Var loss = weighted_cross_entropy(probabilities(f.logits), gold, weights, std::span<const bool>(scored.get(), n));
  g.backward(loss);
  return loss.value()[0];
}

TrainResult train_loop(model::ModelParams initial, std::span<const model::PreparedDialogue> train,
                       std::span<const model::PreparedDialogue> validation, const embed::FeatureStore& store,
                       const TrainConfig& cfg, const ClassWeights& weights,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ConfigError("train split is empty");
  if (validation.empty()) throw ConfigError("validation split is empty");

  TrainResult result;
  result.best = initial;
  model::ModelParams params = std::move(initial);

  std::vector<Parameter*> all = params.parameters();
  std::vector<Parameter*> trainable;
  for (Parameter* p : all)
    if (!(cfg.freeze_embeddings && p == &params.embedding)) trainable.push_back(p);
  AdamState adam = AdamState::for_params(trainable);

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  EarlyStopping stopper(cfg.patience);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    try {
      for (std::size_t idx : order) {
        for (Parameter* p : all) p->zero_grad();
        double loss = accumulate_dialogue_gradient(params, train[idx], store, weights, dropout_rng);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss on dialogue " + train[idx].id);
        for (double& v : params.embedding.grad().row(embed::Vocabulary::kPad)) v = 0.0;
        if (cfg.clip_norm > 0.0) clip_global_norm(trainable, cfg.clip_norm);
        adam_update(trainable, adam, lr, cfg.adam);
        total += loss;
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence = std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")";
      log::error("training diverged: " + result.divergence);
      break;
    }

    eval::EvalReport report = eval::evaluate(params, validation, store, cfg.active_classes);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = total / static_cast<double>(train.size());
    rec.lr = lr;
    rec.val_wa = report.wa;
    rec.val_uwa = report.uwa;
    if (cfg.record_timing)
      rec.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec, params);

    if (stopper.observe(epoch, cfg.stop_metric == StopMetric::WA ? report.wa : report.uwa)) {
      result.best = params;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop(epoch)) break;
  }
  return result;
}

}  // namespace cad::train
