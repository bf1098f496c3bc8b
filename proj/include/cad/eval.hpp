// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cad/corpus.hpp"
#include "json.hpp"

namespace cad::model {
struct ModelParams;
struct PreparedDialogue;
}  // namespace cad::model
namespace cad::embed {
class FeatureStore;
}

namespace cad::eval {

using corpus::EmotionLabel;
using corpus::kNumLabels;

/// Classes that carry loss weight and enter the metrics.
using ActiveSet = std::array<bool, kNumLabels>;

/// neutral, joy, sadness, anger.
ActiveSet default_active_classes();
/// Comma-separated label names, e.g. "neutral,joy,sadness,anger".
ActiveSet parse_active_classes(std::string_view csv);
std::string format_active_classes(const ActiveSet& active);

/// Rows are gold labels, columns predictions, over all eight labels.
class ConfusionMatrix {
 public:
  void add(EmotionLabel gold, EmotionLabel predicted) { ++counts_[corpus::code(gold)][corpus::code(predicted)]; }
  std::size_t at(EmotionLabel gold, EmotionLabel predicted) const {
    return counts_[corpus::code(gold)][corpus::code(predicted)];
  }
  std::size_t row_sum(EmotionLabel gold) const;
  std::size_t total() const;
  const auto& counts() const noexcept { return counts_; }

 private:
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts_{};
};

/// Throws ContractError when the sequences differ in length.
ConfusionMatrix build_confusion(std::span<const EmotionLabel> predicted, std::span<const EmotionLabel> gold);

/// WA = sum_c p_c a_c with p_c = support_c / sum(support).
double weighted_accuracy(std::span<const double> accuracy, std::span<const double> support);
/// UWA = mean of the class accuracies.
double unweighted_accuracy(std::span<const double> accuracy);

struct ClassStats {
  std::optional<double> accuracy;  // empty when the class has no support
  std::size_t support = 0;
  double proportion = 0.0;         // share of evaluated (active-gold) utterances
};

struct EvalReport {
  ActiveSet active{};
  std::array<ClassStats, kNumLabels> per_class{};
  double wa = 0.0;
  double uwa = 0.0;
  std::size_t evaluated = 0;  // utterances whose gold label is active
  ConfusionMatrix confusion;  // every utterance, active or not
  std::vector<std::string> dialogue_ids;
  std::vector<double> dialogue_accuracy;  // dialogues with at least one evaluated utterance
};

/// Metrics over active classes with support. Throws DataError when no
/// utterance has an active gold label.
EvalReport make_report(const ConfusionMatrix& confusion, const ActiveSet& active);

/// Runs inference over labeled dialogues and scores the predictions.
EvalReport evaluate(const model::ModelParams& params, std::span<const model::PreparedDialogue> dialogues,
                    const embed::FeatureStore& store, const ActiveSet& active);

nlohmann::json to_json(const EvalReport& report);
/// Table layout: WA, UWA and per-class accuracies as percentages, then the
/// confusion matrix.
std::string render_text(const EvalReport& report);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

/// Paired two-sided t-test on a - b. Zero variance with a nonzero mean gives
/// t = +/-inf and p = 0. Throws ContractError for mismatched or short inputs
/// and for identical systems (all differences zero).
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Two-sided tail probability P(|T| >= |t|) for Student's t.
double student_t_two_sided(double t, double df);
/// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace cad::eval
