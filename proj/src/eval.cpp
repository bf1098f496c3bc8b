// SPDX-License-Identifier: Apache-2.0
#include "cad/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cad/errors.hpp"
#include "cad/model.hpp"

namespace cad::eval {

ActiveSet default_active_classes() {
  ActiveSet a{};
  for (auto l : {EmotionLabel::Neutral, EmotionLabel::Joy, EmotionLabel::Sadness, EmotionLabel::Anger})
    a[corpus::code(l)] = true;
  return a;
}

ActiveSet parse_active_classes(std::string_view csv) {
  ActiveSet a{};
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view item = csv.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      try {
        a[corpus::code(corpus::parse_label(item))] = true;
      } catch (const DataError&) {
        throw ConfigError("unknown class '" + std::string(item) + "' in active_classes");
      }
    }
    start = end + 1;
  }
  bool any = false;
  for (bool b : a) any = any || b;
  if (!any) throw ConfigError("active_classes must name at least one class");
  return a;
}

std::string format_active_classes(const ActiveSet& active) {
  std::string out;
  for (std::size_t c = 0; c < kNumLabels; ++c)
    if (active[c]) {
      if (!out.empty()) out += ",";
      out += corpus::label_name(corpus::label_from_code(c));
    }
  return out;
}

std::size_t ConfusionMatrix::row_sum(EmotionLabel gold) const {
  std::size_t n = 0;
  for (std::size_t v : counts_[corpus::code(gold)]) n += v;
  return n;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts_)
    for (std::size_t v : row) n += v;
  return n;
}

ConfusionMatrix build_confusion(std::span<const EmotionLabel> predicted, std::span<const EmotionLabel> gold) {
  if (predicted.size() != gold.size())
    throw ContractError("build_confusion: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(gold.size()) + " gold labels");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < gold.size(); ++i) m.add(gold[i], predicted[i]);
  return m;
}

double weighted_accuracy(std::span<const double> accuracy, std::span<const double> support) {
  if (accuracy.size() != support.size()) throw ContractError("weighted_accuracy: length mismatch");
  double total = 0.0;
  for (double s : support) total += s;
  if (!(total > 0.0)) throw DataError("weighted_accuracy: empty test set");
  double wa = 0.0;
  for (std::size_t c = 0; c < accuracy.size(); ++c) wa += (support[c] / total) * accuracy[c];
  return wa;
}

double unweighted_accuracy(std::span<const double> accuracy) {
  if (accuracy.empty()) throw DataError("unweighted_accuracy: no classes");
  double s = 0.0;
  for (double a : accuracy) s += a;
  return s / static_cast<double>(accuracy.size());
}

EvalReport make_report(const ConfusionMatrix& confusion, const ActiveSet& active) {
  EvalReport r;
  r.active = active;
  r.confusion = confusion;
  std::vector<double> acc, support;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    auto label = corpus::label_from_code(c);
    auto& stats = r.per_class[c];
    stats.support = confusion.row_sum(label);
    if (stats.support > 0)
      stats.accuracy = static_cast<double>(confusion.at(label, label)) / static_cast<double>(stats.support);
    if (active[c] && stats.support > 0) {
      r.evaluated += stats.support;
      acc.push_back(*stats.accuracy);
      support.push_back(static_cast<double>(stats.support));
    }
  }
  if (r.evaluated == 0) throw DataError("evaluation set has no utterance with an active gold label");
  for (std::size_t c = 0; c < kNumLabels; ++c)
    if (active[c])
      r.per_class[c].proportion = static_cast<double>(r.per_class[c].support) / static_cast<double>(r.evaluated);
  r.wa = weighted_accuracy(acc, support);
  r.uwa = unweighted_accuracy(acc);
  return r;
}

EvalReport evaluate(const model::ModelParams& params, std::span<const model::PreparedDialogue> dialogues,
                    const embed::FeatureStore& store, const ActiveSet& active) {
  ConfusionMatrix confusion;
  std::vector<std::string> ids;
  std::vector<double> per_dialogue;
  for (const auto& d : dialogues) {
    auto preds = model::predict(params, d, store);
    std::size_t seen = 0, correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!d.labeled[i]) continue;
      confusion.add(d.gold[i], preds[i].label);
      if (active[corpus::code(d.gold[i])]) {
        ++seen;
        if (preds[i].label == d.gold[i]) ++correct;
      }
    }
    if (seen > 0) {
      ids.push_back(d.id);
      per_dialogue.push_back(static_cast<double>(correct) / static_cast<double>(seen));
    }
  }
  EvalReport r = make_report(confusion, active);
  r.dialogue_ids = std::move(ids);
  r.dialogue_accuracy = std::move(per_dialogue);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const auto& s = r.per_class[c];
    per_class[std::string(corpus::label_name(corpus::label_from_code(c)))] = {
        {"accuracy", s.accuracy ? nlohmann::json(*s.accuracy) : nlohmann::json(nullptr)},
        {"support", s.support},
        {"active", r.active[c]},
    };
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : r.confusion.counts()) confusion.push_back(row);
  return {
      {"wa", r.wa},
      {"uwa", r.uwa},
      {"evaluated", r.evaluated},
      {"active_classes", format_active_classes(r.active)},
      {"per_class", per_class},
      {"confusion", confusion},
  };
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string render_text(const EvalReport& r) {
  std::ostringstream out;
  out << "WA " << percent(r.wa) << "  UWA " << percent(r.uwa) << "  (n=" << r.evaluated << ")\n";
  out << "Class accuracies:";
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (!r.active[c]) continue;
    const auto& s = r.per_class[c];
    out << "  " << corpus::label_abbrev(corpus::label_from_code(c)) << ": "
        << (s.accuracy ? percent(*s.accuracy) : std::string("n/a"));
  }
  out << "\n\nConfusion (rows gold, columns predicted)\n     ";
  char cell[16];
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::snprintf(cell, sizeof cell, "%6s", std::string(corpus::label_abbrev(corpus::label_from_code(c))).c_str());
    out << cell;
  }
  out << '\n';
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    out << corpus::label_abbrev(corpus::label_from_code(g)) << (r.active[g] ? "* " : "  ");
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      std::snprintf(cell, sizeof cell, "%6zu", r.confusion.counts()[g][p]);
      out << cell;
    }
    out << '\n';
  }
  out << "(* active class)\n";
  return out.str();
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ContractError("t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired t-test: samples differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw ContractError("paired t-test: need at least two pairs");
  std::vector<double> diff(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = a[i] - b[i];
    mean += diff[i];
  }
  mean /= static_cast<double>(n);
  bool all_zero = true;
  for (double d : diff) all_zero = all_zero && d == 0.0;
  if (all_zero) throw ContractError("paired t-test: identical systems (all differences are zero)");

  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.df = n - 1;
  // Relative threshold: constant differences leave only rounding noise in sd.
  if (sd <= 1e-12 * std::abs(mean)) {
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided(r.t, static_cast<double>(r.df));
  return r;
}

}  // namespace cad::eval
