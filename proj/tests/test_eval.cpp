// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "cad/errors.hpp"
#include "cad/eval.hpp"
#include "cad/rng.hpp"
#include "doctest.h"

using namespace cad;
using namespace cad::eval;
using corpus::EmotionLabel;

namespace {

// Independent path: straight iteration over the prediction list.
struct DirectMetrics {
  double wa;
  double uwa;
};
DirectMetrics direct_metrics(const std::vector<EmotionLabel>& pred, const std::vector<EmotionLabel>& gold,
                             const ActiveSet& active) {
  std::size_t correct_active = 0, total_active = 0;
  double acc_sum = 0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (!active[c]) continue;
    std::size_t n = 0, ok = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
      if (corpus::code(gold[i]) == c) {
        ++n;
        if (pred[i] == gold[i]) ++ok;
      }
    if (n == 0) continue;
    correct_active += ok;
    total_active += n;
    acc_sum += static_cast<double>(ok) / static_cast<double>(n);
    ++classes;
  }
  return {static_cast<double>(correct_active) / static_cast<double>(total_active),
          acc_sum / static_cast<double>(classes)};
}

}  // namespace

TEST_CASE("weighted accuracy formula") {
  std::vector<double> acc = {0.8, 0.4}, support = {75, 25};
  CHECK(weighted_accuracy(acc, support) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(unweighted_accuracy(std::vector<double>{0.37}) == 0.37);
  CHECK_THROWS_AS(weighted_accuracy(acc, std::vector<double>{0, 0}), DataError);
}

TEST_CASE("published per-class accuracies reproduce the published WA and UWA") {
  std::vector<double> friends = {75.14, 83.88, 65.88, 72.67}, friends_test = {1287, 304, 85, 161};
  CHECK(std::abs(weighted_accuracy(friends, friends_test) - 75.94) <= 0.05);
  CHECK(std::abs(unweighted_accuracy(friends) - 74.39) <= 0.01);
  std::vector<double> push = {87.62, 83.84, 73.56, 75.68};
  CHECK(std::abs(unweighted_accuracy(push) - 80.18) <= 0.01);
}

TEST_CASE("confusion matrix basics") {
  std::vector<EmotionLabel> labels = {EmotionLabel::Joy, EmotionLabel::Anger, EmotionLabel::Joy};
  auto diag = build_confusion(labels, labels);
  CHECK(diag.at(EmotionLabel::Joy, EmotionLabel::Joy) == 2);
  CHECK(diag.at(EmotionLabel::Anger, EmotionLabel::Anger) == 1);
  CHECK(diag.total() == 3);

  std::vector<EmotionLabel> gold = {EmotionLabel::Joy}, pred = {EmotionLabel::Neutral};
  auto one = build_confusion(pred, gold);
  CHECK(one.at(EmotionLabel::Joy, EmotionLabel::Neutral) == 1);
  CHECK(one.total() == 1);

  CHECK_THROWS_AS(build_confusion(labels, gold), ContractError);
}

TEST_CASE("all-correct predictions give WA = UWA = 1") {
  std::vector<EmotionLabel> gold = {EmotionLabel::Neutral, EmotionLabel::Joy, EmotionLabel::Fear, EmotionLabel::Anger};
  auto r = make_report(build_confusion(gold, gold), default_active_classes());
  CHECK(r.wa == 1.0);
  CHECK(r.uwa == 1.0);
  CHECK(r.evaluated == 3);  // fear is inactive
  CHECK_FALSE(r.per_class[corpus::code(EmotionLabel::Sadness)].accuracy.has_value());
}

TEST_CASE("single active class: UWA equals its accuracy") {
  ActiveSet only_joy{};
  only_joy[corpus::code(EmotionLabel::Joy)] = true;
  std::vector<EmotionLabel> gold = {EmotionLabel::Joy, EmotionLabel::Joy, EmotionLabel::Joy, EmotionLabel::Neutral};
  std::vector<EmotionLabel> pred = {EmotionLabel::Joy, EmotionLabel::Anger, EmotionLabel::Joy, EmotionLabel::Neutral};
  auto r = make_report(build_confusion(pred, gold), only_joy);
  CHECK(r.uwa == doctest::Approx(2.0 / 3.0));
  CHECK(r.wa == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("no active gold label is an evaluation error") {
  std::vector<EmotionLabel> gold = {EmotionLabel::Fear};
  CHECK_THROWS_AS(make_report(build_confusion(gold, gold), default_active_classes()), DataError);
}

TEST_CASE("property: matrix path equals direct iteration; WA equals active accuracy; UWA permutation-invariant") {
  cad::Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng() % 100;
    std::vector<EmotionLabel> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = corpus::label_from_code(rng() % kNumLabels);
      pred[i] = rng() % 3 == 0 ? gold[i] : corpus::label_from_code(rng() % kNumLabels);
    }
    gold[0] = EmotionLabel::Neutral;  // at least one active gold label
    const ActiveSet active = default_active_classes();

    auto m = build_confusion(pred, gold);
    // Brute-force tally.
    for (std::size_t g = 0; g < kNumLabels; ++g)
      for (std::size_t p = 0; p < kNumLabels; ++p) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i)
          if (corpus::code(gold[i]) == g && corpus::code(pred[i]) == p) ++count;
        CHECK(m.counts()[g][p] == count);
      }
    CHECK(m.total() == n);

    auto r = make_report(m, active);
    auto direct = direct_metrics(pred, gold, active);
    CHECK(r.wa == doctest::Approx(direct.wa).epsilon(1e-12));
    CHECK(r.uwa == doctest::Approx(direct.uwa).epsilon(1e-12));
    CHECK(r.wa >= 0.0);
    CHECK(r.wa <= 1.0);
    double p_total = 0;
    for (std::size_t c = 0; c < kNumLabels; ++c)
      if (active[c]) p_total += r.per_class[c].proportion;
    CHECK(p_total == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> accs;
    for (std::size_t c = 0; c < kNumLabels; ++c)
      if (active[c] && r.per_class[c].accuracy) accs.push_back(*r.per_class[c].accuracy);
    double base = unweighted_accuracy(accs);
    for (int k = 0; k < 5; ++k) {
      cad::shuffle(accs.begin(), accs.end(), rng);
      CHECK(unweighted_accuracy(accs) == doctest::Approx(base).epsilon(1e-15));
    }
  }
}

TEST_CASE("paired t-test") {
  SUBCASE("constant shift is degenerate with p = 0") {
    std::vector<double> b(10), a(10);
    for (std::size_t i = 0; i < 10; ++i) {
      b[i] = 0.05 * static_cast<double>(i);
      a[i] = b[i] + 0.1;
    }
    auto r = paired_t_test(a, b);
    CHECK(std::isinf(r.t));
    CHECK(r.t > 0);
    CHECK(r.p == 0.0);
  }
  SUBCASE("symmetric cancellation") {
    std::vector<double> a = {1, -1, 1, -1}, b = {0, 0, 0, 0};
    auto r = paired_t_test(a, b);
    CHECK(r.t == 0.0);
    CHECK(r.p == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("textbook case against an independent t distribution") {
    std::vector<double> d = {0.02, 0.05, 0.01, 0.03, 0.04}, zero(5, 0.0);
    auto r = paired_t_test(d, zero);
    double mean = 0.03;
    double sd = std::sqrt((0.0001 + 0.0004 + 0.0004 + 0.0 + 0.0001) / 4.0);
    double t_oracle = mean / (sd / std::sqrt(5.0));
    boost::math::students_t dist(4.0);
    double p_oracle = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t_oracle)));
    CHECK(std::abs(r.t - t_oracle) < 1e-6);
    CHECK(std::abs(r.p - p_oracle) < 1e-6);
    CHECK(r.df == 4);
  }
  SUBCASE("errors") {
    std::vector<double> a = {0.5, 0.6}, one = {0.1};
    CHECK_THROWS_AS(paired_t_test(a, a), ContractError);
    CHECK_THROWS_AS(paired_t_test(one, one), ContractError);
    CHECK_THROWS_AS(paired_t_test(a, one), ContractError);
  }
}

TEST_CASE("property: t tail probability matches boost over a grid") {
  for (double df : {1.0, 2.0, 3.0, 4.0, 7.0, 19.0, 50.0, 199.0}) {
    boost::math::students_t dist(df);
    for (double t : {0.0, 0.1, 0.5, 1.0, 1.96, 2.5, 4.0, 8.0, 25.0}) {
      double oracle = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
      CHECK(std::abs(student_t_two_sided(t, df) - oracle) < 1e-8);
      CHECK(std::abs(student_t_two_sided(-t, df) - oracle) < 1e-8);
    }
  }
}

TEST_CASE("report rendering") {
  std::vector<EmotionLabel> gold = {EmotionLabel::Neutral, EmotionLabel::Neutral, EmotionLabel::Joy,
                                    EmotionLabel::Surprise};
  std::vector<EmotionLabel> pred = {EmotionLabel::Neutral, EmotionLabel::Joy, EmotionLabel::Joy, EmotionLabel::Joy};
  auto r = make_report(build_confusion(pred, gold), default_active_classes());
  auto j = to_json(r);
  CHECK(j["wa"].get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK(j["uwa"].get<double>() == doctest::Approx(0.75));
  CHECK(j["per_class"]["neutral"]["support"] == 2);
  CHECK(j["per_class"]["sadness"]["accuracy"].is_null());
  CHECK(j["confusion"].size() == 8);
  CHECK(j["confusion"][5][1] == 1);
  std::string text = render_text(r);
  CHECK(text.find("WA 66.67") != std::string::npos);
  CHECK(text.find("UWA 75.00") != std::string::npos);
  CHECK(text.find("Neu: 50.00") != std::string::npos);
}

TEST_CASE("active class parsing") {
  CHECK(parse_active_classes("neutral, joy,sadness,anger") == default_active_classes());
  CHECK(format_active_classes(default_active_classes()) == "neutral,joy,sadness,anger");
  CHECK_THROWS_AS(parse_active_classes(""), ConfigError);
  CHECK_THROWS_AS(parse_active_classes("joy,glee"), ConfigError);
}
