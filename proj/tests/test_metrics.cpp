#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "chunkcheck/metrics.hpp"

using namespace chunkcheck;

namespace {

// Independent brute-force formulas, coded from the definitions.
struct Oracle {
  static double precision(const ConfusionCounts& c) {
    return c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
  }
  static double recall(const ConfusionCounts& c) {
    return c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
  }
  static double bal_acc(const ConfusionCounts& c) {
    double tpr = c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
    double tnr = c.tn + c.fp == 0 ? 0.0 : double(c.tn) / double(c.tn + c.fp);
    return (tpr + tnr) / 2.0;
  }
  static double mcc(const ConfusionCounts& c) {
    long double a = (long double)(c.tp + c.fp) * (c.tp + c.fn) *
                    (c.tn + c.fp) * (c.tn + c.fn);
    if (a == 0) return 0.0;
    long double num =
        (long double)c.tp * c.tn - (long double)c.fp * c.fn;
    return double(num / sqrtl(a));
  }
  // P(score+ > score-) + 0.5 P(tie), exhaustive over pairs.
  static double auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!y[i]) continue;
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (y[j]) continue;
        ++pairs;
        if (s[i] > s[j])
          wins += 1.0;
        else if (s[i] == s[j])
          wins += 0.5;
      }
    }
    return wins / double(pairs);
  }
};

}  // namespace

TEST_CASE("confusion counting") {
  ConfusionCounts perfect = confusion({1, 0, 1}, {1, 0, 1});
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);

  ConfusionCounts inverted = confusion({0, 1}, {1, 0});
  CHECK(inverted.tp == 0);
  CHECK(inverted.tn == 0);

  ConfusionCounts mixed = confusion({1, 1, 0, 0}, {1, 0, 0, 1});
  CHECK(mixed.tp == 1);
  CHECK(mixed.fp == 1);
  CHECK(mixed.tn == 1);
  CHECK(mixed.fn == 1);

  CHECK_THROWS(confusion({1}, {1, 0}));
  CHECK_THROWS(confusion({}, {}));
}

TEST_CASE("hand-derived metric values") {
  ConfusionCounts c{3, 1, 0, 2};
  auto [p, r] = precision_recall(c);
  CHECK(p == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r == doctest::Approx(0.6).epsilon(1e-15));

  ConfusionCounts none{0, 0, 5, 0};
  CHECK(precision_recall(none).first == 0.0);

  ConfusionCounts ba{3, 1, 4, 2};
  CHECK(balanced_accuracy(ba) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(mcc(ba) == doctest::Approx(10.0 / std::sqrt(600.0)).epsilon(1e-12));

  ConfusionCounts all_pos{5, 5, 0, 0};
  CHECK(balanced_accuracy(all_pos) == doctest::Approx(0.5));
  CHECK(mcc(all_pos) == 0.0);

  ConfusionCounts perfect{4, 0, 6, 0};
  CHECK(mcc(perfect) == doctest::Approx(1.0));
  CHECK(balanced_accuracy(perfect) == doctest::Approx(1.0));
}

TEST_CASE("scalar metrics match brute force on 200 random matrices") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::uint64_t> u(0, 50);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionCounts c{u(rng), u(rng), u(rng), u(rng)};
    if (c.total() == 0) c.tp = 1;
    auto [p, r] = precision_recall(c);
    CHECK(std::abs(p - Oracle::precision(c)) < 1e-12);
    CHECK(std::abs(r - Oracle::recall(c)) < 1e-12);
    CHECK(std::abs(balanced_accuracy(c) - Oracle::bal_acc(c)) < 1e-12);
    CHECK(std::abs(mcc(c) - Oracle::mcc(c)) < 1e-12);
  }
}

TEST_CASE("roc_auc basics") {
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  CHECK(roc_auc({0.9, 0.8, 0.3}, {1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS(roc_auc({0.1, 0.2}, {1, 1}));
}

TEST_CASE("roc_auc matches pairwise oracle with ties, up to n=500") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<std::size_t> nu(2, 500);
    const std::size_t n = nu(rng);
    // quantized scores force plenty of ties
    std::uniform_int_distribution<int> sc(0, 9);
    std::bernoulli_distribution lb(0.5);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = sc(rng) / 10.0;
      y[i] = lb(rng) ? 1 : 0;
      (y[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos) y[0] = 1;
    if (!has_neg) y[n - 1] = 0;
    CHECK(std::abs(roc_auc(s, y) - Oracle::auc(s, y)) < 1e-12);
  }
}

TEST_CASE("metrics invariant under stable reordering") {
  std::vector<double> s = {0.9, 0.1, 0.6, 0.4, 0.8};
  std::vector<int> y = {1, 0, 1, 0, 0};
  double base = roc_auc(s, y);
  std::vector<double> s2 = {0.1, 0.4, 0.6, 0.8, 0.9};
  std::vector<int> y2 = {0, 0, 1, 0, 1};
  CHECK(roc_auc(s2, y2) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("compute_metrics handles a single-class dataset") {
  MetricsReport r = compute_metrics({0.2, 0.9}, {1, 1});
  CHECK_FALSE(r.roc_auc.has_value());
  CHECK(r.recall == doctest::Approx(0.5));
  CHECK(r.to_json().find("\"roc_auc\": null") != std::string::npos);
}

TEST_CASE("roc_curve endpoints") {
  auto curve = roc_curve({0.9, 0.1, 0.7, 0.3}, {1, 0, 1, 0});
  CHECK(curve.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(curve.back() == std::pair<double, double>{1.0, 1.0});
}
