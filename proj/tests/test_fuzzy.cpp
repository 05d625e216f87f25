#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gantrust/fuzzy.hpp"

using namespace gantrust;

namespace {

double exact(double v) { return v; }  // readability marker for frozen values

AttributePair pair_of(double x1, double x2) { return AttributePair{x1, x2}; }

}  // namespace

TEST_CASE("membership degrees at hand-computed points") {
  auto t0 = membership_degrees(0.0, 0.8);
  CHECK(t0.low.upper == exact(1.0));
  CHECK(t0.low.lower == exact(0.8));
  CHECK(t0.medium.upper == exact(0.0));
  CHECK(t0.high.upper == exact(0.0));

  auto t3 = membership_degrees(0.3, 0.8);
  CHECK(t3.low.upper == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t3.low.lower == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(t3.medium.upper == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t3.high.upper == exact(0.0));

  auto t05 = membership_degrees(0.05, 0.8);
  CHECK(t05.medium.upper == exact(0.0));
  CHECK(t05.medium.lower == exact(0.0));

  auto t95 = membership_degrees(0.95, 0.8);
  CHECK(t95.high.upper == exact(1.0));
  CHECK(t95.high.lower == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(t95.low.upper == exact(0.0));

  auto mid = membership_degrees(0.5, 0.8);
  CHECK(mid.medium.upper == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mid.low.upper == exact(0.0));
  CHECK(mid.high.upper == exact(0.0));

  CHECK_THROWS_AS(membership_degrees(-0.01, 0.8), DomainError);
  CHECK_THROWS_AS(membership_degrees(1.01, 0.8), DomainError);
  CHECK_THROWS_AS(membership_degrees(0.5, 1.5), DomainError);
  CHECK_THROWS_AS(membership_degrees(std::nan(""), 0.8), DomainError);
}

TEST_CASE("trust inference at rule corners is exact") {
  FuzzyConfig cfg;
  CHECK(infer_trust(pair_of(0.0, 0.0), cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(infer_trust(pair_of(1.0, 1.0), cfg) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(infer_trust(pair_of(0.5, 0.5), cfg) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(infer_trust(pair_of(1.0, 0.0), cfg) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(infer_trust(pair_of(0.0, 1.0), cfg) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("trust inference at blended points") {
  FuzzyConfig cfg;
  // loss 0.2 fires low 0.75 / medium 0.25; delay 0 fires low only
  CHECK(infer_trust(pair_of(0.2, 0.0), cfg) == doctest::Approx(0.925).epsilon(1e-9));
  CHECK(infer_trust(pair_of(0.3, 0.0), cfg) == doctest::Approx(0.85).epsilon(1e-9));
  CHECK(infer_trust(pair_of(0.2, 0.2), cfg) == doctest::Approx(0.89375).epsilon(1e-9));
  CHECK(infer_trust(pair_of(0.0, 0.3), cfg) == doctest::Approx(0.95).epsilon(1e-9));
}

TEST_CASE("uniform lower scaling cancels out of the blend") {
  std::vector<double> xs = {0.0, 0.07, 0.18, 0.33, 0.5, 0.61, 0.84, 0.97, 1.0};
  for (double x1 : xs) {
    for (double x2 : xs) {
      FuzzyConfig a{0.5, 0.5, 0.8};
      FuzzyConfig b{0.5, 0.5, 0.3};
      FuzzyConfig c{0.5, 0.5, 1.0};
      FuzzyConfig z{0.5, 0.5, 0.0};  // lower firings vanish, fallback path
      const double va = infer_trust(pair_of(x1, x2), a);
      CHECK(infer_trust(pair_of(x1, x2), b) == doctest::Approx(va).epsilon(1e-12));
      CHECK(infer_trust(pair_of(x1, x2), c) == doctest::Approx(va).epsilon(1e-12));
      CHECK(infer_trust(pair_of(x1, x2), z) == doctest::Approx(va).epsilon(1e-12));
    }
  }
}

TEST_CASE("inference stays inside the fired consequent range") {
  const double consequents[3][3] = {
      {1.0, 0.9, 0.7}, {0.7, 0.5, 0.3}, {0.3, 0.1, 0.0}};
  FuzzyConfig cfg;
  for (int gi = 0; gi <= 100; ++gi) {
    for (int gj = 0; gj <= 100; ++gj) {
      const double x1 = gi / 100.0;
      const double x2 = gj / 100.0;
      const auto m1 = membership_degrees(x1, cfg.lower_scale);
      const auto m2 = membership_degrees(x2, cfg.lower_scale);
      const MembershipPair a1[3] = {m1.low, m1.medium, m1.high};
      const MembershipPair a2[3] = {m2.low, m2.medium, m2.high};
      double lo = 1.0, hi = 0.0;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (a1[i].upper * a2[j].upper > 0.0) {
            lo = std::min(lo, consequents[i][j]);
            hi = std::max(hi, consequents[i][j]);
          }
        }
      }
      const double v = infer_trust(pair_of(x1, x2), cfg);
      REQUIRE(v >= lo - 1e-12);
      REQUIRE(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("inference is continuous away from set breakpoints") {
  FuzzyConfig cfg;
  std::vector<double> xs = {0.05, 0.2, 0.35, 0.45, 0.55, 0.7, 0.85, 0.95};
  for (double x1 : xs) {
    for (double x2 : xs) {
      const double v = infer_trust(pair_of(x1, x2), cfg);
      const double vp = infer_trust(pair_of(x1 + 1e-9, x2 + 1e-9), cfg);
      const double vm = infer_trust(pair_of(x1 - 1e-9, x2 - 1e-9), cfg);
      CHECK(std::fabs(vp - v) < 1e-6);
      CHECK(std::fabs(vm - v) < 1e-6);
    }
  }
}

TEST_CASE("evidence log caps its length by discarding the oldest entries") {
  EvidenceLog log(5);
  CHECK(log.max_len() == 5);
  for (int i = 0; i < 7; ++i) log.append(i % 2 == 0, false, i == 6);
  CHECK(log.size() == 5);
  // entries 2..6 survive
  CHECK(log.drop(0) == true);    // i = 2
  CHECK(log.drop(1) == false);   // i = 3
  CHECK(log.tamper(4) == true);  // i = 6
  log.clear();
  CHECK(log.size() == 0);
  CHECK_THROWS_AS(EvidenceLog(0), DomainError);
}

TEST_CASE("attribute pairs count drop-or-tamper once per slot") {
  EvidenceLog log(40);
  // 10 observations: drops at 2 and 5, tamper at 7, delay at 4
  for (int i = 0; i < 10; ++i)
    log.append(i == 2 || i == 5, i == 4, i == 7);
  auto pairs = compute_attribute_pairs(log, 10);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].loss_rate == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(pairs[0].delay_rate == doctest::Approx(0.1).epsilon(1e-12));

  EvidenceLog both(10);
  both.append(false, false, false);
  both.append(true, false, true);  // drop and tamper on the same slot
  both.append(false, false, false);
  both.append(false, false, false);
  auto p2 = compute_attribute_pairs(both, 4);
  REQUIRE(p2.size() == 1);
  CHECK(p2[0].loss_rate == doctest::Approx(0.25).epsilon(1e-12));

  EvidenceLog sliding(40);
  for (int i = 0; i < 12; ++i) sliding.append(i == 0, false, false);
  auto p3 = compute_attribute_pairs(sliding, 10);
  REQUIRE(p3.size() == 3);
  CHECK(p3[0].loss_rate == doctest::Approx(0.1).epsilon(1e-12));  // oldest window
  CHECK(p3[1].loss_rate == exact(0.0));
  CHECK(p3[2].loss_rate == exact(0.0));

  EvidenceLog tiny(40);
  tiny.append(false, false, false);
  CHECK_THROWS_AS(compute_attribute_pairs(tiny, 10), EvidenceError);
  CHECK_THROWS_AS(compute_attribute_pairs(tiny, 0), DomainError);
}

TEST_CASE("trust series covers the latest windows oldest-first") {
  FuzzyConfig cfg;
  EvidenceLog log(40);
  // 10 clean observations, then 9 drops: window s sees s drops
  for (int i = 0; i < 10; ++i) log.append(false, false, false);
  for (int i = 0; i < 9; ++i) log.append(true, false, false);
  auto series = evaluate_trust_series(log, 10, 10, cfg);
  REQUIRE(series.size() == 10);
  const double want[10] = {1.0, 1.0, 0.925, 0.85, 0.775, 0.7, 0.6, 0.5, 0.4, 0.3};
  for (int k = 0; k < 10; ++k)
    CHECK(series[k] == doctest::Approx(want[k]).epsilon(1e-9));

  EvidenceLog clean(40);
  for (int i = 0; i < 19; ++i) clean.append(false, false, false);
  for (double v : evaluate_trust_series(clean, 10, 10, cfg))
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  EvidenceLog eighteen(40);
  for (int i = 0; i < 18; ++i) eighteen.append(false, false, false);
  CHECK_THROWS_AS(evaluate_trust_series(eighteen, 10, 10, cfg), EvidenceError);
}
