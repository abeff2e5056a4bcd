#include <doctest.h>

#include <algorithm>
#include <random>

#include "gpsm/estimators.hpp"
#include "gpsm/simulation.hpp"
#include "gpsm/trimming.hpp"
#include "support.hpp"

using gpsm::Dataset;
using gpsm::Index;

TEST_CASE("worked example") {
  const std::vector<double> g{4, 5, 6, 100};
  CHECK(gpsm::find_lambda(g) == 6.0);

  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const Dataset d(x, {1, 2, 1, 2}, Eigen::VectorXd::Zero(4), {"x"}, 2);
  // 1/p + 1/(1-p) = 1/(p(1-p)); pick p solving that for each target g.
  gpsm::ScoreMatrix s{Eigen::MatrixXd(4, 2)};
  for (int i = 0; i < 4; ++i) {
    const double p = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 / g[i]));
    s.values(i, 0) = p;
    s.values(i, 1) = 1.0 - p;
  }
  const auto r = gpsm::trim(d, s, false);
  CHECK(r.mask.retained == std::vector<bool>{true, true, true, false});
  CHECK(r.dropped() == 1);
}

TEST_CASE("equal g keeps everything") {
  CHECK(gpsm::find_lambda(std::vector<double>(9, 3.0)) == 3.0);
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  const Dataset d(x, {1, 2, 3, 1, 2, 3}, Eigen::VectorXd::Zero(6), {"x"}, 3);
  const gpsm::ScoreMatrix s{Eigen::MatrixXd::Constant(6, 3, 1.0 / 3)};
  CHECK(gpsm::trim(d, s, false).dropped() == 0);
}

TEST_CASE("find_lambda equals an exhaustive scan") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> size(1, 200);
  std::exponential_distribution<double> tail(0.3);
  std::uniform_int_distribution<int> small(2, 9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> g(size(rng));
    for (double& v : g) v = trial % 3 == 0 ? small(rng) : 2.0 + tail(rng) * (1 + trial % 5);
    CAPTURE(trial);
    CHECK(gpsm::find_lambda(g) == testing::exhaustive_lambda(g));
  }
}

TEST_CASE("two levels trim both tails of the score") {
  std::mt19937_64 rng(15);
  const Index n = 400;
  const Dataset d = testing::random_dataset(rng, n, 1, 2);
  gpsm::ScoreMatrix s{Eigen::MatrixXd(n, 2)};
  std::uniform_real_distribution<double> unit(0.001, 0.999);
  for (Index i = 0; i < n; ++i) {
    s.values(i, 0) = unit(rng);
    s.values(i, 1) = 1.0 - s.values(i, 0);
  }
  const auto r = gpsm::trim(d, s, false);
  REQUIRE(r.dropped() > 0);
  double kept_lo = 1.0, kept_hi = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (r.mask.retained[i]) {
      kept_lo = std::min(kept_lo, s(i, 1));
      kept_hi = std::max(kept_hi, s(i, 1));
    }
  }
  // every unit inside the retained range is retained, and the range is symmetric
  for (Index i = 0; i < n; ++i) {
    if (s(i, 1) >= kept_lo && s(i, 1) <= kept_hi) CHECK(r.mask.retained[i]);
  }
  // and the cut is symmetric: g depends on p only through p(1 - p)
  const double cut = kept_lo * (1.0 - kept_lo);
  for (Index i = 0; i < n; ++i) {
    const double pq = s(i, 1) * (1.0 - s(i, 1));
    if (!r.mask.retained[i]) CHECK(pq < std::min(cut, kept_hi * (1.0 - kept_hi)));
  }
}

TEST_CASE("trimming a Design-II draw lowers the max weight") {
  const Dataset d = gpsm::generate(gpsm::design2(), 21);
  const auto fit = gpsm::fit_multinomial_logit(d);
  const auto s = gpsm::predict_scores(fit, d);
  const auto r = gpsm::trim(d, s, false);
  const auto before = gpsm::max_normalized_weights(d, s);
  const auto after = gpsm::max_normalized_weights(r.trimmed, r.scores);
  CHECK(*std::max_element(after.begin(), after.end()) <
        *std::max_element(before.begin(), before.end()));
}

TEST_CASE("a degenerate refit names the remedy") {
  // On this draw trimming removes every unit with X6 = 1, so X6 becomes
  // collinear with the intercept.
  const Dataset d = gpsm::generate(gpsm::design2(), 21);
  const auto s = gpsm::predict_scores(gpsm::fit_multinomial_logit(d), d);
  try {
    gpsm::trim(d, s, true);
    FAIL("expected the refit to fail");
  } catch (const gpsm::Error& e) {
    CHECK(e.module() == "trimming");
    CHECK(std::string(e.what()).find("refit off") != std::string::npos);
  }
  const auto kept = gpsm::trim(d, s, false);
  CHECK(kept.trimmed.covariates().col(6).sum() == 0.0);
}
