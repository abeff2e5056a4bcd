#include <doctest.h>

#include <cmath>
#include <random>

#include "gpsm/estimators.hpp"
#include "gpsm/inference.hpp"
#include "gpsm/simulation.hpp"
#include "support.hpp"

using gpsm::Dataset;
using gpsm::EstimateSet;
using gpsm::Index;
using gpsm::Method;
using gpsm::ScoreMatrix;

namespace {

Dataset from_rows(const std::vector<std::vector<double>>& x, const std::vector<int>& w,
                  const std::vector<double>& y, int levels) {
  const Index n = static_cast<Index>(x.size());
  const Index k = static_cast<Index>(x[0].size());
  Eigen::MatrixXd m(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) m(i, j) = x[i][j];
  }
  std::vector<std::string> names;
  for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset(m, w, Eigen::Map<const Eigen::VectorXd>(y.data(), n), names, levels);
}

ScoreMatrix scores(const std::vector<std::vector<double>>& rows) {
  ScoreMatrix s{Eigen::MatrixXd(rows.size(), rows[0].size())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[0].size(); ++j) s.values(i, j) = rows[i][j];
  }
  return s;
}

// Six units, three arms, dyadic scores so every distance is exact.
const std::vector<std::vector<double>> kSixScores{
    {0.75, 0.125, 0.125}, {0.25, 0.5, 0.25},    {0.5, 0.25, 0.25},
    {0.125, 0.625, 0.25}, {0.375, 0.125, 0.5}, {0.0625, 0.1875, 0.75}};
const std::vector<int> kSixArms{1, 1, 2, 2, 3, 3};
const std::vector<double> kSixY{1, 2, 3, 4, 5, 6};

Dataset six_units() {
  std::vector<std::vector<double>> x;
  for (int i = 0; i < 6; ++i) x.push_back({static_cast<double>(i)});
  return from_rows(x, kSixArms, kSixY, 3);
}

double cycle(const EstimateSet& e, int a, int b, int c) {
  auto tau = [&](int w, int wp) { return w < wp ? e.tau(w, wp) : -e.tau(wp, w); };
  return tau(a, b) + tau(b, c) + tau(c, a);
}

}  // namespace

TEST_CASE("difference in means") {
  const Dataset d = from_rows({{0}, {0}, {0}, {0}, {0}, {0}}, {1, 2, 3, 1, 2, 3},
                              {0.5, 3.0, 2.0, 1.5, 4.0, 2.0}, 3);
  const EstimateSet e = gpsm::estimate_dif(d);
  CHECK(e.tau(1, 2) == doctest::Approx(2.5));
  CHECK(e.tau(2, 3) == doctest::Approx(-1.5));
  CHECK(e.tau(1, 3) == doctest::Approx(1.0));

  const Dataset flat = d.with_outcome(Eigen::VectorXd::Constant(6, 7.0));
  for (const auto& eff : gpsm::estimate_dif(flat).effects) CHECK(eff.tau_hat == 0.0);
}

TEST_CASE("covariate matching by hand") {
  // x = (0, 1, 3, 4), arms (1, 2, 1, 2). Nearest opposite-arm partners are
  // 0->1, 1->0, 2->3, 3->2, so Y(1) = (1, 1, 2, 2) and Y(2) = (5, 5, 8, 8).
  const Dataset d = from_rows({{0}, {1}, {3}, {4}}, {1, 2, 1, 2}, {1, 5, 2, 8}, 2);
  const EstimateSet e = gpsm::estimate_cov(d);
  CHECK(e.arm_means[0] == doctest::Approx(1.5));
  CHECK(e.arm_means[1] == doctest::Approx(6.5));
  CHECK(e.tau(1, 2) == doctest::Approx(5.0));
}

TEST_CASE("covariate matching with exact duplicates recovers the gap") {
  std::vector<std::vector<double>> x;
  std::vector<int> w;
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    const double a = 0.37 * i, b = std::sin(i);
    x.push_back({a, b});
    x.push_back({a, b});
    w.push_back(1);
    w.push_back(2);
    y.push_back(a);
    y.push_back(a + 3.0);
  }
  CHECK(gpsm::estimate_cov(from_rows(x, w, y, 2)).tau(1, 2) == doctest::Approx(3.0));
}

TEST_CASE("GPS matching by hand") {
  const EstimateSet e = gpsm::estimate_gpsm(six_units(), scores(kSixScores));
  CHECK(e.arm_means[0] == doctest::Approx(10.0 / 6));
  CHECK(e.arm_means[1] == doctest::Approx(20.0 / 6));
  CHECK(e.arm_means[2] == doctest::Approx(31.0 / 6));
  CHECK(e.tau(1, 2) == doctest::Approx(10.0 / 6));
  CHECK(e.tau(1, 3) == doctest::Approx(3.5));
  CHECK(e.tau(2, 3) == doctest::Approx(11.0 / 6));
}

TEST_CASE("score-set matching equals a brute-force imputation") {
  const Dataset d = six_units();
  const ScoreMatrix s = scores(kSixScores);
  const EstimateSet e = gpsm::estimate_pssm(d, s);
  const Eigen::MatrixXd rows = s.values.leftCols(2);
  for (int w = 1; w <= 3; ++w) {
    const auto donor = testing::brute_force_match(rows, rows, kSixArms, w);
    double mean = 0.0;
    for (int i = 0; i < 6; ++i) mean += kSixY[donor[i]] / 6.0;
    CHECK(e.arm_means[w - 1] == doctest::Approx(mean));
  }
}

TEST_CASE("with two levels GPS and score-set matching agree") {
  std::mt19937_64 rng(31);
  const Dataset d = testing::random_dataset(rng, 200, 2, 2);
  const auto s = testing::random_scores(rng, 200, 2);
  const auto a = gpsm::estimate_gpsm(d, s);
  const auto b = gpsm::estimate_pssm(d, s);
  for (int w = 0; w < 2; ++w) CHECK(a.imputed->matches[w].donor == b.imputed->matches[w].donor);
  CHECK(a.tau(1, 2) == b.tau(1, 2));
}

TEST_CASE("imputed outcome matrix") {
  std::mt19937_64 rng(12);
  const Dataset d = testing::random_dataset(rng, 120, 2, 3);
  const auto s = testing::random_scores(rng, 120, 3);
  gpsm::ImputeSpec spec;
  spec.scores = &s;
  const auto imp = gpsm::impute_matrix(d, spec);
  for (Index i = 0; i < d.size(); ++i) {
    CHECK(imp.values(i, d.treatment()[i] - 1) == d.outcome()[i]);
  }
  for (int w = 1; w <= 3; ++w) {
    std::vector<double> p(d.size());
    for (Index i = 0; i < d.size(); ++i) p[i] = s(i, w);
    const auto col = gpsm::match_scalar(p, p, d.treatment(), w);
    for (Index i = 0; i < d.size(); ++i) {
      CHECK(imp.values(i, w - 1) == d.outcome()[col.donor[i]]);
    }
  }
}

TEST_CASE("Hajek weighting") {
  const Dataset d = from_rows({{0}, {0}, {0}, {0}, {0}}, {1, 1, 1, 2, 2}, {1, 2, 2, 4, 6}, 2);
  const ScoreMatrix s = scores({{0.5, 0.5}, {0.25, 0.75}, {0.25, 0.75}, {0.5, 0.5}, {0.5, 0.5}});
  const EstimateSet e = gpsm::estimate_weighting(d, s);
  CHECK(e.arm_means[0] == doctest::Approx(1.8));
  CHECK(e.arm_means[1] == doctest::Approx(5.0));

  std::mt19937_64 rng(9);
  const Dataset r = testing::random_dataset(rng, 90, 2, 3);
  ScoreMatrix flat{Eigen::MatrixXd::Constant(90, 3, 1.0 / 3)};
  const EstimateSet hw = gpsm::estimate_weighting(r, flat);
  const EstimateSet dif = gpsm::estimate_dif(r);
  for (const auto& [w, wp] : gpsm::contrast_pairs(3)) {
    CHECK(hw.tau(w, wp) == doctest::Approx(dif.tau(w, wp)).epsilon(1e-12));
  }
}

TEST_CASE("GPS subclassification by hand") {
  // p(1|X) = 0.05, 0.15, ..., 0.95 and two subclasses split at the median.
  std::vector<std::vector<double>> rows, x;
  for (int i = 0; i < 10; ++i) {
    const double p = (i + 0.5) / 10;
    rows.push_back({p, 1 - p});
    x.push_back({p});
  }
  const std::vector<int> w{2, 2, 1, 2, 1, 1, 2, 1, 1, 2};
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) y.push_back(i + 1);
  gpsm::EstimatorOptions opts;
  opts.subclasses = 2;
  const EstimateSet e = gpsm::estimate_gpss(from_rows(x, w, y, 2), scores(rows), opts);
  // arm 1: cells {3,5} and {6,8,9}; arm 2: cells {7,10} and {1,2,4}
  CHECK(e.arm_means[0] == doctest::Approx(35.0 / 6));
  CHECK(e.arm_means[1] == doctest::Approx(65.0 / 12));
  CHECK(e.tau(1, 2) == doctest::Approx(-5.0 / 12));

  const Dataset flat = from_rows(x, w, std::vector<double>(10, 2.5), 2);
  const EstimateSet c = gpsm::estimate_gpss(flat, scores(rows), opts);
  CHECK(c.arm_means[0] == doctest::Approx(2.5));
  CHECK(c.tau(1, 2) == doctest::Approx(0.0));
}

TEST_CASE("GPS subclassification quantiles match a sort-based reference") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 60 + 37 * trial;
    const Dataset d = testing::random_dataset(rng, n, 2, 3);
    const auto s = testing::random_scores(rng, n, 3, trial % 2 == 0 ? 8 : 0);
    gpsm::EstimatorOptions opts;
    opts.subclasses = 1 + trial % 6;
    EstimateSet e;
    try {
      e = gpsm::estimate_gpss(d, s, opts);
    } catch (const gpsm::Error&) {
      continue;  // an empty cell is legitimate on random data
    }
    for (int w = 1; w <= 3; ++w) {
      std::vector<double> sorted(s.column(w).data(), s.column(w).data() + n);
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> q;
      for (int j = 1; j < opts.subclasses; ++j) {
        q.push_back(gpsm::quantile_sorted(sorted, static_cast<double>(j) / opts.subclasses));
      }
      std::vector<double> ysum(opts.subclasses, 0.0);
      std::vector<Index> cls(opts.subclasses, 0), cell(opts.subclasses, 0);
      for (Index i = 0; i < n; ++i) {
        int j = 0;
        while (j < static_cast<int>(q.size()) && s(i, w) > q[j]) ++j;
        ++cls[j];
        if (d.treatment()[i] == w) {
          ++cell[j];
          ysum[j] += d.outcome()[i];
        }
      }
      double mean = 0.0;
      for (int j = 0; j < opts.subclasses; ++j) {
        if (cls[j] > 0) mean += static_cast<double>(cls[j]) / n * ysum[j] / cell[j];
      }
      CHECK(e.arm_means[w - 1] == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(gpsm::quantile_sorted(v, 0.0) == 1);
  CHECK(gpsm::quantile_sorted(v, 1.0) == 4);
  CHECK(gpsm::quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(gpsm::quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("per-arm-mean estimators are transitive") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset d = testing::random_dataset(rng, 300, 3, 4);
    const auto s = testing::random_scores(rng, 300, 4);
    for (Method m : gpsm::all_methods()) {
      if (!gpsm::is_per_arm_mean(m)) continue;
      gpsm::EstimatorOptions opts;
      opts.subclasses = 2;
      const EstimateSet e = gpsm::estimate(m, d, s, opts);
      CHECK(std::abs(cycle(e, 1, 2, 3)) < 1e-12);
      CHECK(std::abs(cycle(e, 2, 4, 3)) < 1e-12);
    }
  }
}

TEST_CASE("pairwise matching under the null and its intransitivity") {
  std::mt19937_64 rng(404);
  Dataset null_data = testing::random_dataset(rng, 2000, 2, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd y(null_data.size());
  for (Index i = 0; i < y.size(); ++i) y[i] = null_data.covariates().row(i).sum() + normal(rng);
  null_data = null_data.with_outcome(y);
  const auto p = gpsm::estimate_ppsm(null_data, {1, 2});
  const auto ci = gpsm::matching_variance(p.restricted, p.imputed);
  REQUIRE(ci.size() == 1);
  CHECK(std::abs(p.effect.tau_hat) < 3 * ci[0].se);

  const Dataset sim = gpsm::generate(gpsm::design1(), 1);
  const EstimateSet e = gpsm::estimate_ppsm_all(sim);
  CHECK(std::abs(cycle(e, 1, 2, 3)) > 0.05);
}

TEST_CASE("max normalized weight") {
  const Dataset d = from_rows({{0}, {0}, {0}, {0}}, {1, 1, 2, 2}, {0, 0, 0, 0}, 2);
  const ScoreMatrix s = scores({{0.5, 0.5}, {0.1, 0.9}, {0.5, 0.5}, {0.5, 0.5}});
  const auto mx = gpsm::max_normalized_weights(d, s);
  // arm 1 weights 2 and 10, mean 6
  CHECK(mx[0] == doctest::Approx(10.0 / 6));
  CHECK(mx[1] == doctest::Approx(1.0));
}
