#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <random>

#include "gpsm/simulation.hpp"

using gpsm::Dataset;
using gpsm::Index;
using gpsm::ReplicateEstimate;

namespace {

gpsm::SimulationDesign large(gpsm::SimulationDesign d, Index per_arm) {
  d.mode = gpsm::SizeMode::ExpectedSize;
  d.arm_sizes.assign(d.levels(), per_arm);
  return d;
}

}  // namespace

TEST_CASE("built-in designs") {
  const auto d1 = gpsm::design1();
  const auto d2 = gpsm::design2();
  CHECK(d1.levels() == 3);
  CHECK(d1.total_size() == 1500);
  CHECK(d2.levels() == 6);
  CHECK(d2.total_size() == 6000);
  CHECK(d1.noise_sd == 1.0);
  const Dataset x = gpsm::generate(d2, 4);
  CHECK(x.arm_counts() == std::vector<Index>(6, 1000));
  CHECK(gpsm::builtin_design("design2").beta == d2.beta);
  CHECK_THROWS_AS(gpsm::builtin_design("design3"), gpsm::Error);
}

TEST_CASE("design JSON round-trip") {
  auto d = gpsm::design2();
  d.mode = gpsm::SizeMode::ExpectedSize;
  const auto back = gpsm::design_from_json(gpsm::design_to_json(d));
  CHECK(back.beta == d.beta);
  CHECK(back.gamma == d.gamma);
  CHECK(back.arm_sizes == d.arm_sizes);
  CHECK(back.mode == d.mode);
  CHECK_THROWS_AS(gpsm::design_from_json(R"({"beta": [[0]]})"), gpsm::Error);
}

TEST_CASE("covariate law") {
  const Dataset d = gpsm::generate(large(gpsm::design1(), 33334), 1);
  const Eigen::MatrixXd x = d.covariates().middleCols(1, 3);
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  Eigen::Matrix3d expected;
  expected << 2, 1, -1, 1, 1, -0.5, -1, -0.5, 1;
  CHECK((cov - expected).cwiseAbs().maxCoeff() < 0.05);
  CHECK((gpsm::normal_block_covariance() - expected).cwiseAbs().maxCoeff() == 0.0);
  const auto x4 = d.covariates().col(4);
  CHECK(x4.minCoeff() >= -3.0);
  CHECK(x4.maxCoeff() <= 3.0);
  CHECK(d.covariates().col(5).minCoeff() >= 0.0);
  for (Index i = 0; i < d.size(); ++i) {
    const double b = d.covariates()(i, 6);
    CHECK((b == 0.0 || b == 1.0));
  }
}

TEST_CASE("generation is deterministic") {
  const Dataset a = gpsm::generate(gpsm::design1(), 42);
  const Dataset b = gpsm::generate(gpsm::design1(), 42);
  const Dataset c = gpsm::generate(gpsm::design1(), 43);
  CHECK(a.covariates() == b.covariates());
  CHECK(a.outcome() == b.outcome());
  CHECK(a.treatment() == b.treatment());
  CHECK(a.outcome() != c.outcome());
}

TEST_CASE("superpopulation truths vanish in Design I") {
  const auto t = gpsm::true_effects(gpsm::design1(), gpsm::Truth::Superpopulation);
  CHECK(t.tau.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(gpsm::default_truth(gpsm::design1()) == gpsm::Truth::SampledPopulation);
}

TEST_CASE("sampled-population truths agree with a large simulated sample") {
  // Arm-conditional covariate means from one large unrestricted draw, mixed
  // with the design's arm shares.
  const auto design = gpsm::design1();
  const Dataset d = gpsm::generate(large(design, 400000), 8);
  const auto truth = gpsm::true_effects(design, gpsm::Truth::SampledPopulation);
  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(3, 7);
  Eigen::MatrixXd cond2 = Eigen::MatrixXd::Zero(3, 7);
  std::vector<double> count(3, 0.0);
  for (Index i = 0; i < d.size(); ++i) {
    const int w = d.treatment()[i] - 1;
    cond.row(w) += d.covariates().row(i);
    cond2.row(w) += d.covariates().row(i).array().square().matrix();
    count[w] += 1.0;
  }
  Eigen::VectorXd mix = Eigen::VectorXd::Zero(7);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(7);
  for (int w = 0; w < 3; ++w) {
    const Eigen::RowVectorXd m = cond.row(w) / count[w];
    const Eigen::RowVectorXd v = cond2.row(w) / count[w] - m.array().square().matrix();
    mix += m.transpose() / 3.0;
    var += v.transpose() / (9.0 * count[w]);
  }
  for (Index k = 1; k < 7; ++k) {
    CHECK(std::abs(truth.covariate_mean[k] - mix[k]) < 4.0 * std::sqrt(var[k]) + 1e-4);
  }
}

TEST_CASE("quadrature has converged") {
  const auto a = gpsm::conditional_means(gpsm::design2(), 16);
  const auto b = gpsm::conditional_means(gpsm::design2(), 20);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("score summaries") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SUBCASE("single replicate") {
    const std::vector<ReplicateEstimate> r{{1.5, 1.0, 2.0}};
    const auto s = gpsm::score_summary(r, 2.0);
    CHECK(s.bias == doctest::Approx(-0.5));
    CHECK(s.rmse == doctest::Approx(0.5));
  }
  SUBCASE("oracle estimator") {
    const std::vector<ReplicateEstimate> r(5, {3.0, 3.0, 3.0});
    const auto s = gpsm::score_summary(r, 3.0);
    CHECK(s.bias == 0.0);
    CHECK(s.rmse == 0.0);
    CHECK(s.coverage == 1.0);
  }
  SUBCASE("arithmetic") {
    const std::vector<ReplicateEstimate> r{{1.0, 0.0, 4.0}, {3.0, 5.0, 6.0}};
    const auto s = gpsm::score_summary(r, 2.0);
    CHECK(s.bias == doctest::Approx(0.0));
    CHECK(s.rmse == doctest::Approx(1.0));
    CHECK(s.coverage == doctest::Approx(0.5));
    CHECK(s.rmse * s.rmse == doctest::Approx(s.bias * s.bias + s.variance));
  }
  SUBCASE("order does not matter") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal(0.3, 1.0);
    std::vector<ReplicateEstimate> r;
    for (int i = 0; i < 50; ++i) {
      const double t = normal(rng);
      r.push_back({t, t - 1.0, t + 1.0});
    }
    const auto a = gpsm::score_summary(r, 0.0);
    std::reverse(r.begin(), r.end());
    const auto b = gpsm::score_summary(r, 0.0);
    CHECK(a.bias == doctest::Approx(b.bias).epsilon(1e-14));
    CHECK(a.rmse == doctest::Approx(b.rmse).epsilon(1e-14));
    CHECK(a.coverage == b.coverage);
    CHECK(a.rmse * a.rmse == doctest::Approx(a.bias * a.bias + a.variance).epsilon(1e-12));
  }
  SUBCASE("missing intervals") {
    const std::vector<ReplicateEstimate> r{{1.0, nan, nan}};
    CHECK(std::isnan(gpsm::score_summary(r, 1.0).coverage));
  }
}

TEST_CASE("Monte Carlo runner") {
  gpsm::MonteCarloOptions opts;
  opts.methods = {gpsm::Method::DIF, gpsm::Method::GPSM, gpsm::Method::PPSM};
  opts.reps = 6;
  opts.seed = 3;
  opts.inference.bootstrap.reps = 100;
  const auto a = gpsm::run_monte_carlo(gpsm::design1(), opts);
  opts.workers = 3;
  const auto b = gpsm::run_monte_carlo(gpsm::design1(), opts);
  CHECK(gpsm::summary_to_csv(a) == gpsm::summary_to_csv(b));
  CHECK(gpsm::summary_to_json(a) == gpsm::summary_to_json(b));
  REQUIRE(a.methods.size() == 3);
  for (const auto& m : a.methods) {
    CHECK(m.failed == 0);
    CHECK(m.contrasts.size() == 3);
    for (const auto& c : m.contrasts) CHECK(c.replicates == 6);
  }
  const auto j = nlohmann::json::parse(gpsm::summary_to_json(a));
  CHECK(j["methods"].size() == 3);
}
