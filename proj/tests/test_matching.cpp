#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gpsm/error.hpp"
#include "gpsm/matching.hpp"
#include "support.hpp"

using gpsm::Dataset;
using gpsm::Index;

TEST_CASE("scalar matching basics") {
  const std::vector<int> t{2, 1, 2, 1, 1};
  SUBCASE("nearest value") {
    const std::vector<double> v{0.30, 0.10, 0.9, 0.28, 0.50};
    const auto col = gpsm::match_scalar(v, v, t, 1);
    CHECK(col.donor[0] == 3);
  }
  SUBCASE("ties go to the smaller index") {
    const std::vector<int> tt{1, 1, 2, 1, 2};
    const std::vector<double> v{0.5, 0.9, 0.25, 0.1, 0.0};
    const std::vector<double> q{0.125, 0.9, 0.25, 0.1, 0.0};
    const auto col = gpsm::match_scalar(q, v, tt, 2);
    CHECK(col.donor[0] == 2);  // 0.125 is equidistant from 0.25 and 0.0
  }
}

TEST_CASE("Mahalanobis matrix uses divisor N") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 2, 0, 0, 2, 2, 2;
  const Dataset d(x, {1, 2, 1, 2}, Eigen::VectorXd::Zero(4), {"a", "b"}, 2);
  const Eigen::MatrixXd v = gpsm::mahalanobis_matrix(d);
  CHECK((v - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd dup(4, 2);
  dup << 0, 0, 1, 1, 2, 2, 3, 3;
  const Dataset bad(dup, {1, 2, 1, 2}, Eigen::VectorXd::Zero(4), {"a", "b"}, 2);
  CHECK_THROWS_AS(gpsm::mahalanobis_matrix(bad), gpsm::Error);
}

TEST_CASE("identity metric reduces to Euclidean and scalar matching") {
  std::mt19937_64 rng(8);
  const Dataset d = testing::random_dataset(rng, 150, 1, 3);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(1, 1);
  const auto cov = gpsm::match_covariates(d, id, 2);
  std::vector<double> x(d.size());
  for (Index i = 0; i < d.size(); ++i) x[i] = d.covariates()(i, 0);
  const auto sc = gpsm::match_scalar(x, x, d.treatment(), 2);
  CHECK(cov.donor == sc.donor);
  for (Index i = 0; i < d.size(); ++i) {
    CHECK(std::abs(cov.distance[i] - sc.distance[i]) < 1e-10);
    if (d.treatment()[i] == 2) CHECK(cov.donor[i] == i);
  }
}

TEST_CASE("vector matching exact hit and T=2 reduction") {
  std::mt19937_64 rng(4);
  const auto s = testing::random_scores(rng, 100, 2);
  std::vector<int> t(100);
  for (int i = 0; i < 100; ++i) t[i] = 1 + i % 2;
  const Eigen::MatrixXd rows = s.values.leftCols(1);
  const auto vec = gpsm::match_vector(rows, rows, t, 2);
  std::vector<double> p(s.values.col(0).data(), s.values.col(0).data() + 100);
  const auto sc = gpsm::match_scalar(p, p, t, 2);
  CHECK(vec.donor == sc.donor);

  Eigen::MatrixXd q = rows;
  q.row(0) = rows.row(7);  // unit 7 is in arm 2
  const auto hit = gpsm::match_vector(q, rows, t, 2);
  CHECK(hit.donor[0] == 7);
  CHECK(hit.distance[0] == 0.0);
}

TEST_CASE("all three matchers equal brute force") {
  std::mt19937_64 rng(2718);
  const int levels_choice[] = {2, 3, 6};
  for (int inst = 0; inst < 50; ++inst) {
    const int levels = levels_choice[inst % 3];
    std::uniform_int_distribution<Index> size(levels * 3, 500);
    const Index n = size(rng);
    const int grid = inst % 2 == 0 ? 16 : 0;
    const Dataset d = testing::random_dataset(rng, n, 1 + inst % 6, levels);
    const auto s = testing::random_scores(rng, n, levels, grid);
    const auto& t = d.treatment();
    CAPTURE(inst);
    for (int w = 1; w <= levels; ++w) {
      std::vector<double> p(n);
      for (Index i = 0; i < n; ++i) p[i] = s(i, w);
      CHECK(gpsm::match_scalar(p, p, t, w).donor == testing::brute_scalar(p, p, t, w));

      const Eigen::MatrixXd rows = s.values.leftCols(levels - 1);
      CHECK(gpsm::match_vector(rows, rows, t, w).donor ==
            testing::brute_force_match(rows, rows, t, w));

      const Eigen::MatrixXd z = testing::brute_mahalanobis_rows(d);
      CHECK(gpsm::match_covariates(d, gpsm::mahalanobis_matrix(d), w).donor ==
            testing::brute_force_match(z, z, t, w));
    }
  }
}
