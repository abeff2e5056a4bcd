#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gpsm/dataset.hpp"
#include "gpsm/gps_model.hpp"

namespace testing {

using gpsm::Index;

// Random dataset with continuous covariates, every arm non-empty.
inline gpsm::Dataset random_dataset(std::mt19937_64& rng, Index n, Index k, int levels,
                                    bool intercept = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, k + (intercept ? 1 : 0));
  for (Index i = 0; i < n; ++i) {
    Index c = 0;
    if (intercept) x(i, c++) = 1.0;
    for (Index j = 0; j < k; ++j) x(i, c++) = normal(rng);
  }
  std::vector<int> w(n);
  std::uniform_int_distribution<int> arm(1, levels);
  for (Index i = 0; i < n; ++i) w[i] = i < levels ? static_cast<int>(i) + 1 : arm(rng);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y[i] = x.row(i).sum() + w[i] + normal(rng);
  std::vector<std::string> names;
  for (Index j = 0; j < x.cols(); ++j) {
    names.push_back(intercept && j == 0 ? "(intercept)" : "x" + std::to_string(j));
  }
  return gpsm::Dataset(std::move(x), std::move(w), std::move(y), std::move(names), levels,
                       intercept);
}

// Random rows on the simplex; with `grid` the values are multiples of 1/grid
// so that distance ties are common.
inline gpsm::ScoreMatrix random_scores(std::mt19937_64& rng, Index n, int levels,
                                       int grid = 0) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::uniform_int_distribution<int> tick(1, grid > 0 ? grid : 1);
  gpsm::ScoreMatrix s{Eigen::MatrixXd(n, levels)};
  for (Index i = 0; i < n; ++i) {
    for (int w = 0; w < levels; ++w) {
      s.values(i, w) = grid > 0 ? static_cast<double>(tick(rng)) / grid : unit(rng);
    }
    if (grid == 0) s.values.row(i) /= s.values.row(i).sum();
  }
  return s;
}

// Nearest donor in arm `level` by exhaustive scan. A unit in the arm whose own
// distance is minimal keeps itself; otherwise the smallest index wins.
inline std::vector<Index> brute_force_match(const Eigen::MatrixXd& query,
                                            const Eigen::MatrixXd& donors,
                                            const std::vector<int>& treatment, int level) {
  const Index n = query.rows();
  std::vector<Index> out(n, -1);
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (Index j = 0; j < n; ++j) {
      if (treatment[j] != level) continue;
      double d2 = 0.0;
      for (Index c = 0; c < query.cols(); ++c) {
        const double diff = query(i, c) - donors(j, c);
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        arg = j;
      }
    }
    if (treatment[i] == level) {
      double self = 0.0;
      for (Index c = 0; c < query.cols(); ++c) {
        const double diff = query(i, c) - donors(i, c);
        self += diff * diff;
      }
      if (self == best) arg = i;
    }
    out[i] = arg;
  }
  return out;
}

inline std::vector<Index> brute_scalar(const std::vector<double>& q,
                                       const std::vector<double>& v,
                                       const std::vector<int>& t, int level) {
  std::vector<Index> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (t[j] == level && std::abs(q[i] - v[j]) < best) {
        best = std::abs(q[i] - v[j]);
        arg = static_cast<Index>(j);
      }
    }
    if (t[i] == level && std::abs(q[i] - v[i]) == best) arg = static_cast<Index>(i);
    out[i] = arg;
  }
  return out;
}

inline Eigen::MatrixXd brute_mahalanobis_rows(const gpsm::Dataset& d) {
  // Whitening by V^{-1/2} from an eigendecomposition rather than a Cholesky
  // factor; Euclidean distances are the same quadratic form.
  const Eigen::MatrixXd x = d.covariates_without_intercept();
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd v = c.transpose() * c / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
  return x * eig.operatorInverseSqrt();
}

// Plain IRLS for P(W = 1 | x) = 1 / (1 + exp(-x'b)).
inline Eigen::VectorXd binary_logit(const Eigen::MatrixXd& x, const std::vector<int>& w) {
  const Index n = x.rows();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd target(n);
  for (Index i = 0; i < n; ++i) target[i] = w[i] == 1 ? 1.0 : 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = x * b;
    Eigen::VectorXd p(n), wt(n), z(n);
    for (Index i = 0; i < n; ++i) {
      p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      wt[i] = p[i] * (1.0 - p[i]);
      z[i] = eta[i] + (target[i] - p[i]) / wt[i];
    }
    const Eigen::MatrixXd xtw = x.transpose() * wt.asDiagonal();
    const Eigen::VectorXd next = (xtw * x).ldlt().solve(xtw * z);
    const double step = (next - b).cwiseAbs().maxCoeff();
    b = next;
    if (step < 1e-14) break;
  }
  return b;
}

inline gpsm::Dataset intercept_only(const std::vector<Index>& counts) {
  std::vector<int> w;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    for (Index i = 0; i < counts[a]; ++i) w.push_back(static_cast<int>(a) + 1);
  }
  const Index n = static_cast<Index>(w.size());
  return gpsm::Dataset(Eigen::MatrixXd::Ones(n, 1), w, Eigen::VectorXd::Zero(n),
                       {"(intercept)"}, static_cast<int>(counts.size()), true);
}

inline gpsm::Dataset fixture20() {
  // Fixed 20-unit binary data with an intercept and two covariates.
  const double x1[] = {-1.2, 0.3, 0.8, -0.5, 1.9, -2.1, 0.0, 0.6, 1.1, -0.9,
                       0.4, -1.6, 2.3, -0.2, 0.9, -0.7, 1.4, -1.1, 0.2, 0.7};
  const double x2[] = {0.5, -1.0, 1.5, 0.2, -0.3, 0.9, -1.4, 0.1, 0.6, -0.8,
                       1.2, -0.1, 0.3, 1.7, -0.6, 0.4, -1.9, 1.0, -0.2, 0.8};
  const int w[] = {2, 1, 1, 2, 1, 2, 2, 1, 1, 2, 1, 2, 1, 1, 2, 2, 1, 2, 1, 1};
  Eigen::MatrixXd x(20, 3);
  std::vector<int> t(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = x1[i];
    x(i, 2) = x2[i];
    t[i] = w[i];
  }
  return gpsm::Dataset(x, t, Eigen::VectorXd::Zero(20), {"(intercept)", "x1", "x2"}, 2, true);
}

// Largest candidate c among the g values whose retained set {g <= c}
// satisfies c <= 2 * mean(retained g).
inline double exhaustive_lambda(const std::vector<double>& g) {
  double best = -1.0;
  for (double c : g) {
    double sum = 0.0;
    int count = 0;
    for (double v : g) {
      if (v <= c) {
        sum += v;
        ++count;
      }
    }
    if (c <= 2.0 * sum / count) best = std::max(best, c);
  }
  return best;
}

}  // namespace testing
