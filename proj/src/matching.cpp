#include "gpsm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gpsm/error.hpp"
#include "gpsm/kdtree.hpp"

namespace gpsm {

namespace {

constexpr const char* kModule = "matching_engine";

void check_pool(std::span<const int> treatment, int level) {
  if (std::find(treatment.begin(), treatment.end(), level) == treatment.end()) {
    throw data_error(kModule, "no donors with treatment level " +
                                  std::to_string(level));
  }
}

}  // namespace

Eigen::MatrixXd mahalanobis_matrix(const Dataset& d) {
  if (d.size() < 2) throw data_error(kModule, "Mahalanobis matrix needs N >= 2");
  const Eigen::MatrixXd x = d.covariates_without_intercept();
  if (x.cols() == 0) throw data_error(kModule, "no covariates besides the intercept");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd v = centered.transpose() * centered / static_cast<double>(d.size());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo <= 1e-10 * hi) {
    throw data_error(kModule,
                     "covariate covariance matrix is singular (constant or "
                     "linearly dependent covariates); prune covariates before "
                     "Mahalanobis matching");
  }
  return v;
}

MatchColumn match_scalar(std::span<const double> query_values,
                         std::span<const double> donor_values,
                         std::span<const int> treatment, int level) {
  const std::size_t n = query_values.size();
  if (donor_values.size() != n || treatment.size() != n) {
    throw data_error(kModule, "query, donor and treatment lengths differ");
  }
  check_pool(treatment, level);

  // Donors grouped into runs of equal value; each run keeps its smallest
  // unit index.
  std::vector<Index> pool;
  for (std::size_t j = 0; j < n; ++j) {
    if (treatment[j] == level) pool.push_back(static_cast<Index>(j));
  }
  std::sort(pool.begin(), pool.end(), [&](Index a, Index b) {
    if (donor_values[a] != donor_values[b]) return donor_values[a] < donor_values[b];
    return a < b;
  });
  std::vector<double> run_value;
  std::vector<Index> run_first;
  for (Index j : pool) {
    if (run_value.empty() || donor_values[j] != run_value.back()) {
      run_value.push_back(donor_values[j]);
      run_first.push_back(j);
    }
  }
  const std::ptrdiff_t runs = static_cast<std::ptrdiff_t>(run_value.size());

  MatchColumn out;
  out.level = level;
  out.donor.resize(n);
  out.distance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = query_values[i];
    const std::ptrdiff_t up =
        std::lower_bound(run_value.begin(), run_value.end(), q) - run_value.begin();
    double best = std::numeric_limits<double>::infinity();
    if (up < runs) best = std::min(best, std::abs(run_value[up] - q));
    if (up > 0) best = std::min(best, std::abs(run_value[up - 1] - q));

    Index winner = std::numeric_limits<Index>::max();
    for (std::ptrdiff_t r = up; r < runs && std::abs(run_value[r] - q) == best; ++r) {
      winner = std::min(winner, run_first[r]);
    }
    for (std::ptrdiff_t r = up - 1; r >= 0 && std::abs(run_value[r] - q) == best; --r) {
      winner = std::min(winner, run_first[r]);
    }
    if (treatment[i] == level && std::abs(donor_values[i] - q) == best) {
      winner = static_cast<Index>(i);
    }
    out.donor[i] = winner;
    out.distance[i] = best;
  }
  return out;
}

MatchColumn match_vector(const Eigen::MatrixXd& query_rows,
                         const Eigen::MatrixXd& donor_rows,
                         std::span<const int> treatment, int level) {
  const Index n = query_rows.rows();
  if (donor_rows.rows() != n || static_cast<Index>(treatment.size()) != n ||
      donor_rows.cols() != query_rows.cols()) {
    throw data_error(kModule, "query, donor and treatment shapes differ");
  }
  check_pool(treatment, level);

  std::vector<Index> labels;
  for (Index j = 0; j < n; ++j) {
    if (treatment[j] == level) labels.push_back(j);
  }
  Eigen::MatrixXd pts(static_cast<Index>(labels.size()), donor_rows.cols());
  for (Index r = 0; r < pts.rows(); ++r) pts.row(r) = donor_rows.row(labels[r]);
  const KdTree tree(std::move(pts), std::move(labels));

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> q =
      query_rows;
  MatchColumn out;
  out.level = level;
  out.donor.resize(n);
  out.distance.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index prefer = treatment[i] == level ? i : -1;
    const auto hit = tree.nearest(q.row(i).data(), -1, prefer);
    out.donor[i] = hit.label;
    out.distance[i] = std::sqrt(hit.distance2);
  }
  return out;
}

Eigen::MatrixXd whiten(const Dataset& d, const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd x = d.covariates_without_intercept();
  if (v.rows() != x.cols() || v.cols() != x.cols()) {
    throw data_error(kModule, "Mahalanobis matrix dimension does not match covariates");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) {
    throw data_error(kModule, "Mahalanobis matrix is not positive definite");
  }
  return llt.matrixL().solve(x.transpose()).transpose();
}

MatchColumn match_covariates(const Dataset& d, const Eigen::MatrixXd& v, int level) {
  const Eigen::MatrixXd z = whiten(d, v);
  return match_vector(z, z, d.treatment(), level);
}

std::vector<Index> nearest_same_arm(const Eigen::MatrixXd& rows,
                                    std::span<const int> treatment, int levels) {
  const Index n = rows.rows();
  std::vector<Index> out(n, -1);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> q = rows;
  for (int w = 1; w <= levels; ++w) {
    std::vector<Index> labels;
    for (Index j = 0; j < n; ++j) {
      if (treatment[j] == w) labels.push_back(j);
    }
    if (labels.size() < 2) continue;
    Eigen::MatrixXd pts(static_cast<Index>(labels.size()), rows.cols());
    for (Index r = 0; r < pts.rows(); ++r) pts.row(r) = rows.row(labels[r]);
    const KdTree tree(std::move(pts), labels);
    for (Index i : labels) out[i] = tree.nearest(q.row(i).data(), i).label;
  }
  return out;
}

std::vector<Index> nearest_same_arm_scalar(const Eigen::MatrixXd& value_by_level,
                                           std::span<const int> treatment,
                                           int levels) {
  const Index n = value_by_level.rows();
  std::vector<Index> out(n, -1);
  for (int w = 1; w <= levels; ++w) {
    std::vector<Index> labels;
    for (Index j = 0; j < n; ++j) {
      if (treatment[j] == w) labels.push_back(j);
    }
    if (labels.size() < 2) continue;
    Eigen::MatrixXd pts(static_cast<Index>(labels.size()), 1);
    for (Index r = 0; r < pts.rows(); ++r) pts(r, 0) = value_by_level(labels[r], w - 1);
    const KdTree tree(std::move(pts), labels);
    for (Index i : labels) {
      const double q = value_by_level(i, w - 1);
      out[i] = tree.nearest(&q, i).label;
    }
  }
  return out;
}

std::vector<Index> donor_reuse_counts(const MatchColumn& column, Index n) {
  std::vector<Index> k(n, 0);
  for (Index j = 0; j < static_cast<Index>(column.donor.size()); ++j) {
    const Index i = column.donor[j];
    if (i != j) ++k[i];
  }
  return k;
}

}  // namespace gpsm
