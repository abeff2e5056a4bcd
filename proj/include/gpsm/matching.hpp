#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpsm/dataset.hpp"

namespace gpsm {

enum class MatchMetric {
  ScalarGps,    // |p(w|X_j) - p(w|X_i)|
  ScoreVector,  // Euclidean on (p(1|X), ..., p(T-1|X))
  Mahalanobis,  // covariates under V^-1
};

/// Matches of every query unit to one target level.
///
/// donor[i] is the 0-based index of the unit in the target arm closest to
/// query i. A query unit that is itself in the target arm and sits at the
/// minimum distance is matched to itself; remaining ties go to the smallest
/// donor index. Matching is with replacement.
struct MatchColumn {
  int level = 0;
  std::vector<Index> donor;
  std::vector<double> distance;
};

/// Sample covariance (divisor N) of the covariates, intercept excluded.
/// Throws when N < 2 or the matrix is singular.
Eigen::MatrixXd mahalanobis_matrix(const Dataset& d);

/// Nearest donor among {j : treatment[j] == level} on a scalar value.
/// Query i and donor j are the same unit when i == j.
MatchColumn match_scalar(std::span<const double> query_values,
                         std::span<const double> donor_values,
                         std::span<const int> treatment, int level);

/// Nearest donor in Euclidean distance on row vectors (rows of
/// `query_rows` and `donor_rows` index units).
MatchColumn match_vector(const Eigen::MatrixXd& query_rows,
                         const Eigen::MatrixXd& donor_rows,
                         std::span<const int> treatment, int level);

/// Nearest donor under the Mahalanobis metric (x - x')' V^-1 (x - x'),
/// computed by whitening with the Cholesky factor of V.
MatchColumn match_covariates(const Dataset& d, const Eigen::MatrixXd& v,
                             int level);

/// Covariates (intercept excluded) mapped to L^-1 x with V = L L'.
Eigen::MatrixXd whiten(const Dataset& d, const Eigen::MatrixXd& v);

/// For every unit, the closest *other* unit in its own arm on the given
/// rows (Euclidean), or -1 when the arm has a single unit. Ties go to the
/// smallest index.
std::vector<Index> nearest_same_arm(const Eigen::MatrixXd& rows,
                                    std::span<const int> treatment,
                                    int levels);

/// Scalar version where unit i is compared on values[i][W_i]: the value
/// column depends on the unit's own arm.
std::vector<Index> nearest_same_arm_scalar(const Eigen::MatrixXd& value_by_level,
                                           std::span<const int> treatment,
                                           int levels);

/// Number of times each unit serves as a match for a query unit other than
/// itself: K_i = #{j != i : donor[j] == i}.
std::vector<Index> donor_reuse_counts(const MatchColumn& column, Index n);

}  // namespace gpsm
