#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpsm/dataset.hpp"
#include "gpsm/error.hpp"

namespace gpsm {

/// N x T matrix of generalized propensity scores, entry (i, w-1) = p(w|X_i).
struct ScoreMatrix {
  Eigen::MatrixXd values;

  Index size() const noexcept { return values.rows(); }
  int levels() const noexcept { return static_cast<int>(values.cols()); }
  double operator()(Index i, int w) const { return values(i, w - 1); }
  /// Column p(w|X) for level w (1-based).
  auto column(int w) const { return values.col(w - 1); }
};

struct FitOptions {
  int max_iter = 100;
  double tol = 1e-8;
  double ridge = 0.0;
};

/// Multinomial logit for p(w|x) with level T as reference (beta_T = 0, not
/// stored). Coefficients refer to the design matrix used for fitting, which
/// always carries an intercept in column 0.
struct GpsModel {
  Eigen::MatrixXd coefficients;  // (T-1) x K
  std::vector<std::string> covariate_names;
  bool intercept_added = false;  // fit prepended the intercept column
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;  // max-norm of the score at the returned fit
  std::vector<std::string> warnings;

  int levels() const noexcept { return static_cast<int>(coefficients.rows()) + 1; }
  Index covariate_count() const noexcept { return coefficients.cols(); }
};

/// Fit failure carrying the last iterate.
class FitError : public Error {
 public:
  FitError(const std::string& message, Eigen::MatrixXd last, double grad)
      : Error(ErrorKind::Numerical, "gps_model", message),
        last_coefficients(std::move(last)),
        gradient_norm(grad) {}
  Eigen::MatrixXd last_coefficients;
  double gradient_norm;
};

class SeparationError : public FitError {
 public:
  using FitError::FitError;
};

/// Maximum-likelihood fit by Newton-Raphson with step halving. `start`, when
/// non-empty, must be (T-1) x K and is used as the initial iterate.
GpsModel fit_multinomial_logit(const Dataset& d, const FitOptions& opts = {},
                               const Eigen::MatrixXd& start = {});

/// Softmax over (X beta_1, ..., X beta_{T-1}, 0) with max subtraction.
ScoreMatrix predict_scores(const GpsModel& m, const Dataset& d);

/// Same softmax for an explicit linear-predictor coefficient matrix over
/// all T levels (T x K, reference row included) and a design matrix.
ScoreMatrix softmax_scores(const Eigen::MatrixXd& design,
                           const Eigen::MatrixXd& beta_all_levels);

/// Penalized log-likelihood and its gradient (same shape as coefficients)
/// for a given design matrix. Exposed for diagnostics and tests.
struct LogLikGradient {
  double value;
  Eigen::MatrixXd gradient;
};
LogLikGradient multinomial_loglik(const Eigen::MatrixXd& design,
                                  const std::vector<int>& treatment,
                                  const Eigen::MatrixXd& coefficients,
                                  double ridge = 0.0);

/// Design matrix the model expects for this dataset (intercept ensured).
Eigen::MatrixXd design_matrix(const Dataset& d);

std::string model_to_json(const GpsModel& m);
GpsModel model_from_json(const std::string& json);

}  // namespace gpsm
