#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpsm/dataset.hpp"
#include "gpsm/estimators.hpp"
#include "gpsm/gps_model.hpp"
#include "gpsm/inference.hpp"

namespace gpsm {

/// How arm sizes are realized. Quota draws (X, W) pairs and keeps a draw only
/// while its arm is below target, so every arm ends at exactly N_w units.
/// ExpectedSize draws sum(N_w) units and lets the arm sizes vary.
enum class SizeMode { Quota, ExpectedSize };

/// Covariates are always X = (1, X1..X6) with (X1, X2, X3) multivariate
/// normal, X4 ~ U[-3, 3], X5 ~ chi-squared(1) and X6 ~ Bernoulli(0.5).
/// Assignment is softmax(X beta_w) and Y(w) = X gamma_w + noise_sd * eta.
struct SimulationDesign {
  std::string name = "custom";
  Eigen::MatrixXd beta;   // T x 7
  Eigen::MatrixXd gamma;  // T x 7
  double noise_sd = 1.0;
  std::vector<Index> arm_sizes;  // N_w targets
  SizeMode mode = SizeMode::Quota;

  int levels() const noexcept { return static_cast<int>(beta.rows()); }
  Index total_size() const;
};

inline constexpr int kSimCovariates = 7;

/// Three arms of 500.
SimulationDesign design1();
/// Six arms of 1000.
SimulationDesign design2();
/// "design1", "design2", or throws a config error.
SimulationDesign builtin_design(const std::string& name);

/// {name, beta, gamma, noise_sd, arm_sizes, mode}; mode is "quota" or
/// "expected-size". beta, gamma and arm_sizes are required; noise_sd
/// defaults to 1 and mode to quota.
SimulationDesign design_from_json(const std::string& json);
std::string design_to_json(const SimulationDesign& d);
void validate(const SimulationDesign& d);

/// Covariance of the zero-mean (X1, X2, X3) block.
Eigen::Matrix3d normal_block_covariance();

/// One draw of the design. The result carries a flagged intercept column
/// followed by X1..X6, and the units are shuffled before return.
Dataset generate(const SimulationDesign& design, std::uint64_t seed);

/// p(w|X_i) under the design's beta.
ScoreMatrix true_scores(const SimulationDesign& design, const Dataset& d);

/// E[X] under the covariate law: (1, 0, 0, 0, 0, 1, 0.5).
Eigen::VectorXd superpopulation_mean();

/// E[X | W = w] for every level (T x 7), by tensor Gauss quadrature over
/// the normal block, X4, the normal behind X5, and an exact sum over X6.
Eigen::MatrixXd conditional_means(const SimulationDesign& design, int points = 20);

enum class Truth { Superpopulation, SampledPopulation };
std::string to_string(Truth t);

/// tau(w, w') = m' (gamma_w' - gamma_w) for a covariate mean m.
struct TrueEffects {
  Truth kind = Truth::Superpopulation;
  Eigen::VectorXd covariate_mean;
  Eigen::MatrixXd tau;  // T x T, tau(w-1, w'-1)

  double operator()(int w, int w_prime) const { return tau(w - 1, w_prime - 1); }
};

/// Superpopulation uses E[X]. SampledPopulation uses the mixture of the
/// X | W = w laws weighted by the arm targets, which is the population a
/// quota draw represents.
TrueEffects true_effects(const SimulationDesign& design, Truth kind, int points = 20);
/// SampledPopulation in quota mode, Superpopulation otherwise.
Truth default_truth(const SimulationDesign& design);

struct ReplicateEstimate {
  double tau_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ContrastScore {
  int w = 0;
  int w_prime = 0;
  double truth = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double variance = 0.0;  // divisor R
  double coverage = 0.0;  // NaN when no interval was produced
  int replicates = 0;
};

/// bias = mean(tau_hat) - truth, rmse = sqrt(mean((tau_hat - truth)^2)),
/// coverage = share of intervals with ci_lo <= truth <= ci_hi.
ContrastScore score_summary(std::span<const ReplicateEstimate> estimates, double truth);

struct MethodSummary {
  Method method = Method::DIF;
  CiMethod ci_method = CiMethod::MatchingVariance;
  int failed = 0;
  bool unreliable = false;  // more than 5% of replicates failed
  std::vector<ContrastScore> contrasts;
  std::vector<std::string> failure_messages;  // distinct, first few
};

struct MonteCarloOptions {
  std::vector<Method> methods = all_methods();
  int reps = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  InferenceOptions inference;  // bootstrap.seed is replaced per replicate
  Truth truth = Truth::SampledPopulation;
  bool truth_from_mode = true;  // use default_truth(design)
  int quadrature_points = 20;
};

struct MonteCarloSummary {
  std::string design;
  int reps = 0;
  std::uint64_t seed = 0;
  TrueEffects truth;
  std::vector<MethodSummary> methods;
};

/// Generates, fits and estimates R independent replicates. Replicate r
/// draws its data from the stream (seed, r) and its bootstrap from a seed
/// derived from the same pair, so results do not depend on `workers`.
MonteCarloSummary run_monte_carlo(const SimulationDesign& design,
                                  const MonteCarloOptions& opts);

/// Rows = methods; per contrast the triple bias, rmse, coverage.
std::string summary_to_csv(const MonteCarloSummary& s);
/// One row per (method, contrast).
std::string summary_to_long_csv(const MonteCarloSummary& s);
std::string summary_to_json(const MonteCarloSummary& s);

}  // namespace gpsm
