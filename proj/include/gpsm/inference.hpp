#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpsm/dataset.hpp"
#include "gpsm/estimators.hpp"
#include "gpsm/gps_model.hpp"

namespace gpsm {

enum class CiMethod { BootstrapPercentile, MatchingVariance };
std::string to_string(CiMethod m);

struct CiSpec {
  CiMethod method = CiMethod::BootstrapPercentile;
  double level = 0.95;
  int reps = 1000;
  std::uint64_t seed = 1;
};

struct ContrastInterval {
  int w = 0;
  int w_prime = 0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct BootstrapOptions {
  EstimatorOptions estimator;
  FitOptions fit;
  /// Starting point for every replicate's GPS refit; usually the
  /// full-sample MLE. Empty starts from zero.
  Eigen::MatrixXd warm_start;
  int workers = 1;
  double max_discard_fraction = 0.05;
};

struct BootstrapResult {
  Method method = Method::DIF;
  std::vector<ContrastInterval> intervals;
  int replicates = 0;  // requested
  int discarded = 0;   // failed fit, vanished level or empty GPSS cell
};

/// Unit-level bootstrap of whole pipelines (resample, refit the GPS,
/// re-estimate) with percentile intervals. All methods share the same
/// resamples. Replicate r draws from its own stream derived from
/// (spec.seed, r).
std::vector<BootstrapResult> bootstrap_ci(const Dataset& d,
                                          std::span<const Method> methods,
                                          const CiSpec& spec,
                                          const BootstrapOptions& opts = {});

/// Matched-sample variance for per-arm-mean matching estimators (COV,
/// PSSM, GPSM) and, via the restricted sample, PPSM:
///
///   V = N^-2 sum_i (Yhat_i(w') - Yhat_i(w) - tau)^2
///     + N^-2 sum_{i: W_i in {w,w'}} (K_i^2 + K_i) sigma_i^2
///
/// with K_i the donor reuse count for the unit's own arm and
/// sigma_i^2 = (Y_i - Y_l(i))^2 / 2 from the closest same-arm unit on the
/// matching variable.
std::vector<ContrastInterval> matching_variance(const Dataset& d,
                                                const ImputedOutcomes& imputed,
                                                double level = 0.95);

/// Two-sided standard-normal critical value z_{1-(1-level)/2}.
double normal_critical_value(double level);

struct InferenceOptions {
  EstimatorOptions estimator;
  FitOptions fit;
  CiSpec bootstrap;  // reps, seed and level for bootstrap intervals
  bool gpsm_bootstrap = false;
  bool intervals = true;
  int workers = 1;
};

/// Interval method the standard recipe assigns to an estimator.
CiMethod default_ci_method(Method m, bool gpsm_bootstrap = false);

/// Point estimates plus intervals for several methods on one dataset. The
/// GPS model `m` produced `s` and seeds bootstrap refits.
struct InferenceResult {
  EstimateSet estimates;
  CiMethod ci_method = CiMethod::MatchingVariance;
  int bootstrap_discarded = 0;
};
std::vector<InferenceResult> estimate_with_inference(const Dataset& d,
                                                     const GpsModel& m,
                                                     const ScoreMatrix& s,
                                                     std::span<const Method> methods,
                                                     const InferenceOptions& opts);

}  // namespace gpsm
