#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gpsm/dataset.hpp"
#include "gpsm/gps_model.hpp"
#include "gpsm/matching.hpp"

namespace gpsm {

enum class Method { DIF, PPSM, PSSM, W, COV, GPSM, GPSS };
enum class Population { FullSample, TrimmedSample, PairwiseSubpopulation };

std::string to_string(Method m);
std::string to_string(Population p);
Method method_from_string(const std::string& s);
/// The seven methods in the order they are reported.
const std::vector<Method>& all_methods();
/// True for every method whose contrasts are differences of per-arm means.
bool is_per_arm_mean(Method m);

/// All pairs (w, w') with w < w', ordered (1,2), (1,3), ..., (T-1,T).
std::vector<std::pair<int, int>> contrast_pairs(int levels);

struct EffectEstimate {
  int w = 0;
  int w_prime = 0;
  double tau_hat = 0.0;  // estimate of E[Y(w') - Y(w)]
  Method method = Method::DIF;
  Population population = Population::FullSample;
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  Index n_used = 0;
};

/// N x T imputed potential outcomes with their matching provenance.
struct ImputedOutcomes {
  Eigen::MatrixXd values;
  MatchMetric metric = MatchMetric::ScalarGps;
  std::vector<MatchColumn> matches;  // one per level, element w-1
  /// Closest other unit in the same arm on the matching variable (-1 for a
  /// singleton arm); drives the conditional-variance estimate.
  std::vector<Index> own_arm_neighbor;
};

struct ImputeSpec {
  MatchMetric metric = MatchMetric::ScalarGps;
  const ScoreMatrix* scores = nullptr;  // ScalarGps / ScoreVector
  Eigen::MatrixXd v;                    // Mahalanobis; empty = sample covariance
};

ImputedOutcomes impute_matrix(const Dataset& d, const ImputeSpec& spec);

struct WeightingOptions {
  bool clip = false;
  double floor = 1e-6;
  bool horvitz_thompson = false;
};

struct EstimatorOptions {
  FitOptions fit;  // PPSM pairwise fits
  int subclasses = 5;
  WeightingOptions weighting;
  Population population = Population::FullSample;
};

/// All pairwise effects of one method on one dataset.
struct EstimateSet {
  Method method = Method::DIF;
  Population population = Population::FullSample;
  int levels = 0;
  std::vector<double> arm_means;  // E^[Y(w)], empty for PPSM
  std::vector<EffectEstimate> effects;
  std::optional<ImputedOutcomes> imputed;  // COV, PSSM, GPSM

  /// tau^(w, w'); antisymmetric, zero on the diagonal.
  double tau(int w, int w_prime) const;
  EffectEstimate& effect(int w, int w_prime);
  const EffectEstimate& effect(int w, int w_prime) const;
};

EstimateSet estimate_dif(const Dataset& d, const EstimatorOptions& opts = {});
EstimateSet estimate_cov(const Dataset& d, const EstimatorOptions& opts = {});
EstimateSet estimate_gpsm(const Dataset& d, const ScoreMatrix& s,
                          const EstimatorOptions& opts = {});
EstimateSet estimate_pssm(const Dataset& d, const ScoreMatrix& s,
                          const EstimatorOptions& opts = {});
EstimateSet estimate_weighting(const Dataset& d, const ScoreMatrix& s,
                               const EstimatorOptions& opts = {});
EstimateSet estimate_gpss(const Dataset& d, const ScoreMatrix& s,
                          const EstimatorOptions& opts = {});

/// Pairwise binary propensity-score matching for one pair. The restricted
/// sample re-encodes w as level 1 and w' as level 2.
struct PairwiseEstimate {
  EffectEstimate effect;
  Dataset restricted;
  ScoreMatrix scores;  // binary scores on the restricted sample
  ImputedOutcomes imputed;
};
PairwiseEstimate estimate_ppsm(const Dataset& d, std::pair<int, int> pair,
                               const EstimatorOptions& opts = {});
EstimateSet estimate_ppsm_all(const Dataset& d, const EstimatorOptions& opts = {});

/// Dispatch by tag. `s` is ignored by DIF, COV and PPSM.
EstimateSet estimate(Method m, const Dataset& d, const ScoreMatrix& s,
                     const EstimatorOptions& opts = {});

/// Per-arm max of the Hajek weights normalized to average 1 within the arm
/// (i.e. summing to N_w).
std::vector<double> max_normalized_weights(const Dataset& d, const ScoreMatrix& s);

/// Sample quantile with linear interpolation between order statistics
/// (R type 7). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double prob);

}  // namespace gpsm
