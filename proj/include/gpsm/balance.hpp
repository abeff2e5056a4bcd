#pragma once

#include <span>
#include <string>
#include <vector>

#include "gpsm/dataset.hpp"
#include "gpsm/gps_model.hpp"

namespace gpsm {

/// A normalized difference. `defined` is false when the pooled within-arm
/// SD is zero while the means differ; `value` is then NaN.
struct NormalizedDiff {
  double value = 0.0;
  bool defined = true;
};

/// (mean in arm w - mean outside arm w) / sqrt(average over levels of the
/// within-arm variances), variances with divisor N_w - 1.
NormalizedDiff normalized_diff(std::span<const double> values,
                               const std::vector<int>& treatment, int levels, int w);

/// Covariate k is 0-based over the stored columns (intercept included if
/// flagged).
NormalizedDiff normalized_diff_cov(const Dataset& d, int w, Index k);
/// Applied to the column p(w|X).
NormalizedDiff normalized_diff_gps(const Dataset& d, const ScoreMatrix& s, int w);

struct OverlapHistogram {
  int level = 0;
  std::vector<double> edges;       // bins + 1 equal-width edges on [0, 1]
  std::vector<Index> in_arm;       // units with W = w
  std::vector<Index> out_of_arm;   // units with W != w
};

OverlapHistogram overlap_histogram(const Dataset& d, const ScoreMatrix& s, int w,
                                   int bins = 20);

struct BalanceReport {
  int levels = 0;
  std::vector<std::string> covariates;   // intercept excluded
  std::vector<std::vector<NormalizedDiff>> cov;  // [w-1][k]
  std::vector<NormalizedDiff> gps;               // [w-1]
  std::vector<OverlapHistogram> histograms;      // [w-1]
};

/// Every arm needs at least two units.
BalanceReport balance_report(const Dataset& d, const ScoreMatrix& s, int bins = 20);

std::string balance_to_json(const BalanceReport& r);
/// Flat CSV, one row per metric: metric,level,covariate,bin,value,defined.
std::string balance_to_csv(const BalanceReport& r);

}  // namespace gpsm
