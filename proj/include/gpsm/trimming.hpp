#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpsm/dataset.hpp"
#include "gpsm/gps_model.hpp"

namespace gpsm {

/// g_i = sum_w 1 / p(w|X_i).
std::vector<double> inverse_score_sums(const ScoreMatrix& s);

/// Largest observed g such that g <= 2 * mean{g_j : g_j <= g}. The smallest
/// g is always feasible, so the result is one of the inputs.
double find_lambda(std::span<const double> g);

struct TrimResult {
  double lambda = 0.0;
  std::vector<double> g;
  UnitMask mask;
  std::vector<Index> dropped_per_arm;
  bool refit = false;
  Dataset trimmed;
  /// Scores on the trimmed sample: re-estimated when `refit`, otherwise
  /// the original rows.
  ScoreMatrix scores;
  std::optional<GpsModel> model;  // set when refit

  Index dropped() const;
};

/// Computes g, finds lambda, drops units with g > lambda and optionally
/// re-fits the GPS on what remains. Fails when an arm is eliminated.
TrimResult trim(const Dataset& d, const ScoreMatrix& s, bool refit = true,
                const FitOptions& fit = {});

/// {lambda, n_dropped, dropped_per_arm, g_summary{min,q25,median,q75,max}}.
std::string trim_result_to_json(const TrimResult& r);
/// One row per unit: unit (1-based), g, retained (0/1).
std::string mask_to_csv(const TrimResult& r);

}  // namespace gpsm
