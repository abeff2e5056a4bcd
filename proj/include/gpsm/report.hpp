#pragma once

#include <string>
#include <vector>

#include "gpsm/inference.hpp"

namespace gpsm {

/// Columns: method, ci_method, w, w_prime, tau_hat, se, ci_lo, ci_hi,
/// population, n_used. Rows in method order, then contrast order. Missing
/// interval fields print as NA.
std::string estimates_to_csv(const std::vector<InferenceResult>& results);
std::string estimates_to_json(const std::vector<InferenceResult>& results);

}  // namespace gpsm
