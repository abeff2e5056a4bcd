#include "gpsm/report.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gpsm/format.hpp"

namespace gpsm {

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string estimates_to_csv(const std::vector<InferenceResult>& results) {
  std::ostringstream out;
  out << "method,ci_method,w,w_prime,tau_hat,se,ci_lo,ci_hi,population,n_used\n";
  for (const auto& r : results) {
    for (const auto& e : r.estimates.effects) {
      out << to_string(e.method) << ',' << to_string(r.ci_method) << ',' << e.w << ','
          << e.w_prime << ',' << format_double(e.tau_hat) << ',' << format_double(e.se) << ','
          << format_double(e.ci_lo) << ',' << format_double(e.ci_hi) << ','
          << to_string(e.population) << ',' << e.n_used << '\n';
    }
  }
  return out.str();
}

std::string estimates_to_json(const std::vector<InferenceResult>& results) {
  auto methods = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json m;
    m["method"] = to_string(r.estimates.method);
    m["ci_method"] = to_string(r.ci_method);
    m["population"] = to_string(r.estimates.population);
    if (r.ci_method == CiMethod::BootstrapPercentile) {
      m["bootstrap_discarded"] = r.bootstrap_discarded;
    }
    if (!r.estimates.arm_means.empty()) m["arm_means"] = r.estimates.arm_means;
    auto effects = nlohmann::ordered_json::array();
    for (const auto& e : r.estimates.effects) {
      nlohmann::ordered_json j;
      j["w"] = e.w;
      j["w_prime"] = e.w_prime;
      j["tau_hat"] = e.tau_hat;
      j["se"] = number_or_null(e.se);
      j["ci_lo"] = number_or_null(e.ci_lo);
      j["ci_hi"] = number_or_null(e.ci_hi);
      j["population"] = to_string(e.population);
      j["n_used"] = e.n_used;
      effects.push_back(std::move(j));
    }
    m["effects"] = std::move(effects);
    methods.push_back(std::move(m));
  }
  return methods.dump(2) + "\n";
}

}  // namespace gpsm
