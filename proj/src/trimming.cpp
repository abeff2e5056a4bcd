#include "gpsm/trimming.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gpsm/error.hpp"
#include "gpsm/estimators.hpp"

namespace gpsm {

namespace {
constexpr const char* kModule = "trimming";
}

std::vector<double> inverse_score_sums(const ScoreMatrix& s) {
  std::vector<double> g(s.size(), 0.0);
  for (Index i = 0; i < s.size(); ++i) {
    for (int w = 0; w < s.levels(); ++w) g[i] += 1.0 / s.values(i, w);
  }
  return g;
}

double find_lambda(std::span<const double> g) {
  if (g.empty()) throw data_error(kModule, "no units to trim");
  for (double v : g) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw data_error(kModule, "g values must be finite and positive");
    }
  }
  std::vector<double> sorted(g.begin(), g.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  double lambda = sorted[0];
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    sum += sorted[k - 1];
    // Candidates are the ends of runs of equal values.
    if (k < n && sorted[k] == sorted[k - 1]) continue;
    const double candidate = sorted[k - 1];
    if (candidate <= 2.0 * (sum / static_cast<double>(k))) lambda = candidate;
  }
  return lambda;
}

Index TrimResult::dropped() const { return static_cast<Index>(g.size()) - mask.count(); }

TrimResult trim(const Dataset& d, const ScoreMatrix& s, bool refit, const FitOptions& fit) {
  if (s.size() != d.size() || s.levels() != d.levels()) {
    throw data_error(kModule, "score matrix does not match dataset");
  }
  auto g = inverse_score_sums(s);
  const double floor_g = static_cast<double>(d.levels()) * d.levels();
  for (Index i = 0; i < d.size(); ++i) {
    if (!std::isfinite(g[i]) || g[i] < floor_g * (1.0 - 1e-12)) {
      throw data_error(kModule, "unit " + std::to_string(i + 1) +
                                    " has invalid scores (sum of inverse scores " +
                                    std::to_string(g[i]) + ")");
    }
  }
  const double lambda = find_lambda(g);

  UnitMask mask{std::vector<bool>(d.size())};
  for (Index i = 0; i < d.size(); ++i) mask.retained[i] = g[i] <= lambda;
  const auto kept = retained_counts(d, mask);
  const auto total = d.arm_counts();
  std::vector<Index> dropped(d.levels());
  for (int w = 0; w < d.levels(); ++w) dropped[w] = total[w] - kept[w];

  Dataset trimmed = apply_mask(d, mask);
  std::optional<GpsModel> model;
  ScoreMatrix scores;
  if (refit) {
    try {
      model = fit_multinomial_logit(trimmed, fit);
    } catch (const Error& e) {
      throw Error(e.kind(), kModule,
                  std::string("re-fit on the trimmed sample failed (") + e.what() +
                      "); keep the original scores (refit off) or set ridge > 0");
    }
    scores = predict_scores(*model, trimmed);
  } else {
    scores.values.resize(trimmed.size(), d.levels());
    Index r = 0;
    for (Index i = 0; i < d.size(); ++i) {
      if (mask.retained[i]) scores.values.row(r++) = s.values.row(i);
    }
  }
  return TrimResult{lambda,          std::move(g),      std::move(mask),
                    std::move(dropped), refit,           std::move(trimmed),
                    std::move(scores),  std::move(model)};
}

std::string trim_result_to_json(const TrimResult& r) {
  std::vector<double> sorted = r.g;
  std::sort(sorted.begin(), sorted.end());
  nlohmann::ordered_json j;
  j["lambda"] = r.lambda;
  j["n_units"] = r.g.size();
  j["n_dropped"] = r.dropped();
  j["dropped_per_arm"] = r.dropped_per_arm;
  j["refit"] = r.refit;
  j["g_summary"] = {{"min", sorted.front()},
                    {"q25", quantile_sorted(sorted, 0.25)},
                    {"median", quantile_sorted(sorted, 0.5)},
                    {"q75", quantile_sorted(sorted, 0.75)},
                    {"max", sorted.back()}};
  return j.dump(2);
}

std::string mask_to_csv(const TrimResult& r) {
  std::ostringstream out;
  out.precision(17);
  out << "unit,g,retained\n";
  for (std::size_t i = 0; i < r.g.size(); ++i) {
    out << i + 1 << ',' << r.g[i] << ',' << (r.mask.retained[i] ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace gpsm
