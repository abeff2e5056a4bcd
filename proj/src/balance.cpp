#include "gpsm/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gpsm/error.hpp"
#include "gpsm/format.hpp"

namespace gpsm {

namespace {

constexpr const char* kModule = "balance";

void require_two_per_arm(const std::vector<int>& treatment, int levels) {
  std::vector<Index> counts(levels, 0);
  for (int w : treatment) ++counts[w - 1];
  for (int w = 1; w <= levels; ++w) {
    if (counts[w - 1] < 2) {
      throw data_error(kModule, "treatment level " + std::to_string(w) + " has " +
                                    std::to_string(counts[w - 1]) +
                                    " unit(s); normalized differences need at least 2 per arm");
    }
  }
}

nlohmann::ordered_json nd_json(const NormalizedDiff& nd) {
  nlohmann::ordered_json j;
  j["value"] = nd.defined ? nlohmann::ordered_json(nd.value) : nlohmann::ordered_json(nullptr);
  j["defined"] = nd.defined;
  return j;
}

}  // namespace

NormalizedDiff normalized_diff(std::span<const double> values,
                               const std::vector<int>& treatment, int levels, int w) {
  if (values.size() != treatment.size()) {
    throw config_error(kModule, "value and treatment lengths differ");
  }
  if (w < 1 || w > levels) {
    throw config_error(kModule, "treatment level " + std::to_string(w) + " out of range");
  }
  require_two_per_arm(treatment, levels);

  std::vector<double> sum(levels, 0.0);
  std::vector<Index> count(levels, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[treatment[i] - 1] += values[i];
    ++count[treatment[i] - 1];
  }
  std::vector<double> mean(levels);
  for (int a = 0; a < levels; ++a) mean[a] = sum[a] / static_cast<double>(count[a]);
  std::vector<double> ss(levels, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dev = values[i] - mean[treatment[i] - 1];
    ss[treatment[i] - 1] += dev * dev;
  }
  double pooled = 0.0;
  for (int a = 0; a < levels; ++a) pooled += ss[a] / static_cast<double>(count[a] - 1);
  pooled /= levels;

  double rest_sum = 0.0;
  Index rest_n = 0;
  for (int a = 0; a < levels; ++a) {
    if (a == w - 1) continue;
    rest_sum += sum[a];
    rest_n += count[a];
  }
  const double diff = mean[w - 1] - rest_sum / static_cast<double>(rest_n);
  if (diff == 0.0) return {0.0, true};
  if (!(pooled > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), false};
  return {diff / std::sqrt(pooled), true};
}

NormalizedDiff normalized_diff_cov(const Dataset& d, int w, Index k) {
  if (k < 0 || k >= d.covariate_count()) {
    throw config_error(kModule, "covariate index " + std::to_string(k) + " out of range");
  }
  const Eigen::VectorXd col = d.covariates().col(k);
  return normalized_diff({col.data(), static_cast<std::size_t>(col.size())}, d.treatment(),
                         d.levels(), w);
}

NormalizedDiff normalized_diff_gps(const Dataset& d, const ScoreMatrix& s, int w) {
  if (s.size() != d.size() || s.levels() != d.levels()) {
    throw config_error(kModule, "score matrix does not match the dataset");
  }
  if (w < 1 || w > d.levels()) {
    throw config_error(kModule, "treatment level " + std::to_string(w) + " out of range");
  }
  const Eigen::VectorXd col = s.values.col(w - 1);
  return normalized_diff({col.data(), static_cast<std::size_t>(col.size())}, d.treatment(),
                         d.levels(), w);
}

OverlapHistogram overlap_histogram(const Dataset& d, const ScoreMatrix& s, int w, int bins) {
  if (bins < 2) throw config_error(kModule, "histogram needs at least 2 bins");
  if (s.size() != d.size() || s.levels() != d.levels()) {
    throw config_error(kModule, "score matrix does not match the dataset");
  }
  if (w < 1 || w > d.levels()) {
    throw config_error(kModule, "treatment level " + std::to_string(w) + " out of range");
  }
  OverlapHistogram h;
  h.level = w;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = static_cast<double>(b) / bins;
  h.in_arm.assign(bins, 0);
  h.out_of_arm.assign(bins, 0);
  for (Index i = 0; i < d.size(); ++i) {
    const double p = s(i, w);
    const int b = std::clamp(static_cast<int>(std::floor(p * bins)), 0, bins - 1);
    (d.treatment()[i] == w ? h.in_arm : h.out_of_arm)[b] += 1;
  }
  return h;
}

BalanceReport balance_report(const Dataset& d, const ScoreMatrix& s, int bins) {
  require_two_per_arm(d.treatment(), d.levels());
  BalanceReport r;
  r.levels = d.levels();
  const Index first = d.has_intercept() ? 1 : 0;
  for (Index k = first; k < d.covariate_count(); ++k) {
    r.covariates.push_back(d.covariate_names()[k]);
  }
  for (int w = 1; w <= d.levels(); ++w) {
    std::vector<NormalizedDiff> row;
    for (Index k = first; k < d.covariate_count(); ++k) {
      row.push_back(normalized_diff_cov(d, w, k));
    }
    r.cov.push_back(std::move(row));
    r.gps.push_back(normalized_diff_gps(d, s, w));
    r.histograms.push_back(overlap_histogram(d, s, w, bins));
  }
  return r;
}

std::string balance_to_json(const BalanceReport& r) {
  nlohmann::ordered_json j;
  j["levels"] = r.levels;
  j["covariates"] = r.covariates;
  auto cov = nlohmann::ordered_json::array();
  for (int w = 1; w <= r.levels; ++w) {
    for (std::size_t k = 0; k < r.covariates.size(); ++k) {
      auto cell = nd_json(r.cov[w - 1][k]);
      cell["level"] = w;
      cell["covariate"] = r.covariates[k];
      cov.push_back(std::move(cell));
    }
  }
  j["nd_cov"] = std::move(cov);
  auto gps = nlohmann::ordered_json::array();
  for (int w = 1; w <= r.levels; ++w) {
    auto cell = nd_json(r.gps[w - 1]);
    cell["level"] = w;
    gps.push_back(std::move(cell));
  }
  j["nd_gps"] = std::move(gps);
  auto hist = nlohmann::ordered_json::array();
  for (const auto& h : r.histograms) {
    nlohmann::ordered_json e;
    e["level"] = h.level;
    e["edges"] = h.edges;
    e["in_arm"] = h.in_arm;
    e["out_of_arm"] = h.out_of_arm;
    hist.push_back(std::move(e));
  }
  j["histograms"] = std::move(hist);
  return j.dump(2) + "\n";
}

std::string balance_to_csv(const BalanceReport& r) {
  std::ostringstream out;
  out << "metric,level,covariate,bin,value,defined\n";
  for (int w = 1; w <= r.levels; ++w) {
    for (std::size_t k = 0; k < r.covariates.size(); ++k) {
      const auto& nd = r.cov[w - 1][k];
      out << "nd_cov," << w << ',' << r.covariates[k] << ",," << format_double(nd.value) << ','
          << (nd.defined ? 1 : 0) << '\n';
    }
    const auto& nd = r.gps[w - 1];
    out << "nd_gps," << w << ",,," << format_double(nd.value) << ',' << (nd.defined ? 1 : 0)
        << '\n';
  }
  for (const auto& h : r.histograms) {
    for (std::size_t b = 0; b < h.in_arm.size(); ++b) {
      out << "hist_in_arm," << h.level << ",," << b << ',' << h.in_arm[b] << ",1\n";
      out << "hist_out_of_arm," << h.level << ",," << b << ',' << h.out_of_arm[b] << ",1\n";
    }
  }
  return out.str();
}

}  // namespace gpsm
