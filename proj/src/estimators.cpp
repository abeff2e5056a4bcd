#include "gpsm/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "gpsm/error.hpp"

namespace gpsm {

namespace {

constexpr const char* kModule = "estimators";
constexpr double kNearZeroScore = 1e-12;

void check_scores(const Dataset& d, const ScoreMatrix& s) {
  if (s.size() != d.size() || s.levels() != d.levels()) {
    throw data_error(kModule, "score matrix is " + std::to_string(s.size()) + "x" +
                                  std::to_string(s.levels()) + ", dataset needs " +
                                  std::to_string(d.size()) + "x" +
                                  std::to_string(d.levels()));
  }
}

EstimateSet from_arm_means(Method m, const Dataset& d, std::vector<double> means,
                           Population pop) {
  EstimateSet out;
  out.method = m;
  out.population = pop;
  out.levels = d.levels();
  for (auto [w, wp] : contrast_pairs(d.levels())) {
    EffectEstimate e;
    e.w = w;
    e.w_prime = wp;
    e.tau_hat = means[wp - 1] - means[w - 1];
    e.method = m;
    e.population = pop;
    e.n_used = d.size();
    out.effects.push_back(e);
  }
  out.arm_means = std::move(means);
  return out;
}

EstimateSet from_imputed(Method m, const Dataset& d, ImputedOutcomes imputed,
                         Population pop) {
  std::vector<double> means(d.levels());
  for (int w = 1; w <= d.levels(); ++w) means[w - 1] = imputed.values.col(w - 1).mean();
  auto out = from_arm_means(m, d, std::move(means), pop);
  out.imputed = std::move(imputed);
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::DIF: return "DIF";
    case Method::PPSM: return "PPSM";
    case Method::PSSM: return "PSSM";
    case Method::W: return "W";
    case Method::COV: return "COV";
    case Method::GPSM: return "GPSM";
    case Method::GPSS: return "GPSS";
  }
  return "?";
}

std::string to_string(Population p) {
  switch (p) {
    case Population::FullSample: return "full-sample";
    case Population::TrimmedSample: return "trimmed-sample";
    case Population::PairwiseSubpopulation: return "pairwise-subpopulation";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods()) {
    if (to_string(m) == s) return m;
  }
  throw config_error(kModule, "unknown estimator '" + s +
                                  "' (expected DIF, PPSM, PSSM, W, COV, GPSM or GPSS)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::DIF, Method::PPSM, Method::PSSM,
                                           Method::W,   Method::COV,  Method::GPSM,
                                           Method::GPSS};
  return methods;
}

bool is_per_arm_mean(Method m) { return m != Method::PPSM; }

std::vector<std::pair<int, int>> contrast_pairs(int levels) {
  std::vector<std::pair<int, int>> out;
  for (int w = 1; w <= levels; ++w) {
    for (int wp = w + 1; wp <= levels; ++wp) out.emplace_back(w, wp);
  }
  return out;
}

double EstimateSet::tau(int w, int w_prime) const {
  if (w == w_prime) return 0.0;
  if (w < w_prime) return effect(w, w_prime).tau_hat;
  return -effect(w_prime, w).tau_hat;
}

const EffectEstimate& EstimateSet::effect(int w, int w_prime) const {
  for (const auto& e : effects) {
    if (e.w == w && e.w_prime == w_prime) return e;
  }
  throw config_error(kModule, "no contrast (" + std::to_string(w) + "," +
                                  std::to_string(w_prime) + ")");
}

EffectEstimate& EstimateSet::effect(int w, int w_prime) {
  return const_cast<EffectEstimate&>(std::as_const(*this).effect(w, w_prime));
}

namespace {

// Type-7 quantiles at j / classes, j = 1..classes-1, by partial selection.
// Only the two order statistics around each quantile are placed; `work` is
// permuted.
void subclass_bounds(std::vector<double>& work, int classes, std::vector<double>& bounds) {
  const std::size_t n = work.size();
  std::size_t start = 0;
  for (int j = 1; j < classes; ++j) {
    const double h = (static_cast<double>(n) - 1.0) * static_cast<double>(j) / classes;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo >= start) {
      std::nth_element(work.begin() + static_cast<std::ptrdiff_t>(start),
                       work.begin() + static_cast<std::ptrdiff_t>(lo), work.end());
      start = lo + 1;
    }
    if (lo + 1 < n && lo + 1 >= start) {
      std::iter_swap(work.begin() + static_cast<std::ptrdiff_t>(lo + 1),
                     std::min_element(work.begin() + static_cast<std::ptrdiff_t>(lo + 1),
                                      work.end()));
      start = lo + 2;
    }
    bounds[j - 1] = lo + 1 >= n ? work[n - 1]
                                : work[lo] + (h - static_cast<double>(lo)) * (work[lo + 1] - work[lo]);
  }
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double prob) {
  const std::size_t n = sorted.size();
  if (n == 0) throw data_error(kModule, "quantile of an empty sample");
  const double h = (static_cast<double>(n) - 1.0) * prob;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

ImputedOutcomes impute_matrix(const Dataset& d, const ImputeSpec& spec) {
  const int t = d.levels();
  const auto& w = d.treatment();
  ImputedOutcomes out;
  out.metric = spec.metric;
  out.values.resize(d.size(), t);

  Eigen::MatrixXd rows;
  switch (spec.metric) {
    case MatchMetric::ScalarGps: {
      if (!spec.scores) throw config_error(kModule, "scalar GPS matching needs scores");
      check_scores(d, *spec.scores);
      const auto& v = spec.scores->values;
      for (int level = 1; level <= t; ++level) {
        const Eigen::VectorXd col = v.col(level - 1);
        out.matches.push_back(match_scalar({col.data(), static_cast<std::size_t>(col.size())},
                                           {col.data(), static_cast<std::size_t>(col.size())},
                                           w, level));
      }
      out.own_arm_neighbor = nearest_same_arm_scalar(v, w, t);
      break;
    }
    case MatchMetric::ScoreVector:
      if (!spec.scores) throw config_error(kModule, "score-set matching needs scores");
      check_scores(d, *spec.scores);
      rows = spec.scores->values.leftCols(std::max(1, t - 1));
      break;
    case MatchMetric::Mahalanobis:
      rows = whiten(d, spec.v.size() > 0 ? spec.v : mahalanobis_matrix(d));
      break;
  }
  if (spec.metric != MatchMetric::ScalarGps) {
    for (int level = 1; level <= t; ++level) {
      out.matches.push_back(match_vector(rows, rows, w, level));
    }
    out.own_arm_neighbor = nearest_same_arm(rows, w, t);
  }

  const auto& y = d.outcome();
  for (int level = 1; level <= t; ++level) {
    const auto& m = out.matches[level - 1];
    for (Index i = 0; i < d.size(); ++i) out.values(i, level - 1) = y[m.donor[i]];
  }
  return out;
}

EstimateSet estimate_dif(const Dataset& d, const EstimatorOptions& opts) {
  std::vector<double> sum(d.levels(), 0.0);
  const auto counts = d.arm_counts();
  for (Index i = 0; i < d.size(); ++i) sum[d.treatment()[i] - 1] += d.outcome()[i];
  for (int w = 0; w < d.levels(); ++w) sum[w] /= static_cast<double>(counts[w]);
  return from_arm_means(Method::DIF, d, std::move(sum), opts.population);
}

EstimateSet estimate_cov(const Dataset& d, const EstimatorOptions& opts) {
  ImputeSpec spec;
  spec.metric = MatchMetric::Mahalanobis;
  return from_imputed(Method::COV, d, impute_matrix(d, spec), opts.population);
}

EstimateSet estimate_gpsm(const Dataset& d, const ScoreMatrix& s,
                          const EstimatorOptions& opts) {
  ImputeSpec spec;
  spec.metric = MatchMetric::ScalarGps;
  spec.scores = &s;
  return from_imputed(Method::GPSM, d, impute_matrix(d, spec), opts.population);
}

EstimateSet estimate_pssm(const Dataset& d, const ScoreMatrix& s,
                          const EstimatorOptions& opts) {
  ImputeSpec spec;
  spec.metric = MatchMetric::ScoreVector;
  spec.scores = &s;
  return from_imputed(Method::PSSM, d, impute_matrix(d, spec), opts.population);
}

EstimateSet estimate_weighting(const Dataset& d, const ScoreMatrix& s,
                               const EstimatorOptions& opts) {
  check_scores(d, s);
  const auto& wo = opts.weighting;
  std::vector<double> num(d.levels(), 0.0), den(d.levels(), 0.0);
  for (Index i = 0; i < d.size(); ++i) {
    const int w = d.treatment()[i];
    double p = s(i, w);
    if (wo.clip) {
      p = std::max(p, wo.floor);
    } else if (!(p >= kNearZeroScore)) {
      throw data_error(kModule, "unit " + std::to_string(i + 1) + " has score p(" +
                                    std::to_string(w) + "|X) = " + std::to_string(p) +
                                    "; enable clipping or trim the sample");
    }
    num[w - 1] += d.outcome()[i] / p;
    den[w - 1] += 1.0 / p;
  }
  std::vector<double> means(d.levels());
  for (int w = 0; w < d.levels(); ++w) {
    means[w] = wo.horvitz_thompson ? num[w] / static_cast<double>(d.size())
                                   : num[w] / den[w];
  }
  return from_arm_means(Method::W, d, std::move(means), opts.population);
}

EstimateSet estimate_gpss(const Dataset& d, const ScoreMatrix& s,
                          const EstimatorOptions& opts) {
  check_scores(d, s);
  const int classes = opts.subclasses;
  if (classes < 1) throw config_error(kModule, "subclass count must be >= 1");
  const Index n = d.size();
  std::vector<double> means(d.levels(), 0.0);
  std::vector<double> sorted(n);
  std::vector<double> bounds(classes - 1);
  std::vector<Index> n_class(classes), n_cell(classes);
  std::vector<double> y_cell(classes);

  for (int w = 1; w <= d.levels(); ++w) {
    const auto col = s.column(w);
    for (Index i = 0; i < n; ++i) sorted[i] = col[i];
    subclass_bounds(sorted, classes, bounds);
    std::fill(n_class.begin(), n_class.end(), 0);
    std::fill(n_cell.begin(), n_cell.end(), 0);
    std::fill(y_cell.begin(), y_cell.end(), 0.0);
    for (Index i = 0; i < n; ++i) {
      // q_{j-1} < p <= q_j
      const int j = static_cast<int>(
          std::lower_bound(bounds.begin(), bounds.end(), col[i]) - bounds.begin());
      ++n_class[j];
      if (d.treatment()[i] == w) {
        ++n_cell[j];
        y_cell[j] += d.outcome()[i];
      }
    }
    double mean = 0.0;
    for (int j = 0; j < classes; ++j) {
      if (n_class[j] == 0) continue;
      if (n_cell[j] == 0) {
        throw data_error(kModule,
                         "subclass " + std::to_string(j + 1) + " of p(" +
                             std::to_string(w) + "|X) has no units with treatment " +
                             std::to_string(w) +
                             "; trim the sample or use fewer subclasses");
      }
      mean += static_cast<double>(n_class[j]) / static_cast<double>(n) *
              (y_cell[j] / static_cast<double>(n_cell[j]));
    }
    means[w - 1] = mean;
  }
  return from_arm_means(Method::GPSS, d, std::move(means), opts.population);
}

PairwiseEstimate estimate_ppsm(const Dataset& d, std::pair<int, int> pair,
                               const EstimatorOptions& opts) {
  const auto [w, wp] = pair;
  if (w == wp || w < 1 || wp < 1 || w > d.levels() || wp > d.levels()) {
    throw config_error(kModule, "invalid treatment pair");
  }
  std::vector<Index> rows;
  for (Index i = 0; i < d.size(); ++i) {
    const int t = d.treatment()[i];
    if (t == w || t == wp) rows.push_back(i);
  }
  const Index n = static_cast<Index>(rows.size());
  Eigen::MatrixXd x(n, d.covariate_count());
  std::vector<int> t(n);
  Eigen::VectorXd y(n);
  for (Index r = 0; r < n; ++r) {
    x.row(r) = d.covariates().row(rows[r]);
    t[r] = d.treatment()[rows[r]] == w ? 1 : 2;
    y[r] = d.outcome()[rows[r]];
  }
  Dataset restricted(std::move(x), std::move(t), std::move(y), d.covariate_names(), 2,
                     d.has_intercept(),
                     {d.level_labels()[w - 1], d.level_labels()[wp - 1]});

  const GpsModel model = fit_multinomial_logit(restricted, opts.fit);
  ScoreMatrix binary = predict_scores(model, restricted);
  // Both arms are matched on p(first | X).
  ScoreMatrix matching_scores{Eigen::MatrixXd(n, 2)};
  matching_scores.values.col(0) = binary.values.col(0);
  matching_scores.values.col(1) = binary.values.col(0);

  ImputeSpec spec;
  spec.metric = MatchMetric::ScalarGps;
  spec.scores = &matching_scores;
  ImputedOutcomes imputed = impute_matrix(restricted, spec);

  EffectEstimate e;
  e.w = w;
  e.w_prime = wp;
  e.method = Method::PPSM;
  e.population = opts.population == Population::TrimmedSample
                     ? Population::TrimmedSample
                     : Population::PairwiseSubpopulation;
  e.tau_hat = (imputed.values.col(1) - imputed.values.col(0)).mean();
  e.n_used = n;
  return PairwiseEstimate{e, std::move(restricted), std::move(binary), std::move(imputed)};
}

EstimateSet estimate_ppsm_all(const Dataset& d, const EstimatorOptions& opts) {
  EstimateSet out;
  out.method = Method::PPSM;
  out.levels = d.levels();
  out.population = opts.population == Population::TrimmedSample
                       ? Population::TrimmedSample
                       : Population::PairwiseSubpopulation;
  for (auto pair : contrast_pairs(d.levels())) {
    out.effects.push_back(estimate_ppsm(d, pair, opts).effect);
  }
  return out;
}

EstimateSet estimate(Method m, const Dataset& d, const ScoreMatrix& s,
                     const EstimatorOptions& opts) {
  switch (m) {
    case Method::DIF: return estimate_dif(d, opts);
    case Method::PPSM: return estimate_ppsm_all(d, opts);
    case Method::PSSM: return estimate_pssm(d, s, opts);
    case Method::W: return estimate_weighting(d, s, opts);
    case Method::COV: return estimate_cov(d, opts);
    case Method::GPSM: return estimate_gpsm(d, s, opts);
    case Method::GPSS: return estimate_gpss(d, s, opts);
  }
  throw config_error(kModule, "unknown method");
}

std::vector<double> max_normalized_weights(const Dataset& d, const ScoreMatrix& s) {
  check_scores(d, s);
  std::vector<double> sum(d.levels(), 0.0), mx(d.levels(), 0.0);
  const auto counts = d.arm_counts();
  for (Index i = 0; i < d.size(); ++i) {
    const int w = d.treatment()[i];
    const double wt = 1.0 / s(i, w);
    sum[w - 1] += wt;
    mx[w - 1] = std::max(mx[w - 1], wt);
  }
  for (int w = 0; w < d.levels(); ++w) {
    mx[w] /= sum[w] / static_cast<double>(counts[w]);
  }
  return mx;
}

}  // namespace gpsm
