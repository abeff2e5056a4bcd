#include "gpsm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <boost/math/distributions/normal.hpp>

#include "gpsm/error.hpp"
#include "gpsm/parallel.hpp"
#include "gpsm/rng.hpp"

namespace gpsm {

namespace {

constexpr const char* kModule = "inference";

bool needs_scores(Method m) {
  return m == Method::W || m == Method::GPSM || m == Method::GPSS || m == Method::PSSM;
}

void validate(const CiSpec& spec) {
  if (!(spec.level > 0.0 && spec.level < 1.0)) {
    throw config_error(kModule, "confidence level must lie in (0, 1)");
  }
  if (spec.reps < 100) {
    throw config_error(kModule, "bootstrap needs at least 100 replicates");
  }
  const double tail = (1.0 - spec.level) / 2.0 * spec.reps;
  if (tail < 1.0) {
    throw config_error(kModule, std::to_string(spec.reps) +
                                    " bootstrap replicates are too few for level " +
                                    std::to_string(spec.level));
  }
}

}  // namespace

std::string to_string(CiMethod m) {
  return m == CiMethod::BootstrapPercentile ? "bootstrap-percentile" : "matching-variance";
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw config_error(kModule, "confidence level must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(std_normal, 1.0 - (1.0 - level) / 2.0);
}

std::vector<BootstrapResult> bootstrap_ci(const Dataset& d,
                                          std::span<const Method> methods,
                                          const CiSpec& spec,
                                          const BootstrapOptions& opts) {
  validate(spec);
  for (Method m : methods) {
    if (!is_per_arm_mean(m)) {
      throw config_error(kModule, "bootstrap intervals need a per-arm-mean estimator, got " +
                                      to_string(m));
    }
  }
  const bool any_scores = std::any_of(methods.begin(), methods.end(), needs_scores);
  const std::size_t reps = static_cast<std::size_t>(spec.reps);
  const std::size_t nm = methods.size();
  const Index n = d.size();

  // draws[r * nm + k]: contrasts of method k in replicate r, empty if discarded.
  std::vector<std::vector<double>> draws(reps * nm);

  parallel_for(reps, opts.workers, [&](std::size_t r) {
    Rng rng = stream_rng(spec.seed, stream::kBootstrap, r);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> rows(n);
    for (auto& row : rows) row = pick(rng);

    std::optional<Dataset> sample;
    try {
      sample.emplace(take_rows(d, rows));
    } catch (const Error&) {
      return;  // a level vanished
    }
    std::optional<ScoreMatrix> scores;
    if (any_scores) {
      try {
        const GpsModel fit = fit_multinomial_logit(*sample, opts.fit, opts.warm_start);
        scores.emplace(predict_scores(fit, *sample));
      } catch (const Error&) {
      }
    }
    const ScoreMatrix empty;
    for (std::size_t k = 0; k < nm; ++k) {
      if (needs_scores(methods[k]) && !scores) continue;
      try {
        const auto est = estimate(methods[k], *sample, scores ? *scores : empty, opts.estimator);
        auto& out = draws[r * nm + k];
        for (const auto& e : est.effects) out.push_back(e.tau_hat);
      } catch (const Error&) {
      }
    }
  });

  const auto pairs = contrast_pairs(d.levels());
  const double alpha = 1.0 - spec.level;
  std::vector<BootstrapResult> results;
  for (std::size_t k = 0; k < nm; ++k) {
    BootstrapResult res;
    res.method = methods[k];
    res.replicates = spec.reps;
    std::vector<std::size_t> used;
    for (std::size_t r = 0; r < reps; ++r) {
      if (draws[r * nm + k].empty()) {
        ++res.discarded;
      } else {
        used.push_back(r);
      }
    }
    if (res.discarded > opts.max_discard_fraction * spec.reps || used.size() < 2) {
      throw numerical_error(kModule, to_string(methods[k]) + " bootstrap discarded " +
                                         std::to_string(res.discarded) + " of " +
                                         std::to_string(spec.reps) + " replicates");
    }
    std::vector<double> vals(used.size());
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      for (std::size_t u = 0; u < used.size(); ++u) vals[u] = draws[used[u] * nm + k][c];
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      std::sort(vals.begin(), vals.end());
      ContrastInterval ci;
      ci.w = pairs[c].first;
      ci.w_prime = pairs[c].second;
      ci.se = std::sqrt(ss / static_cast<double>(vals.size() - 1));
      ci.ci_lo = quantile_sorted(vals, alpha / 2.0);
      ci.ci_hi = quantile_sorted(vals, 1.0 - alpha / 2.0);
      res.intervals.push_back(ci);
    }
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<ContrastInterval> matching_variance(const Dataset& d,
                                                const ImputedOutcomes& imputed,
                                                double level) {
  const Index n = d.size();
  const int t = d.levels();
  if (imputed.values.rows() != n || imputed.values.cols() != t ||
      static_cast<int>(imputed.matches.size()) != t ||
      static_cast<Index>(imputed.own_arm_neighbor.size()) != n) {
    throw config_error(kModule, "imputed outcomes do not match the dataset");
  }
  const double z = normal_critical_value(level);
  const auto& y = d.outcome();
  const auto& w = d.treatment();

  // K_i counted against the unit's own arm; sigma_i^2 by same-arm differencing.
  std::vector<double> reuse_term(n, 0.0);
  std::vector<std::vector<Index>> counts;
  for (int level_w = 1; level_w <= t; ++level_w) {
    counts.push_back(donor_reuse_counts(imputed.matches[level_w - 1], n));
  }
  for (Index i = 0; i < n; ++i) {
    const Index nb = imputed.own_arm_neighbor[i];
    if (nb < 0) {
      throw data_error(kModule, "treatment level " + std::to_string(w[i]) +
                                    " has a single unit; conditional variance is undefined");
    }
    const double diff = y[i] - y[nb];
    const double sigma2 = 0.5 * diff * diff;
    const double k = static_cast<double>(counts[w[i] - 1][i]);
    reuse_term[i] = (k * k + k) * sigma2;
  }

  std::vector<ContrastInterval> out;
  const double nn = static_cast<double>(n);
  for (auto [a, b] : contrast_pairs(t)) {
    const Eigen::VectorXd diff = imputed.values.col(b - 1) - imputed.values.col(a - 1);
    const double tau = diff.mean();
    double v = (diff.array() - tau).square().sum();
    for (Index i = 0; i < n; ++i) {
      if (w[i] == a || w[i] == b) v += reuse_term[i];
    }
    v /= nn * nn;
    ContrastInterval ci;
    ci.w = a;
    ci.w_prime = b;
    ci.se = std::sqrt(v);
    ci.ci_lo = tau - z * ci.se;
    ci.ci_hi = tau + z * ci.se;
    out.push_back(ci);
  }
  return out;
}

CiMethod default_ci_method(Method m, bool gpsm_bootstrap) {
  switch (m) {
    case Method::DIF:
    case Method::GPSS:
    case Method::W:
      return CiMethod::BootstrapPercentile;
    case Method::GPSM:
      return gpsm_bootstrap ? CiMethod::BootstrapPercentile : CiMethod::MatchingVariance;
    default:
      return CiMethod::MatchingVariance;
  }
}

namespace {

void attach(EstimateSet& set, const std::vector<ContrastInterval>& cis) {
  for (const auto& ci : cis) {
    auto& e = set.effect(ci.w, ci.w_prime);
    e.se = ci.se;
    e.ci_lo = ci.ci_lo;
    e.ci_hi = ci.ci_hi;
  }
}

}  // namespace

std::vector<InferenceResult> estimate_with_inference(const Dataset& d,
                                                     const GpsModel& m,
                                                     const ScoreMatrix& s,
                                                     std::span<const Method> methods,
                                                     const InferenceOptions& opts) {
  std::vector<InferenceResult> out;
  std::vector<Method> boot_methods;
  for (Method method : methods) {
    InferenceResult r;
    r.ci_method = default_ci_method(method, opts.gpsm_bootstrap);
    if (method == Method::PPSM) {
      r.estimates.method = Method::PPSM;
      r.estimates.levels = d.levels();
      r.estimates.population = opts.estimator.population == Population::TrimmedSample
                                   ? Population::TrimmedSample
                                   : Population::PairwiseSubpopulation;
      for (auto pair : contrast_pairs(d.levels())) {
        auto pe = estimate_ppsm(d, pair, opts.estimator);
        if (opts.intervals) {
          const auto ci = matching_variance(pe.restricted, pe.imputed, opts.bootstrap.level);
          pe.effect.se = ci[0].se;
          pe.effect.ci_lo = ci[0].ci_lo;
          pe.effect.ci_hi = ci[0].ci_hi;
        }
        r.estimates.effects.push_back(pe.effect);
      }
    } else {
      r.estimates = estimate(method, d, s, opts.estimator);
      if (opts.intervals && r.ci_method == CiMethod::MatchingVariance) {
        attach(r.estimates, matching_variance(d, *r.estimates.imputed, opts.bootstrap.level));
      }
      if (opts.intervals && r.ci_method == CiMethod::BootstrapPercentile) {
        boot_methods.push_back(method);
      }
    }
    out.push_back(std::move(r));
  }
  if (!boot_methods.empty()) {
    BootstrapOptions bo;
    bo.estimator = opts.estimator;
    bo.fit = opts.fit;
    bo.warm_start = m.coefficients;
    bo.workers = opts.workers;
    const auto boots = bootstrap_ci(d, boot_methods, opts.bootstrap, bo);
    for (const auto& b : boots) {
      for (auto& r : out) {
        if (r.estimates.method == b.method) {
          attach(r.estimates, b.intervals);
          r.bootstrap_discarded = b.discarded;
        }
      }
    }
  }
  return out;
}

}  // namespace gpsm
