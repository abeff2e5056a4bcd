#include "gpsm/gpsm.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <limits>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gpsm/balance.hpp"
#include "gpsm/dataset.hpp"
#include "gpsm/error.hpp"
#include "gpsm/estimators.hpp"
#include "gpsm/gps_model.hpp"
#include "gpsm/inference.hpp"
#include "gpsm/report.hpp"
#include "gpsm/simulation.hpp"
#include "gpsm/trimming.hpp"

struct gpsm_dataset {
  gpsm::Dataset value;
};
struct gpsm_model {
  gpsm::GpsModel value;
};
struct gpsm_scores {
  gpsm::ScoreMatrix value;
};
struct gpsm_trim_result {
  gpsm::TrimResult value;
};
struct gpsm_estimates {
  std::vector<gpsm::InferenceResult> results;
  // Flattened view for index access.
  std::vector<std::pair<std::size_t, std::size_t>> index;
};
struct gpsm_design {
  gpsm::SimulationDesign value;
};
struct gpsm_mc_summary {
  gpsm::MonteCarloSummary value;
};

namespace {

constexpr const char* kVersion = "1.0.0";

thread_local std::string last_error;

gpsm_status fail(gpsm_status code, std::string message) {
  last_error = std::move(message);
  return code;
}

// Runs fn, mapping exceptions onto status codes.
template <class Fn>
gpsm_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return GPSM_OK;
  } catch (const gpsm::Error& e) {
    return fail(static_cast<gpsm_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(GPSM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GPSM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GPSM_ERR_INTERNAL, "unknown failure");
  }
}

gpsm::Error null_argument(const char* what) {
  return gpsm::config_error("capi", std::string("null argument: ") + what);
}

template <class T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw null_argument(what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

gpsm::FitOptions fit_options(const gpsm_fit_options* o) {
  gpsm::FitOptions f;
  if (o != nullptr) {
    f.max_iter = o->max_iter;
    f.tol = o->tol;
    f.ridge = o->ridge;
  }
  return f;
}

std::vector<gpsm::Method> parse_methods(const char* const* tags, std::size_t n) {
  if (n == 0) return gpsm::all_methods();
  require(tags, "methods");
  std::vector<gpsm::Method> out;
  for (std::size_t i = 0; i < n; ++i) {
    require(tags[i], "method tag");
    out.push_back(gpsm::method_from_string(tags[i]));
  }
  return out;
}

const char* static_tag(gpsm::Method m) {
  switch (m) {
    case gpsm::Method::DIF: return "DIF";
    case gpsm::Method::PPSM: return "PPSM";
    case gpsm::Method::PSSM: return "PSSM";
    case gpsm::Method::W: return "W";
    case gpsm::Method::COV: return "COV";
    case gpsm::Method::GPSM: return "GPSM";
    case gpsm::Method::GPSS: return "GPSS";
  }
  return "?";
}

const char* static_tag(gpsm::Population p) {
  switch (p) {
    case gpsm::Population::FullSample: return "full-sample";
    case gpsm::Population::TrimmedSample: return "trimmed-sample";
    case gpsm::Population::PairwiseSubpopulation: return "pairwise-subpopulation";
  }
  return "?";
}

const char* static_tag(gpsm::CiMethod c) {
  return c == gpsm::CiMethod::BootstrapPercentile ? "bootstrap-percentile"
                                                  : "matching-variance";
}

}  // namespace

extern "C" {

const char* gpsm_version(void) { return kVersion; }

const char* gpsm_last_error(void) { return last_error.c_str(); }

void gpsm_string_free(char* s) { std::free(s); }

gpsm_status gpsm_dataset_load_csv(const char* path, const char* treatment_column,
                                  const char* outcome_column,
                                  const char* const* covariate_columns, size_t n_covariates,
                                  char delimiter, gpsm_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(treatment_column, "treatment_column");
    require(outcome_column, "outcome_column");
    require(out, "out");
    gpsm::CsvSchema schema;
    schema.treatment_column = treatment_column;
    schema.outcome_column = outcome_column;
    if (n_covariates > 0) require(covariate_columns, "covariate_columns");
    for (size_t i = 0; i < n_covariates; ++i) {
      require(covariate_columns[i], "covariate column name");
      schema.covariate_columns.emplace_back(covariate_columns[i]);
    }
    schema.delimiter = delimiter == 0 ? ',' : delimiter;
    *out = new gpsm_dataset{gpsm::load_csv(path, schema)};
  });
}

gpsm_status gpsm_dataset_from_arrays(size_t n, size_t k, const double* x, const int* treatment,
                                     const double* outcome, int levels, gpsm_dataset** out) {
  return guarded([&] {
    require(x, "x");
    require(treatment, "treatment");
    require(outcome, "outcome");
    require(out, "out");
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = x[i * cols + j];
    }
    std::vector<int> w(treatment, treatment + n);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(outcome, rows);
    *out = new gpsm_dataset{gpsm::Dataset(std::move(m), std::move(w), std::move(y), {}, levels)};
  });
}

gpsm_status gpsm_dataset_save_csv(const gpsm_dataset* d, const char* path) {
  return guarded([&] {
    require(d, "dataset");
    require(path, "path");
    gpsm::save_csv(d->value, path);
  });
}

gpsm_status gpsm_dataset_to_csv(const gpsm_dataset* d, char** out) {
  return guarded([&] {
    require(d, "dataset");
    require(out, "out");
    std::ostringstream text;
    gpsm::write_csv(d->value, text);
    *out = copy_string(text.str());
  });
}

size_t gpsm_dataset_size(const gpsm_dataset* d) {
  return d == nullptr ? 0 : static_cast<size_t>(d->value.size());
}

int gpsm_dataset_levels(const gpsm_dataset* d) { return d == nullptr ? 0 : d->value.levels(); }

gpsm_status gpsm_dataset_arm_counts(const gpsm_dataset* d, size_t* counts) {
  return guarded([&] {
    require(d, "dataset");
    require(counts, "counts");
    const auto c = d->value.arm_counts();
    for (std::size_t i = 0; i < c.size(); ++i) counts[i] = static_cast<size_t>(c[i]);
  });
}

gpsm_status gpsm_dataset_level_label(const gpsm_dataset* d, int w, char** out) {
  return guarded([&] {
    require(d, "dataset");
    require(out, "out");
    if (w < 1 || w > d->value.levels()) {
      throw gpsm::config_error("capi", "level " + std::to_string(w) + " out of range");
    }
    const auto& labels = d->value.level_labels();
    *out = copy_string(labels.empty() ? std::to_string(w) : labels[w - 1]);
  });
}

void gpsm_dataset_free(gpsm_dataset* d) { delete d; }

void gpsm_fit_options_default(gpsm_fit_options* opts) {
  if (opts == nullptr) return;
  const gpsm::FitOptions f;
  opts->max_iter = f.max_iter;
  opts->tol = f.tol;
  opts->ridge = f.ridge;
}

gpsm_status gpsm_fit(const gpsm_dataset* d, const gpsm_fit_options* opts, gpsm_model** out) {
  return guarded([&] {
    require(d, "dataset");
    require(out, "out");
    *out = new gpsm_model{gpsm::fit_multinomial_logit(d->value, fit_options(opts))};
  });
}

gpsm_status gpsm_model_to_json(const gpsm_model* m, char** out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = copy_string(gpsm::model_to_json(m->value));
  });
}

gpsm_status gpsm_model_from_json(const char* json, gpsm_model** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new gpsm_model{gpsm::model_from_json(json)};
  });
}

int gpsm_model_iterations(const gpsm_model* m) { return m == nullptr ? 0 : m->value.iterations; }

double gpsm_model_gradient_norm(const gpsm_model* m) {
  return m == nullptr ? std::numeric_limits<double>::quiet_NaN() : m->value.gradient_norm;
}

void gpsm_model_free(gpsm_model* m) { delete m; }

gpsm_status gpsm_predict(const gpsm_model* m, const gpsm_dataset* d, gpsm_scores** out) {
  return guarded([&] {
    require(m, "model");
    require(d, "dataset");
    require(out, "out");
    *out = new gpsm_scores{gpsm::predict_scores(m->value, d->value)};
  });
}

size_t gpsm_scores_size(const gpsm_scores* s) {
  return s == nullptr ? 0 : static_cast<size_t>(s->value.size());
}

int gpsm_scores_levels(const gpsm_scores* s) { return s == nullptr ? 0 : s->value.levels(); }

gpsm_status gpsm_scores_get(const gpsm_scores* s, size_t i, int w, double* out) {
  return guarded([&] {
    require(s, "scores");
    require(out, "out");
    if (i >= static_cast<size_t>(s->value.size()) || w < 1 || w > s->value.levels()) {
      throw gpsm::config_error("capi", "score index out of range");
    }
    *out = s->value(static_cast<gpsm::Index>(i), w);
  });
}

void gpsm_scores_free(gpsm_scores* s) { delete s; }

gpsm_status gpsm_find_lambda(const double* g, size_t n, double* out) {
  return guarded([&] {
    require(g, "g");
    require(out, "out");
    if (n == 0) throw gpsm::config_error("trimming", "empty g vector");
    *out = gpsm::find_lambda({g, n});
  });
}

gpsm_status gpsm_trim(const gpsm_dataset* d, const gpsm_scores* s, int refit,
                      const gpsm_fit_options* opts, gpsm_trim_result** out) {
  return guarded([&] {
    require(d, "dataset");
    require(s, "scores");
    require(out, "out");
    *out = new gpsm_trim_result{gpsm::trim(d->value, s->value, refit != 0, fit_options(opts))};
  });
}

double gpsm_trim_lambda(const gpsm_trim_result* t) {
  return t == nullptr ? std::numeric_limits<double>::quiet_NaN() : t->value.lambda;
}

size_t gpsm_trim_dropped(const gpsm_trim_result* t) {
  return t == nullptr ? 0 : static_cast<size_t>(t->value.dropped());
}

gpsm_status gpsm_trim_to_json(const gpsm_trim_result* t, char** out) {
  return guarded([&] {
    require(t, "trim result");
    require(out, "out");
    *out = copy_string(gpsm::trim_result_to_json(t->value));
  });
}

gpsm_status gpsm_trim_mask_csv(const gpsm_trim_result* t, char** out) {
  return guarded([&] {
    require(t, "trim result");
    require(out, "out");
    *out = copy_string(gpsm::mask_to_csv(t->value));
  });
}

gpsm_status gpsm_trim_dataset(const gpsm_trim_result* t, gpsm_dataset** out) {
  return guarded([&] {
    require(t, "trim result");
    require(out, "out");
    *out = new gpsm_dataset{t->value.trimmed};
  });
}

gpsm_status gpsm_trim_scores(const gpsm_trim_result* t, gpsm_scores** out) {
  return guarded([&] {
    require(t, "trim result");
    require(out, "out");
    *out = new gpsm_scores{t->value.scores};
  });
}

gpsm_status gpsm_trim_model(const gpsm_trim_result* t, gpsm_model** out) {
  return guarded([&] {
    require(t, "trim result");
    require(out, "out");
    if (!t->value.model) {
      throw gpsm::config_error("capi", "trim was run without refit; no model available");
    }
    *out = new gpsm_model{*t->value.model};
  });
}

void gpsm_trim_free(gpsm_trim_result* t) { delete t; }

gpsm_status gpsm_balance(const gpsm_dataset* d, const gpsm_scores* s, int bins, char** json,
                         char** csv) {
  return guarded([&] {
    require(d, "dataset");
    require(s, "scores");
    const auto report = gpsm::balance_report(d->value, s->value, bins);
    std::string j = json != nullptr ? gpsm::balance_to_json(report) : std::string();
    std::string c = csv != nullptr ? gpsm::balance_to_csv(report) : std::string();
    if (json != nullptr) *json = copy_string(j);
    if (csv != nullptr) *csv = copy_string(c);
  });
}

void gpsm_estimate_options_default(gpsm_estimate_options* opts) {
  if (opts == nullptr) return;
  const gpsm::InferenceOptions d;
  opts->methods = nullptr;
  opts->n_methods = 0;
  opts->subclasses = d.estimator.subclasses;
  opts->clip_weights = d.estimator.weighting.clip ? 1 : 0;
  opts->clip_floor = d.estimator.weighting.floor;
  opts->horvitz_thompson = d.estimator.weighting.horvitz_thompson ? 1 : 0;
  opts->trimmed_sample = 0;
  opts->intervals = d.intervals ? 1 : 0;
  opts->level = d.bootstrap.level;
  opts->bootstrap_reps = d.bootstrap.reps;
  opts->seed = d.bootstrap.seed;
  opts->gpsm_bootstrap = d.gpsm_bootstrap ? 1 : 0;
  opts->workers = d.workers;
  gpsm_fit_options_default(&opts->fit);
}

gpsm_status gpsm_estimate(const gpsm_dataset* d, const gpsm_model* m, const gpsm_scores* s,
                          const gpsm_estimate_options* opts, gpsm_estimates** out) {
  return guarded([&] {
    require(d, "dataset");
    require(m, "model");
    require(s, "scores");
    require(out, "out");
    gpsm_estimate_options o;
    gpsm_estimate_options_default(&o);
    if (opts != nullptr) o = *opts;
    gpsm::InferenceOptions inf;
    inf.fit = fit_options(&o.fit);
    inf.estimator.fit = inf.fit;
    inf.estimator.subclasses = o.subclasses;
    inf.estimator.weighting.clip = o.clip_weights != 0;
    inf.estimator.weighting.floor = o.clip_floor;
    inf.estimator.weighting.horvitz_thompson = o.horvitz_thompson != 0;
    inf.estimator.population =
        o.trimmed_sample != 0 ? gpsm::Population::TrimmedSample : gpsm::Population::FullSample;
    inf.intervals = o.intervals != 0;
    inf.bootstrap.level = o.level;
    inf.bootstrap.reps = o.bootstrap_reps;
    inf.bootstrap.seed = o.seed;
    inf.gpsm_bootstrap = o.gpsm_bootstrap != 0;
    inf.workers = o.workers;
    const auto methods = parse_methods(o.methods, o.n_methods);
    auto* e = new gpsm_estimates;
    try {
      e->results = gpsm::estimate_with_inference(d->value, m->value, s->value, methods, inf);
    } catch (...) {
      delete e;
      throw;
    }
    for (std::size_t r = 0; r < e->results.size(); ++r) {
      for (std::size_t c = 0; c < e->results[r].estimates.effects.size(); ++c) {
        e->index.emplace_back(r, c);
      }
    }
    *out = e;
  });
}

size_t gpsm_estimates_count(const gpsm_estimates* e) {
  return e == nullptr ? 0 : e->index.size();
}

gpsm_status gpsm_estimates_get(const gpsm_estimates* e, size_t index, gpsm_effect* out) {
  return guarded([&] {
    require(e, "estimates");
    require(out, "out");
    if (index >= e->index.size()) throw gpsm::config_error("capi", "estimate index out of range");
    const auto [r, c] = e->index[index];
    const auto& res = e->results[r];
    const auto& eff = res.estimates.effects[c];
    out->method = static_tag(eff.method);
    out->ci_method = static_tag(res.ci_method);
    out->population = static_tag(eff.population);
    out->w = eff.w;
    out->w_prime = eff.w_prime;
    out->tau_hat = eff.tau_hat;
    out->se = eff.se;
    out->ci_lo = eff.ci_lo;
    out->ci_hi = eff.ci_hi;
    out->n_used = static_cast<size_t>(eff.n_used);
  });
}

gpsm_status gpsm_estimates_to_csv(const gpsm_estimates* e, char** out) {
  return guarded([&] {
    require(e, "estimates");
    require(out, "out");
    *out = copy_string(gpsm::estimates_to_csv(e->results));
  });
}

gpsm_status gpsm_estimates_to_json(const gpsm_estimates* e, char** out) {
  return guarded([&] {
    require(e, "estimates");
    require(out, "out");
    *out = copy_string(gpsm::estimates_to_json(e->results));
  });
}

void gpsm_estimates_free(gpsm_estimates* e) { delete e; }

gpsm_status gpsm_design_builtin(const char* name, gpsm_design** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = new gpsm_design{gpsm::builtin_design(name)};
  });
}

gpsm_status gpsm_design_from_json(const char* json, gpsm_design** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new gpsm_design{gpsm::design_from_json(json)};
  });
}

gpsm_status gpsm_design_to_json(const gpsm_design* d, char** out) {
  return guarded([&] {
    require(d, "design");
    require(out, "out");
    *out = copy_string(gpsm::design_to_json(d->value));
  });
}

gpsm_status gpsm_design_set_mode(gpsm_design* d, int expected_size) {
  return guarded([&] {
    require(d, "design");
    d->value.mode = expected_size != 0 ? gpsm::SizeMode::ExpectedSize : gpsm::SizeMode::Quota;
  });
}

int gpsm_design_levels(const gpsm_design* d) { return d == nullptr ? 0 : d->value.levels(); }

void gpsm_design_free(gpsm_design* d) { delete d; }

gpsm_status gpsm_simulate_dataset(const gpsm_design* d, uint64_t seed, gpsm_dataset** out) {
  return guarded([&] {
    require(d, "design");
    require(out, "out");
    *out = new gpsm_dataset{gpsm::generate(d->value, seed)};
  });
}

gpsm_status gpsm_true_scores(const gpsm_design* design, const gpsm_dataset* d,
                             gpsm_scores** out) {
  return guarded([&] {
    require(design, "design");
    require(d, "dataset");
    require(out, "out");
    *out = new gpsm_scores{gpsm::true_scores(design->value, d->value)};
  });
}

gpsm_status gpsm_true_effects(const gpsm_design* d, gpsm_truth truth, double* tau) {
  return guarded([&] {
    require(d, "design");
    require(tau, "tau");
    gpsm::Truth kind = gpsm::default_truth(d->value);
    if (truth == GPSM_TRUTH_SUPERPOPULATION) kind = gpsm::Truth::Superpopulation;
    if (truth == GPSM_TRUTH_SAMPLED_POPULATION) kind = gpsm::Truth::SampledPopulation;
    const auto te = gpsm::true_effects(d->value, kind);
    const int t = d->value.levels();
    for (int a = 0; a < t; ++a) {
      for (int b = 0; b < t; ++b) tau[a * t + b] = te.tau(a, b);
    }
  });
}

void gpsm_mc_options_default(gpsm_mc_options* opts) {
  if (opts == nullptr) return;
  const gpsm::MonteCarloOptions d;
  opts->methods = nullptr;
  opts->n_methods = 0;
  opts->reps = d.reps;
  opts->seed = d.seed;
  opts->workers = d.workers;
  opts->bootstrap_reps = d.inference.bootstrap.reps;
  opts->level = d.inference.bootstrap.level;
  opts->gpsm_bootstrap = d.inference.gpsm_bootstrap ? 1 : 0;
  opts->truth = GPSM_TRUTH_AUTO;
}

gpsm_status gpsm_run_monte_carlo(const gpsm_design* d, const gpsm_mc_options* opts,
                                 gpsm_mc_summary** out) {
  return guarded([&] {
    require(d, "design");
    require(out, "out");
    gpsm_mc_options o;
    gpsm_mc_options_default(&o);
    if (opts != nullptr) o = *opts;
    gpsm::MonteCarloOptions mc;
    mc.methods = parse_methods(o.methods, o.n_methods);
    mc.reps = o.reps;
    mc.seed = o.seed;
    mc.workers = o.workers;
    mc.inference.bootstrap.reps = o.bootstrap_reps;
    mc.inference.bootstrap.level = o.level;
    mc.inference.gpsm_bootstrap = o.gpsm_bootstrap != 0;
    mc.truth_from_mode = o.truth == GPSM_TRUTH_AUTO;
    mc.truth = o.truth == GPSM_TRUTH_SUPERPOPULATION ? gpsm::Truth::Superpopulation
                                                      : gpsm::Truth::SampledPopulation;
    *out = new gpsm_mc_summary{gpsm::run_monte_carlo(d->value, mc)};
  });
}

gpsm_status gpsm_mc_summary_to_csv(const gpsm_mc_summary* s, char** out) {
  return guarded([&] {
    require(s, "summary");
    require(out, "out");
    *out = copy_string(gpsm::summary_to_csv(s->value));
  });
}

gpsm_status gpsm_mc_summary_to_long_csv(const gpsm_mc_summary* s, char** out) {
  return guarded([&] {
    require(s, "summary");
    require(out, "out");
    *out = copy_string(gpsm::summary_to_long_csv(s->value));
  });
}

gpsm_status gpsm_mc_summary_to_json(const gpsm_mc_summary* s, char** out) {
  return guarded([&] {
    require(s, "summary");
    require(out, "out");
    *out = copy_string(gpsm::summary_to_json(s->value));
  });
}

void gpsm_mc_summary_free(gpsm_mc_summary* s) { delete s; }

}  // extern "C"
