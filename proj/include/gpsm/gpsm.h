#ifndef GPSM_GPSM_H
#define GPSM_GPSM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GPSM_API __declspec(dllexport)
#else
#define GPSM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns one of these. On failure the message of the
   calling thread is available from gpsm_last_error() until the next call
   on that thread. */
typedef enum gpsm_status {
  GPSM_OK = 0,
  GPSM_ERR_INTERNAL = 1,
  GPSM_ERR_CONFIG = 2,
  GPSM_ERR_DATA = 3,
  GPSM_ERR_NUMERICAL = 4
} gpsm_status;

typedef struct gpsm_dataset gpsm_dataset;
typedef struct gpsm_model gpsm_model;
typedef struct gpsm_scores gpsm_scores;
typedef struct gpsm_trim_result gpsm_trim_result;
typedef struct gpsm_estimates gpsm_estimates;
typedef struct gpsm_design gpsm_design;
typedef struct gpsm_mc_summary gpsm_mc_summary;

GPSM_API const char* gpsm_version(void);
GPSM_API const char* gpsm_last_error(void);
/* Strings returned through char** out-parameters are owned by the caller. */
GPSM_API void gpsm_string_free(char* s);

/* ---- dataset ---- */

/* covariate_columns may be NULL (n_covariates 0) to take every column other
   than treatment and outcome. Treatment labels are coded 1..T by first
   appearance. */
GPSM_API gpsm_status gpsm_dataset_load_csv(const char* path, const char* treatment_column,
                                           const char* outcome_column,
                                           const char* const* covariate_columns,
                                           size_t n_covariates, char delimiter,
                                           gpsm_dataset** out);
/* x is row-major n x k; treatment holds levels 1..levels. */
GPSM_API gpsm_status gpsm_dataset_from_arrays(size_t n, size_t k, const double* x,
                                              const int* treatment, const double* outcome,
                                              int levels, gpsm_dataset** out);
GPSM_API gpsm_status gpsm_dataset_save_csv(const gpsm_dataset* d, const char* path);
GPSM_API gpsm_status gpsm_dataset_to_csv(const gpsm_dataset* d, char** out);
GPSM_API size_t gpsm_dataset_size(const gpsm_dataset* d);
GPSM_API int gpsm_dataset_levels(const gpsm_dataset* d);
/* counts must hold gpsm_dataset_levels(d) entries. */
GPSM_API gpsm_status gpsm_dataset_arm_counts(const gpsm_dataset* d, size_t* counts);
/* Original label of level w (1-based); free with gpsm_string_free. */
GPSM_API gpsm_status gpsm_dataset_level_label(const gpsm_dataset* d, int w, char** out);
GPSM_API void gpsm_dataset_free(gpsm_dataset* d);

/* ---- generalized propensity score ---- */

typedef struct gpsm_fit_options {
  int max_iter;
  double tol;
  double ridge;
} gpsm_fit_options;

GPSM_API void gpsm_fit_options_default(gpsm_fit_options* opts);
/* opts may be NULL for defaults. */
GPSM_API gpsm_status gpsm_fit(const gpsm_dataset* d, const gpsm_fit_options* opts,
                              gpsm_model** out);
GPSM_API gpsm_status gpsm_model_to_json(const gpsm_model* m, char** out);
GPSM_API gpsm_status gpsm_model_from_json(const char* json, gpsm_model** out);
GPSM_API int gpsm_model_iterations(const gpsm_model* m);
GPSM_API double gpsm_model_gradient_norm(const gpsm_model* m);
GPSM_API void gpsm_model_free(gpsm_model* m);

GPSM_API gpsm_status gpsm_predict(const gpsm_model* m, const gpsm_dataset* d,
                                  gpsm_scores** out);
GPSM_API size_t gpsm_scores_size(const gpsm_scores* s);
GPSM_API int gpsm_scores_levels(const gpsm_scores* s);
/* p(w|X_i); i is 0-based, w is 1-based. */
GPSM_API gpsm_status gpsm_scores_get(const gpsm_scores* s, size_t i, int w, double* out);
GPSM_API void gpsm_scores_free(gpsm_scores* s);

/* ---- trimming ---- */

GPSM_API gpsm_status gpsm_find_lambda(const double* g, size_t n, double* out);
/* opts is used for the refit and may be NULL. */
GPSM_API gpsm_status gpsm_trim(const gpsm_dataset* d, const gpsm_scores* s, int refit,
                               const gpsm_fit_options* opts, gpsm_trim_result** out);
GPSM_API double gpsm_trim_lambda(const gpsm_trim_result* t);
GPSM_API size_t gpsm_trim_dropped(const gpsm_trim_result* t);
GPSM_API gpsm_status gpsm_trim_to_json(const gpsm_trim_result* t, char** out);
GPSM_API gpsm_status gpsm_trim_mask_csv(const gpsm_trim_result* t, char** out);
/* New handles holding copies of the trimmed sample and its scores. */
GPSM_API gpsm_status gpsm_trim_dataset(const gpsm_trim_result* t, gpsm_dataset** out);
GPSM_API gpsm_status gpsm_trim_scores(const gpsm_trim_result* t, gpsm_scores** out);
/* Config error when the trim was run without refit. */
GPSM_API gpsm_status gpsm_trim_model(const gpsm_trim_result* t, gpsm_model** out);
GPSM_API void gpsm_trim_free(gpsm_trim_result* t);

/* ---- balance ---- */

/* Either output pointer may be NULL. */
GPSM_API gpsm_status gpsm_balance(const gpsm_dataset* d, const gpsm_scores* s, int bins,
                                  char** json, char** csv);

/* ---- estimation and inference ---- */

typedef struct gpsm_estimate_options {
  const char* const* methods; /* tags: DIF PPSM PSSM W COV GPSM GPSS */
  size_t n_methods;           /* 0 runs all seven */
  int subclasses;
  int clip_weights;
  double clip_floor;
  int horvitz_thompson;
  int trimmed_sample; /* tag results as computed on a trimmed sample */
  int intervals;
  double level;
  int bootstrap_reps;
  uint64_t seed;
  int gpsm_bootstrap;
  int workers;
  gpsm_fit_options fit;
} gpsm_estimate_options;

GPSM_API void gpsm_estimate_options_default(gpsm_estimate_options* opts);

typedef struct gpsm_effect {
  const char* method;     /* static string */
  const char* ci_method;  /* static string */
  const char* population; /* static string */
  int w;
  int w_prime;
  double tau_hat;
  double se; /* NaN without intervals */
  double ci_lo;
  double ci_hi;
  size_t n_used;
} gpsm_effect;

/* The model seeds bootstrap refits and produced the scores. */
GPSM_API gpsm_status gpsm_estimate(const gpsm_dataset* d, const gpsm_model* m,
                                   const gpsm_scores* s, const gpsm_estimate_options* opts,
                                   gpsm_estimates** out);
GPSM_API size_t gpsm_estimates_count(const gpsm_estimates* e);
GPSM_API gpsm_status gpsm_estimates_get(const gpsm_estimates* e, size_t index, gpsm_effect* out);
GPSM_API gpsm_status gpsm_estimates_to_csv(const gpsm_estimates* e, char** out);
GPSM_API gpsm_status gpsm_estimates_to_json(const gpsm_estimates* e, char** out);
GPSM_API void gpsm_estimates_free(gpsm_estimates* e);

/* ---- simulation ---- */

/* "design1" or "design2". */
GPSM_API gpsm_status gpsm_design_builtin(const char* name, gpsm_design** out);
GPSM_API gpsm_status gpsm_design_from_json(const char* json, gpsm_design** out);
GPSM_API gpsm_status gpsm_design_to_json(const gpsm_design* d, char** out);
/* 0 quota (exact arm sizes), 1 expected size. */
GPSM_API gpsm_status gpsm_design_set_mode(gpsm_design* d, int expected_size);
GPSM_API int gpsm_design_levels(const gpsm_design* d);
GPSM_API void gpsm_design_free(gpsm_design* d);

GPSM_API gpsm_status gpsm_simulate_dataset(const gpsm_design* d, uint64_t seed,
                                           gpsm_dataset** out);
GPSM_API gpsm_status gpsm_true_scores(const gpsm_design* design, const gpsm_dataset* d,
                                      gpsm_scores** out);

typedef enum gpsm_truth {
  GPSM_TRUTH_AUTO = -1,
  GPSM_TRUTH_SUPERPOPULATION = 0,
  GPSM_TRUTH_SAMPLED_POPULATION = 1
} gpsm_truth;

/* tau receives the T x T matrix row-major, tau[(w-1)*T + (w'-1)]. */
GPSM_API gpsm_status gpsm_true_effects(const gpsm_design* d, gpsm_truth truth, double* tau);

typedef struct gpsm_mc_options {
  const char* const* methods;
  size_t n_methods; /* 0 runs all seven */
  int reps;
  uint64_t seed;
  int workers;
  int bootstrap_reps;
  double level;
  int gpsm_bootstrap;
  gpsm_truth truth;
} gpsm_mc_options;

GPSM_API void gpsm_mc_options_default(gpsm_mc_options* opts);
GPSM_API gpsm_status gpsm_run_monte_carlo(const gpsm_design* d, const gpsm_mc_options* opts,
                                          gpsm_mc_summary** out);
/* Table layout: one row per method with bias, RMSE and coverage triples. */
GPSM_API gpsm_status gpsm_mc_summary_to_csv(const gpsm_mc_summary* s, char** out);
/* One row per (method, contrast). */
GPSM_API gpsm_status gpsm_mc_summary_to_long_csv(const gpsm_mc_summary* s, char** out);
GPSM_API gpsm_status gpsm_mc_summary_to_json(const gpsm_mc_summary* s, char** out);
GPSM_API void gpsm_mc_summary_free(gpsm_mc_summary* s);

#ifdef __cplusplus
}
#endif

#endif
