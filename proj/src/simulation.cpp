#include "gpsm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gpsm/error.hpp"
#include "gpsm/format.hpp"
#include "gpsm/parallel.hpp"
#include "gpsm/rng.hpp"

namespace gpsm {

namespace {

constexpr const char* kModule = "simulation";
constexpr Index kDrawCapFactor = 100;
constexpr std::size_t kMaxFailureMessages = 5;

using Row7 = Eigen::Matrix<double, 1, kSimCovariates>;

Row7 row7(std::initializer_list<double> v) {
  Row7 r;
  std::copy(v.begin(), v.end(), r.data());
  return r;
}

// Nodes and weights of an n-point Gauss rule from its Jacobi matrix
// (zero diagonal); weights are normalized to sum to one.
std::pair<Eigen::VectorXd, Eigen::VectorXd> golub_welsch(const Eigen::VectorXd& offdiag) {
  const Index n = offdiag.size() + 1;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (Index k = 0; k + 1 < n; ++k) {
    j(k, k + 1) = offdiag[k];
    j(k + 1, k) = offdiag[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
  Eigen::VectorXd w = eig.eigenvectors().row(0).transpose().array().square();
  return {eig.eigenvalues(), w / w.sum()};
}

// Expectation against the standard normal density.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  return golub_welsch(off);
}

// Trapezoid rule on [0, 9] for E[f(Z)], f even, Z standard normal.
std::pair<Eigen::VectorXd, Eigen::VectorXd> half_normal_trapezoid(int n) {
  const double h = 9.0 / static_cast<double>(n - 1);
  Eigen::VectorXd z(n), w(n);
  for (int j = 0; j < n; ++j) {
    z[j] = h * j;
    w[j] = (j == 0 ? 1.0 : 2.0) * std::exp(-0.5 * z[j] * z[j]);
  }
  return {z, w / w.sum()};
}

// Expectation against the uniform density on [-1, 1].
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    off[k - 1] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  return golub_welsch(off);
}

int categorical(const Eigen::VectorXd& probs, double u) {
  double acc = 0.0;
  const Index t = probs.size();
  for (Index a = 0; a + 1 < t; ++a) {
    acc += probs[a];
    if (u < acc) return static_cast<int>(a) + 1;
  }
  return static_cast<int>(t);
}

Eigen::VectorXd softmax_row(const Eigen::MatrixXd& beta, const Row7& x) {
  Eigen::VectorXd eta = beta * x.transpose();
  eta.array() -= eta.maxCoeff();
  eta = eta.array().exp();
  return eta / eta.sum();
}

std::uint64_t replicate_seed(std::uint64_t root, std::uint64_t r, int which) {
  Rng rng = stream_rng(root, stream::kReplicate, r);
  std::uint64_t v = rng();
  for (int k = 0; k < which; ++k) v = rng();
  return v;
}

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    out[i].assign(m.cols(), 0.0);
    for (Index k = 0; k < m.cols(); ++k) out[i][k] = m(i, k);
  }
  return out;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array() || j[field].empty()) {
    throw config_error(kModule, std::string("design field '") + field +
                                    "' must be a non-empty array of rows");
  }
  const auto& rows = j[field];
  Eigen::MatrixXd m(rows.size(), kSimCovariates);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != kSimCovariates) {
      throw config_error(kModule, std::string("design field '") + field + "' row " +
                                      std::to_string(i + 1) + " must hold " +
                                      std::to_string(kSimCovariates) + " numbers");
    }
    for (int k = 0; k < kSimCovariates; ++k) m(i, k) = rows[i][k].get<double>();
  }
  return m;
}

}  // namespace

Index SimulationDesign::total_size() const {
  return std::accumulate(arm_sizes.begin(), arm_sizes.end(), Index{0});
}

SimulationDesign design1() {
  SimulationDesign d;
  d.name = "design1";
  d.beta.resize(3, kSimCovariates);
  d.beta.row(0).setZero();
  d.beta.row(1) = 0.7 * row7({0, 1, 1, 1, -1, 1, 1});
  d.beta.row(2) = 0.4 * row7({0, 1, 1, 1, 1, 1, 1});
  d.gamma.resize(3, kSimCovariates);
  d.gamma.row(0) = row7({-1.5, 1, 1, 1, 1, 1, 1});
  d.gamma.row(1) = row7({-3, 2, 3, 1, 2, 2, 2});
  d.gamma.row(2) = row7({1.5, 3, 1, 2, -1, -1, -1});
  d.arm_sizes.assign(3, 500);
  return d;
}

SimulationDesign design2() {
  SimulationDesign d;
  d.name = "design2";
  d.beta.resize(6, kSimCovariates);
  d.beta.row(0).setZero();
  d.beta.row(1) = 0.4 * row7({0, 1, 1, 2, 1, 1, 1});
  d.beta.row(2) = 0.6 * row7({0, 1, 1, 1, 1, 1, -5});
  d.beta.row(3) = 0.8 * row7({0, 1, 1, 1, 1, 1, 5});
  d.beta.row(4) = 1.0 * row7({0, 1, 1, 1, -2, 1, 1});
  d.beta.row(5) = 1.2 * row7({0, 1, 1, 1, -2, -1, 1});
  d.gamma.resize(6, kSimCovariates);
  d.gamma.row(0) = row7({-1.5, 1, 1, 1, 1, 1, 1});
  d.gamma.row(1) = row7({-3, 2, 3, 1, 2, 2, 2});
  d.gamma.row(2) = row7({3, 3, 1, 2, -1, -1, -4});
  d.gamma.row(3) = row7({2.5, 4, 1, 2, -1, -1, -3});
  d.gamma.row(4) = row7({2, 5, 1, 2, -1, -1, -2});
  d.gamma.row(5) = row7({1.5, 6, 1, 2, -1, -1, -1});
  d.arm_sizes.assign(6, 1000);
  return d;
}

SimulationDesign builtin_design(const std::string& name) {
  if (name == "design1") return design1();
  if (name == "design2") return design2();
  throw config_error(kModule, "unknown design '" + name +
                                  "' (expected design1, design2 or a design JSON file)");
}

void validate(const SimulationDesign& d) {
  const Index t = d.beta.rows();
  if (t < 2) throw config_error(kModule, "a design needs at least two treatment levels");
  if (d.beta.cols() != kSimCovariates || d.gamma.cols() != kSimCovariates) {
    throw config_error(kModule, "beta and gamma must have 7 columns (intercept, X1..X6)");
  }
  if (d.gamma.rows() != t) throw config_error(kModule, "beta and gamma row counts differ");
  if (static_cast<Index>(d.arm_sizes.size()) != t) {
    throw config_error(kModule, "arm_sizes must list one target per level");
  }
  for (Index n : d.arm_sizes) {
    if (n < 2) throw config_error(kModule, "every arm target must be at least 2");
  }
  if (!d.beta.allFinite() || !d.gamma.allFinite()) {
    throw config_error(kModule, "design coefficients must be finite");
  }
  if (!(d.noise_sd >= 0.0) || !std::isfinite(d.noise_sd)) {
    throw config_error(kModule, "noise_sd must be finite and non-negative");
  }
}

SimulationDesign design_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(kModule, std::string("design JSON does not parse: ") + e.what());
  }
  SimulationDesign d;
  try {
    d.name = j.value("name", std::string("custom"));
    d.beta = matrix_from(j, "beta");
    d.gamma = matrix_from(j, "gamma");
    d.noise_sd = j.value("noise_sd", 1.0);
    if (!j.contains("arm_sizes")) throw config_error(kModule, "design field 'arm_sizes' is required");
    d.arm_sizes = j["arm_sizes"].get<std::vector<Index>>();
    const std::string mode = j.value("mode", std::string("quota"));
    if (mode == "quota") {
      d.mode = SizeMode::Quota;
    } else if (mode == "expected-size") {
      d.mode = SizeMode::ExpectedSize;
    } else {
      throw config_error(kModule, "design mode must be 'quota' or 'expected-size'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(kModule, std::string("malformed design: ") + e.what());
  }
  validate(d);
  return d;
}

std::string design_to_json(const SimulationDesign& d) {
  nlohmann::ordered_json j;
  j["name"] = d.name;
  j["beta"] = rows_of(d.beta);
  j["gamma"] = rows_of(d.gamma);
  j["noise_sd"] = d.noise_sd;
  j["arm_sizes"] = d.arm_sizes;
  j["mode"] = d.mode == SizeMode::Quota ? "quota" : "expected-size";
  return j.dump(2);
}

Eigen::Matrix3d normal_block_covariance() {
  Eigen::Matrix3d c;
  c << 2.0, 1.0, -1.0,
       1.0, 1.0, -0.5,
      -1.0, -0.5, 1.0;
  return c;
}

Dataset generate(const SimulationDesign& design, std::uint64_t seed) {
  validate(design);
  const int t = design.levels();
  const Index total = design.total_size();
  Rng rng = stream_rng(seed, stream::kGenerate, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> x4_law(-3.0, 3.0);
  std::bernoulli_distribution coin(0.5);
  const Eigen::Matrix3d chol = normal_block_covariance().llt().matrixL();

  Eigen::MatrixXd x(total, kSimCovariates);
  std::vector<int> w(total);
  Eigen::VectorXd y(total);
  std::vector<Index> filled(t, 0);
  Index n = 0;
  const Index cap = kDrawCapFactor * total;
  for (Index draw = 0; n < total; ++draw) {
    if (draw >= cap) {
      throw numerical_error(kModule, "arm quotas not filled after " + std::to_string(cap) +
                                         " draws; some arm is practically unreachable");
    }
    Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
    const Eigen::Vector3d x123 = chol * z;
    const double z5 = normal(rng);
    Row7 row;
    row << 1.0, x123[0], x123[1], x123[2], x4_law(rng), z5 * z5, coin(rng) ? 1.0 : 0.0;
    const int level = categorical(softmax_row(design.beta, row), unit(rng));
    if (design.mode == SizeMode::Quota && filled[level - 1] >= design.arm_sizes[level - 1]) {
      continue;
    }
    ++filled[level - 1];
    x.row(n) = row;
    w[n] = level;
    y[n] = design.gamma.row(level - 1).dot(row) + design.noise_sd * normal(rng);
    ++n;
  }

  std::vector<Index> order(total);
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Eigen::MatrixXd xs(total, kSimCovariates);
  std::vector<int> ws(total);
  Eigen::VectorXd ys(total);
  for (Index i = 0; i < total; ++i) {
    xs.row(i) = x.row(order[i]);
    ws[i] = w[order[i]];
    ys[i] = y[order[i]];
  }
  std::vector<std::string> labels;
  for (int a = 1; a <= t; ++a) labels.push_back(std::to_string(a));
  return Dataset(std::move(xs), std::move(ws), std::move(ys),
                 {"(intercept)", "X1", "X2", "X3", "X4", "X5", "X6"}, t, true,
                 std::move(labels));
}

ScoreMatrix true_scores(const SimulationDesign& design, const Dataset& d) {
  if (d.levels() != design.levels()) {
    throw config_error(kModule, "dataset and design have different level counts");
  }
  const Eigen::MatrixXd x = design_matrix(d);
  if (x.cols() != kSimCovariates) {
    throw config_error(kModule, "dataset does not have the design's covariates");
  }
  return softmax_scores(x, design.beta);
}

Eigen::VectorXd superpopulation_mean() {
  Eigen::VectorXd m(kSimCovariates);
  m << 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5;
  return m;
}

Eigen::MatrixXd conditional_means(const SimulationDesign& design, int points) {
  validate(design);
  if (points < 2) throw config_error(kModule, "quadrature needs at least 2 points");
  const int t = design.levels();
  const auto [hn, hw] = gauss_hermite(points);
  const auto [ln, lw] = gauss_legendre(points);
  const int zpoints = 5 * points;
  const auto [zn, zw] = half_normal_trapezoid(zpoints);
  const Eigen::Matrix3d chol = normal_block_covariance().llt().matrixL();
  const Eigen::MatrixXd& b = design.beta;

  // Linear predictor split by coordinate so the inner loops only add.
  Eigen::MatrixXd eta4(t, points), eta5(t, zpoints);
  for (int f = 0; f < points; ++f) eta4.col(f) = b.col(4) * (3.0 * ln[f]);
  for (int g = 0; g < zpoints; ++g) eta5.col(g) = b.col(5) * (zn[g] * zn[g]);

  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(t, kSimCovariates);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(t);
  std::vector<double> eta(t), p(t);
  // Per (X1, X2, X3) node: sums of weight * p_w times 1, X4, X5, X6.
  Eigen::MatrixXd inner(t, 4);
  for (int a = 0; a < points; ++a) {
    for (int c = 0; c < points; ++c) {
      for (int e = 0; e < points; ++e) {
        const Eigen::Vector3d x123 = chol * Eigen::Vector3d(hn[a], hn[c], hn[e]);
        const double w123 = hw[a] * hw[c] * hw[e];
        const Eigen::VectorXd base = b.col(0) + b.middleCols(1, 3) * x123;
        inner.setZero();
        for (int f = 0; f < points; ++f) {
          const double x4 = 3.0 * ln[f];
          for (int g = 0; g < zpoints; ++g) {
            const double x5 = zn[g] * zn[g];
            const double wfg = lw[f] * zw[g];
            for (int x6 = 0; x6 <= 1; ++x6) {
              double mx = -std::numeric_limits<double>::infinity();
              for (int lvl = 0; lvl < t; ++lvl) {
                eta[lvl] = base[lvl] + eta4(lvl, f) + eta5(lvl, g) + (x6 ? b(lvl, 6) : 0.0);
                mx = std::max(mx, eta[lvl]);
              }
              double sum = 0.0;
              for (int lvl = 0; lvl < t; ++lvl) {
                p[lvl] = std::exp(eta[lvl] - mx);
                sum += p[lvl];
              }
              const double scale = wfg / sum;
              for (int lvl = 0; lvl < t; ++lvl) {
                const double wp = scale * p[lvl];
                inner(lvl, 0) += wp;
                inner(lvl, 1) += wp * x4;
                inner(lvl, 2) += wp * x5;
                if (x6) inner(lvl, 3) += wp;
              }
            }
          }
        }
        for (int lvl = 0; lvl < t; ++lvl) {
          const double m0 = w123 * inner(lvl, 0);
          mass[lvl] += m0;
          moment(lvl, 0) += m0;
          for (int q = 0; q < 3; ++q) moment(lvl, 1 + q) += m0 * x123[q];
          moment(lvl, 4) += w123 * inner(lvl, 1);
          moment(lvl, 5) += w123 * inner(lvl, 2);
          moment(lvl, 6) += w123 * inner(lvl, 3);
        }
      }
    }
  }
  for (int lvl = 0; lvl < t; ++lvl) moment.row(lvl) /= mass[lvl];
  return moment;
}

std::string to_string(Truth t) {
  return t == Truth::Superpopulation ? "superpopulation" : "sampled-population";
}

Truth default_truth(const SimulationDesign& design) {
  return design.mode == SizeMode::Quota ? Truth::SampledPopulation : Truth::Superpopulation;
}

TrueEffects true_effects(const SimulationDesign& design, Truth kind, int points) {
  validate(design);
  TrueEffects te;
  te.kind = kind;
  if (kind == Truth::Superpopulation) {
    te.covariate_mean = superpopulation_mean();
  } else {
    const Eigen::MatrixXd cm = conditional_means(design, points);
    te.covariate_mean = Eigen::VectorXd::Zero(kSimCovariates);
    const double total = static_cast<double>(design.total_size());
    for (int lvl = 0; lvl < design.levels(); ++lvl) {
      te.covariate_mean += (static_cast<double>(design.arm_sizes[lvl]) / total) *
                           cm.row(lvl).transpose();
    }
  }
  const Eigen::VectorXd mu = design.gamma * te.covariate_mean;
  const int t = design.levels();
  te.tau.resize(t, t);
  for (int a = 0; a < t; ++a) {
    for (int c = 0; c < t; ++c) te.tau(a, c) = mu[c] - mu[a];
  }
  return te;
}

ContrastScore score_summary(std::span<const ReplicateEstimate> estimates, double truth) {
  ContrastScore s;
  s.truth = truth;
  s.replicates = static_cast<int>(estimates.size());
  if (estimates.empty()) {
    s.bias = s.rmse = s.variance = s.coverage = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double r = static_cast<double>(estimates.size());
  double mean = 0.0;
  double sq = 0.0;
  double covered = 0.0;
  bool intervals = true;
  for (const auto& e : estimates) {
    mean += e.tau_hat;
    sq += (e.tau_hat - truth) * (e.tau_hat - truth);
    if (std::isnan(e.ci_lo) || std::isnan(e.ci_hi)) intervals = false;
    if (e.ci_lo <= truth && truth <= e.ci_hi) covered += 1.0;
  }
  mean /= r;
  double var = 0.0;
  for (const auto& e : estimates) var += (e.tau_hat - mean) * (e.tau_hat - mean);
  s.bias = mean - truth;
  s.rmse = std::sqrt(sq / r);
  s.variance = var / r;
  s.coverage = intervals ? covered / r : std::numeric_limits<double>::quiet_NaN();
  return s;
}

namespace {

struct ReplicateOutcome {
  // outcome[k] holds one entry per contrast, or is empty with a message.
  std::vector<std::vector<ReplicateEstimate>> per_method;
  std::vector<std::string> errors;
};

bool uses_scores(Method m) {
  return m == Method::W || m == Method::GPSM || m == Method::GPSS || m == Method::PSSM;
}

std::vector<ReplicateEstimate> collect(const EstimateSet& set,
                                       const std::vector<std::pair<int, int>>& pairs) {
  std::vector<ReplicateEstimate> out;
  for (auto [a, b] : pairs) {
    const auto& e = set.effect(a, b);
    out.push_back({e.tau_hat, e.ci_lo, e.ci_hi});
  }
  return out;
}

ReplicateOutcome run_replicate(const SimulationDesign& design, const MonteCarloOptions& opts,
                               std::size_t r) {
  const std::size_t nm = opts.methods.size();
  ReplicateOutcome out;
  out.per_method.resize(nm);
  out.errors.resize(nm);
  const auto pairs = contrast_pairs(design.levels());

  std::optional<Dataset> data;
  try {
    data.emplace(generate(design, replicate_seed(opts.seed, r, 0)));
  } catch (const Error& e) {
    for (auto& msg : out.errors) msg = e.what();
    return out;
  }

  GpsModel model;
  ScoreMatrix scores;
  std::string fit_error;
  try {
    model = fit_multinomial_logit(*data, opts.inference.fit);
    scores = predict_scores(model, *data);
  } catch (const Error& e) {
    fit_error = e.what();
  }

  InferenceOptions inf = opts.inference;
  inf.bootstrap.seed = replicate_seed(opts.seed, r, 1);
  inf.workers = 1;

  std::vector<Method> runnable;
  std::vector<std::size_t> slot;
  for (std::size_t k = 0; k < nm; ++k) {
    if (!fit_error.empty() && uses_scores(opts.methods[k])) {
      out.errors[k] = fit_error;
    } else {
      runnable.push_back(opts.methods[k]);
      slot.push_back(k);
    }
  }
  if (runnable.empty()) return out;

  try {
    const auto results = estimate_with_inference(*data, model, scores, runnable, inf);
    for (std::size_t j = 0; j < results.size(); ++j) {
      out.per_method[slot[j]] = collect(results[j].estimates, pairs);
    }
    return out;
  } catch (const Error&) {
    // Isolate the failing method(s) by running each on its own.
  }
  for (std::size_t j = 0; j < runnable.size(); ++j) {
    try {
      const Method one[] = {runnable[j]};
      const auto results = estimate_with_inference(*data, model, scores, one, inf);
      out.per_method[slot[j]] = collect(results[0].estimates, pairs);
    } catch (const Error& e) {
      out.errors[slot[j]] = e.what();
    }
  }
  return out;
}

}  // namespace

MonteCarloSummary run_monte_carlo(const SimulationDesign& design,
                                  const MonteCarloOptions& opts) {
  validate(design);
  if (opts.reps < 1) throw config_error(kModule, "reps must be at least 1");
  if (opts.methods.empty()) throw config_error(kModule, "no estimators requested");
  if (opts.workers < 1) throw config_error(kModule, "workers must be at least 1");

  MonteCarloSummary summary;
  summary.design = design.name;
  summary.reps = opts.reps;
  summary.seed = opts.seed;
  summary.truth = true_effects(
      design, opts.truth_from_mode ? default_truth(design) : opts.truth, opts.quadrature_points);

  const std::size_t reps = static_cast<std::size_t>(opts.reps);
  std::vector<ReplicateOutcome> outcomes(reps);
  parallel_for(reps, opts.workers,
               [&](std::size_t r) { outcomes[r] = run_replicate(design, opts, r); });

  const auto pairs = contrast_pairs(design.levels());
  for (std::size_t k = 0; k < opts.methods.size(); ++k) {
    MethodSummary ms;
    ms.method = opts.methods[k];
    ms.ci_method = default_ci_method(ms.method, opts.inference.gpsm_bootstrap);
    for (const auto& o : outcomes) {
      if (o.per_method[k].empty()) {
        ++ms.failed;
        if (ms.failure_messages.size() < kMaxFailureMessages &&
            std::find(ms.failure_messages.begin(), ms.failure_messages.end(), o.errors[k]) ==
                ms.failure_messages.end()) {
          ms.failure_messages.push_back(o.errors[k]);
        }
      }
    }
    ms.unreliable = ms.failed > 0.05 * opts.reps;
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      std::vector<ReplicateEstimate> column;
      for (const auto& o : outcomes) {
        if (!o.per_method[k].empty()) column.push_back(o.per_method[k][c]);
      }
      auto score = score_summary(column, summary.truth(pairs[c].first, pairs[c].second));
      score.w = pairs[c].first;
      score.w_prime = pairs[c].second;
      ms.contrasts.push_back(score);
    }
    summary.methods.push_back(std::move(ms));
  }
  return summary;
}

std::string summary_to_csv(const MonteCarloSummary& s) {
  std::ostringstream out;
  out << "method,ci_method";
  if (!s.methods.empty()) {
    for (const char* metric : {"bias", "rmse", "coverage"}) {
      for (const auto& c : s.methods.front().contrasts) {
        out << ',' << metric << '_' << c.w << '_' << c.w_prime;
      }
    }
  }
  out << ",replicates,failed,unreliable\n";
  for (const auto& m : s.methods) {
    out << to_string(m.method) << ',' << to_string(m.ci_method);
    for (const auto& c : m.contrasts) out << ',' << format_double(c.bias);
    for (const auto& c : m.contrasts) out << ',' << format_double(c.rmse);
    for (const auto& c : m.contrasts) out << ',' << format_double(c.coverage);
    out << ',' << s.reps << ',' << m.failed << ',' << (m.unreliable ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string summary_to_long_csv(const MonteCarloSummary& s) {
  std::ostringstream out;
  out << "method,w,w_prime,truth,bias,rmse,variance,coverage,replicates\n";
  for (const auto& m : s.methods) {
    for (const auto& c : m.contrasts) {
      out << to_string(m.method) << ',' << c.w << ',' << c.w_prime << ','
          << format_double(c.truth) << ',' << format_double(c.bias) << ','
          << format_double(c.rmse) << ',' << format_double(c.variance) << ','
          << format_double(c.coverage) << ',' << c.replicates << '\n';
    }
  }
  return out.str();
}

std::string summary_to_json(const MonteCarloSummary& s) {
  nlohmann::ordered_json j;
  j["design"] = s.design;
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  nlohmann::ordered_json truth;
  truth["kind"] = to_string(s.truth.kind);
  truth["covariate_mean"] =
      std::vector<double>(s.truth.covariate_mean.data(),
                          s.truth.covariate_mean.data() + s.truth.covariate_mean.size());
  auto effects = nlohmann::ordered_json::array();
  for (auto [a, b] : contrast_pairs(static_cast<int>(s.truth.tau.rows()))) {
    effects.push_back({{"w", a}, {"w_prime", b}, {"tau", s.truth(a, b)}});
  }
  truth["effects"] = std::move(effects);
  j["truth"] = std::move(truth);
  auto methods = nlohmann::ordered_json::array();
  for (const auto& m : s.methods) {
    nlohmann::ordered_json e;
    e["method"] = to_string(m.method);
    e["ci_method"] = to_string(m.ci_method);
    e["failed"] = m.failed;
    e["unreliable"] = m.unreliable;
    e["failure_messages"] = m.failure_messages;
    auto cs = nlohmann::ordered_json::array();
    for (const auto& c : m.contrasts) {
      nlohmann::ordered_json ce;
      ce["w"] = c.w;
      ce["w_prime"] = c.w_prime;
      ce["truth"] = c.truth;
      ce["bias"] = number_or_null(c.bias);
      ce["rmse"] = number_or_null(c.rmse);
      ce["variance"] = number_or_null(c.variance);
      ce["coverage"] = number_or_null(c.coverage);
      ce["replicates"] = c.replicates;
      cs.push_back(std::move(ce));
    }
    e["contrasts"] = std::move(cs);
    methods.push_back(std::move(e));
  }
  j["methods"] = std::move(methods);
  return j.dump(2) + "\n";
}

}  // namespace gpsm
