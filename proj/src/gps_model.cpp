#include "gpsm/gps_model.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace gpsm {

namespace {

constexpr const char* kModule = "gps_model";
constexpr double kSeparationNorm = 1e4;
constexpr double kRelativeLogLikTol = 1e-12;
constexpr int kMaxHalvings = 50;
constexpr double kSeparationCondition = 1e-12;
constexpr double kSeparationStep = 1e-3;
constexpr double kShiftAbove = 300.0;

// Linear predictors for the non-reference levels, probabilities for all
// levels and the log-likelihood in one pass over the rows.
struct Evaluation {
  Eigen::MatrixXd probs;  // N x T
  double loglik = 0.0;    // unpenalized
};

Evaluation evaluate(const Eigen::MatrixXd& x, const std::vector<int>& w,
                    const Eigen::MatrixXd& beta) {
  const Index n = x.rows();
  const Index tm1 = beta.rows();
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, tm1);
  for (Index a = 0; a < tm1; ++a) {
    for (Index j = 0; j < x.cols(); ++j) eta.col(a) += beta(a, j) * x.col(j);
  }
  Evaluation ev;
  ev.probs.resize(n, tm1 + 1);
  double e[64];
  std::vector<double> heap;
  double* ex = e;
  if (tm1 + 1 > 64) {
    heap.resize(tm1 + 1);
    ex = heap.data();
  }
  for (Index i = 0; i < n; ++i) {
    double mx = 0.0;
    for (Index a = 0; a < tm1; ++a) mx = std::max(mx, eta(i, a));
    // Shift by the largest predictor only when exp could overflow.
    const double shift = mx > kShiftAbove ? mx : 0.0;
    ex[tm1] = shift > 0.0 ? std::exp(-shift) : 1.0;
    double denom = ex[tm1];
    for (Index a = 0; a < tm1; ++a) {
      ex[a] = std::exp(eta(i, a) - shift);
      denom += ex[a];
    }
    const double inv = 1.0 / denom;
    for (Index a = 0; a <= tm1; ++a) ev.probs(i, a) = ex[a] * inv;
    const int level = w[i];
    const double own = level <= tm1 ? eta(i, level - 1) : 0.0;
    ev.loglik += own - (shift + std::log(denom));
  }
  return ev;
}

Eigen::MatrixXd score(const Eigen::MatrixXd& x, const std::vector<int>& w,
                      const Eigen::MatrixXd& probs, const Eigen::MatrixXd& beta,
                      double ridge) {
  const Index tm1 = beta.rows();
  Eigen::MatrixXd resid = -probs.leftCols(tm1);
  for (Index i = 0; i < x.rows(); ++i) {
    if (w[i] <= tm1) resid(i, w[i] - 1) += 1.0;
  }
  Eigen::MatrixXd g = resid.transpose().lazyProduct(x);
  if (ridge > 0.0) g -= ridge * beta;
  return g;
}

// Products x_ij * x_il (j <= l) for every row, so each Hessian block is a
// weighted column sum of one fixed matrix.
struct RowProducts {
  Eigen::MatrixXd outer;  // N x K(K+1)/2
  std::vector<std::pair<Index, Index>> pairs;

  explicit RowProducts(const Eigen::MatrixXd& x) {
    const Index k = x.cols();
    for (Index j = 0; j < k; ++j) {
      for (Index l = j; l < k; ++l) pairs.emplace_back(j, l);
    }
    outer.resize(x.rows(), static_cast<Index>(pairs.size()));
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      outer.col(static_cast<Index>(c)) =
          x.col(pairs[c].first).cwiseProduct(x.col(pairs[c].second));
    }
  }
};

// Negative Hessian of the penalized log-likelihood, parameters ordered
// level-major (a * K + k).
Eigen::MatrixXd information(const RowProducts& rp, Index k,
                            const Eigen::MatrixXd& probs, Index tm1,
                            double ridge) {
  const Index blocks = tm1 * (tm1 + 1) / 2;
  Eigen::MatrixXd wts(probs.rows(), blocks);
  Index c = 0;
  for (Index a = 0; a < tm1; ++a) {
    for (Index b = 0; b <= a; ++b, ++c) {
      if (a == b) {
        wts.col(c) = probs.col(a).array() * (1.0 - probs.col(a).array());
      } else {
        wts.col(c) = -probs.col(a).array() * probs.col(b).array();
      }
    }
  }
  // pairs x blocks; a plain dot product per entry beats GEMM packing here.
  const Eigen::MatrixXd sums = rp.outer.transpose().lazyProduct(wts);
  Eigen::MatrixXd info(tm1 * k, tm1 * k);
  c = 0;
  for (Index a = 0; a < tm1; ++a) {
    for (Index b = 0; b <= a; ++b, ++c) {
      for (std::size_t q = 0; q < rp.pairs.size(); ++q) {
        const auto [j, l] = rp.pairs[q];
        const double v = sums(static_cast<Index>(q), c);
        info(a * k + j, b * k + l) = v;
        info(a * k + l, b * k + j) = v;
        info(b * k + j, a * k + l) = v;
        info(b * k + l, a * k + j) = v;
      }
    }
  }
  if (ridge > 0.0) info.diagonal().array() += ridge;
  return info;
}

double penalized(double loglik, const Eigen::MatrixXd& beta, double ridge) {
  return ridge > 0.0 ? loglik - 0.5 * ridge * beta.squaredNorm() : loglik;
}

}  // namespace

Eigen::MatrixXd design_matrix(const Dataset& d) {
  if (d.has_intercept()) return d.covariates();
  Eigen::MatrixXd x(d.size(), d.covariate_count() + 1);
  x.col(0).setOnes();
  x.rightCols(d.covariate_count()) = d.covariates();
  return x;
}

LogLikGradient multinomial_loglik(const Eigen::MatrixXd& design,
                                  const std::vector<int>& treatment,
                                  const Eigen::MatrixXd& coefficients,
                                  double ridge) {
  const auto ev = evaluate(design, treatment, coefficients);
  return {penalized(ev.loglik, coefficients, ridge),
          score(design, treatment, ev.probs, coefficients, ridge)};
}

GpsModel fit_multinomial_logit(const Dataset& d, const FitOptions& opts,
                               const Eigen::MatrixXd& start) {
  if (opts.max_iter < 1) throw config_error(kModule, "max_iter must be >= 1");
  if (!(opts.tol > 0.0)) throw config_error(kModule, "tol must be positive");
  if (opts.ridge < 0.0) throw config_error(kModule, "ridge must be >= 0");
  if (d.levels() < 2) {
    throw data_error(kModule, "at least two treatment levels are required");
  }

  const Eigen::MatrixXd x = design_matrix(d);
  const auto& w = d.treatment();
  const Index tm1 = d.levels() - 1;
  const Index k = x.cols();
  const RowProducts products(x);

  GpsModel model;
  model.intercept_added = !d.has_intercept();
  model.covariate_names = d.covariate_names();
  if (model.intercept_added) {
    model.covariate_names.insert(model.covariate_names.begin(), "(intercept)");
  }
  if (d.size() <= k * tm1) {
    model.warnings.push_back("N = " + std::to_string(d.size()) +
                             " does not exceed the parameter count " +
                             std::to_string(k * tm1));
  }

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(tm1, k);
  if (start.size() > 0) {
    if (start.rows() != tm1 || start.cols() != k) {
      throw config_error(kModule, "starting coefficients have wrong shape");
    }
    beta = start;
  }

  auto ev = evaluate(x, w, beta);
  double obj = penalized(ev.loglik, beta, opts.ridge);
  Eigen::MatrixXd grad = score(x, w, ev.probs, beta, opts.ridge);
  double gnorm = grad.cwiseAbs().maxCoeff();
  int it = 0;
  bool converged = gnorm < opts.tol;
  Eigen::MatrixXd info;

  while (!converged && it < opts.max_iter) {
    info = information(products, k, ev.probs, tm1, opts.ridge);
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      throw FitError(
          "information matrix is not positive definite (collinear covariates "
          "or separation); consider pruning covariates or setting ridge > 0",
          beta, gnorm);
    }
    Eigen::VectorXd g_flat(tm1 * k);
    for (Index a = 0; a < tm1; ++a) g_flat.segment(a * k, k) = grad.row(a).transpose();
    const Eigen::VectorXd step_flat = llt.solve(g_flat);
    Eigen::MatrixXd step(tm1, k);
    for (Index a = 0; a < tm1; ++a) step.row(a) = step_flat.segment(a * k, k).transpose();

    double t = 1.0;
    bool accepted = false;
    Eigen::MatrixXd next;
    Evaluation next_ev;
    double next_obj = 0.0;
    const double slack = 1e-13 * std::max(1.0, std::abs(obj));
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      next = beta + t * step;
      next_ev = evaluate(x, w, next);
      next_obj = penalized(next_ev.loglik, next, opts.ridge);
      if (std::isfinite(next_obj) && next_obj >= obj - slack) {
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted) break;  // numerically stationary

    const double rel = std::abs(next_obj - obj) / std::max(1.0, std::abs(obj));
    beta = std::move(next);
    ev = std::move(next_ev);
    obj = next_obj;
    grad = score(x, w, ev.probs, beta, opts.ridge);
    gnorm = grad.cwiseAbs().maxCoeff();

    if (opts.ridge == 0.0 && beta.cwiseAbs().maxCoeff() > kSeparationNorm) {
      throw SeparationError(
          "coefficients diverge (max |beta| > 1e4): complete or quasi-complete "
          "separation detected; refit with ridge > 0",
          beta, gnorm);
    }
    converged = gnorm < opts.tol || rel < kRelativeLogLikTol;
  }

  if (!converged) {
    throw FitError("no convergence after " + std::to_string(it) +
                       " Newton iterations (gradient max-norm " +
                       std::to_string(gnorm) + ")",
                   beta, gnorm);
  }
  {
    // Separation check (ridge 0 only) and one polishing step, kept only if it
    // shrinks the score. The information from the last iteration is close
    // enough to the converged point for both.
    if (info.size() == 0) info = information(products, k, ev.probs, tm1, opts.ridge);
    Eigen::VectorXd g_flat(tm1 * k);
    for (Index a = 0; a < tm1; ++a) g_flat.segment(a * k, k) = grad.row(a).transpose();
    Eigen::VectorXd step_flat;
    if (opts.ridge == 0.0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
      const double hi = eig.eigenvalues().maxCoeff();
      const double lo = eig.eigenvalues().minCoeff();
      // Separation: degenerate information, or a Newton step that stays large
      // at a vanishing gradient.
      const bool degenerate = !(hi > 0.0) || lo <= kSeparationCondition * hi;
      if (!degenerate) step_flat = info.ldlt().solve(g_flat);
      if (degenerate || step_flat.cwiseAbs().maxCoeff() > kSeparationStep) {
        throw SeparationError(
            "information matrix is degenerate at the optimum: complete or "
            "quasi-complete separation (or collinear covariates); refit with "
            "ridge > 0",
            beta, gnorm);
      }
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(info);
      if (llt.info() == Eigen::Success) step_flat = llt.solve(g_flat);
    }
    if (step_flat.size() > 0) {
      Eigen::MatrixXd next = beta;
      for (Index a = 0; a < tm1; ++a) next.row(a) += step_flat.segment(a * k, k).transpose();
      auto next_ev = evaluate(x, w, next);
      Eigen::MatrixXd next_grad = score(x, w, next_ev.probs, next, opts.ridge);
      const double next_norm = next_grad.cwiseAbs().maxCoeff();
      if (std::isfinite(next_norm) && next_norm < gnorm) {
        beta = std::move(next);
        ev = std::move(next_ev);
        grad = std::move(next_grad);
        gnorm = next_norm;
      }
    }
  }

  model.coefficients = std::move(beta);
  model.converged = true;
  model.iterations = it;
  model.log_likelihood = ev.loglik;
  model.gradient_norm = gnorm;
  return model;
}

ScoreMatrix softmax_scores(const Eigen::MatrixXd& design,
                           const Eigen::MatrixXd& beta_all_levels) {
  if (design.cols() != beta_all_levels.cols()) {
    throw data_error(kModule, "design has " + std::to_string(design.cols()) +
                                  " columns, coefficients expect " +
                                  std::to_string(beta_all_levels.cols()));
  }
  Eigen::MatrixXd eta = design * beta_all_levels.transpose();
  for (Index i = 0; i < eta.rows(); ++i) {
    const double mx = eta.row(i).maxCoeff();
    eta.row(i) = (eta.row(i).array() - mx).exp();
    eta.row(i) /= eta.row(i).sum();
  }
  return ScoreMatrix{std::move(eta)};
}

ScoreMatrix predict_scores(const GpsModel& m, const Dataset& d) {
  Eigen::MatrixXd design;
  if (m.intercept_added) {
    if (d.has_intercept()) {
      throw data_error(kModule,
                       "model was fit without an intercept column but dataset "
                       "carries one");
    }
    design = design_matrix(d);
  } else {
    design = d.covariates();
  }
  if (design.cols() != m.covariate_count()) {
    throw data_error(kModule, "dataset has " + std::to_string(design.cols()) +
                                  " design columns, model expects " +
                                  std::to_string(m.covariate_count()));
  }
  Eigen::MatrixXd all(m.levels(), m.covariate_count());
  all.topRows(m.levels() - 1) = m.coefficients;
  all.row(m.levels() - 1).setZero();
  return softmax_scores(design, all);
}

std::string model_to_json(const GpsModel& m) {
  nlohmann::ordered_json j;
  j["T"] = m.levels();
  j["K"] = m.covariate_count();
  j["covariate_names"] = m.covariate_names;
  std::vector<double> coef;
  coef.reserve(m.coefficients.size());
  for (Index a = 0; a < m.coefficients.rows(); ++a) {
    for (Index c = 0; c < m.coefficients.cols(); ++c) coef.push_back(m.coefficients(a, c));
  }
  j["coefficients"] = coef;
  j["intercept_added"] = m.intercept_added;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  j["log_likelihood"] = m.log_likelihood;
  j["gradient_norm"] = m.gradient_norm;
  return j.dump(2);
}

GpsModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(kModule, std::string("invalid model JSON: ") + e.what());
  }
  try {
    GpsModel m;
    const int t = j.at("T").get<int>();
    const Index k = j.at("K").get<Index>();
    const auto coef = j.at("coefficients").get<std::vector<double>>();
    if (t < 2 || k < 1 || static_cast<Index>(coef.size()) != (t - 1) * k) {
      throw config_error(kModule, "model JSON dimensions are inconsistent");
    }
    m.coefficients.resize(t - 1, k);
    for (Index a = 0; a < t - 1; ++a) {
      for (Index c = 0; c < k; ++c) m.coefficients(a, c) = coef[a * k + c];
    }
    m.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
    m.intercept_added = j.value("intercept_added", false);
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.value("iterations", 0);
    m.log_likelihood = j.at("log_likelihood").get<double>();
    m.gradient_norm = j.value("gradient_norm", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(kModule, std::string("invalid model JSON: ") + e.what());
  }
}

}  // namespace gpsm
