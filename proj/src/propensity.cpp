#include "stratipw/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "stratipw/errors.hpp"

namespace stratipw {

namespace {

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Bernoulli deviance, -2 log L, computed stably from the linear predictor.
double deviance_of(const Eigen::VectorXd& eta, const Eigen::VectorXd& z) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += z[i] * eta[i] - log1pexp(eta[i]);
  return -2.0 * ll;
}

Eigen::VectorXd logistic(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
}

std::string column_name(const std::vector<std::string>& labels, Eigen::Index j) {
  if (j >= 0 && static_cast<std::size_t>(j) < labels.size()) return labels[j];
  return "column " + std::to_string(j);
}

}  // namespace

PropensityFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                           const std::vector<std::string>& term_labels,
                           const FitOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (z.size() != n) throw ValidationError("response length does not match design rows");
  for (Eigen::Index i = 0; i < n; ++i)
    if (z[i] != 0.0 && z[i] != 1.0)
      throw ValidationError("response values must be 0 or 1");

  const double z_sum = z.sum();
  if (z_sum == 0.0 || z_sum == static_cast<double>(n))
    throw DegenerateResponseError("response is all " + std::string(z_sum == 0.0 ? "0" : "1") +
                                  "; the propensity model is not estimable");
  if (n < p)
    throw RankDeficiencyError({}, "more model terms (" + std::to_string(p) + ") than records (" +
                                      std::to_string(n) +
                                      "); simplify the model for this stratum");

  // Internal standardization: center and scale non-constant columns. Means are
  // only removed when an all-ones column exists to absorb them.
  Eigen::Index intercept_col = -1;
  for (Eigen::Index j = 0; j < p && intercept_col < 0; ++j)
    if ((X.col(j).array() == 1.0).all()) intercept_col = j;

  Eigen::VectorXd center = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd Xs = X;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (j == intercept_col) continue;
    const double mean = X.col(j).mean();
    const double sd = std::sqrt((X.col(j).array() - mean).square().sum() / std::max<double>(1, n - 1));
    if (sd > 0.0) {
      center[j] = intercept_col >= 0 ? mean : 0.0;
      scale[j] = sd;
      Xs.col(j) = (X.col(j).array() - center[j]) / scale[j];
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu = logistic(eta);
  double dev = deviance_of(eta, z);

  PropensityFit fit;
  fit.deviance_history.push_back(dev);

  auto back_transform = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd out = b;
    double intercept_shift = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (j == intercept_col) continue;
      out[j] = b[j] / scale[j];
      intercept_shift += b[j] * center[j] / scale[j];
    }
    if (intercept_col >= 0) out[intercept_col] -= intercept_shift;
    return out;
  };

  bool converged = false;
  int iter = 0;
  while (iter < options.max_iterations) {
    if ((Xs.transpose() * (z - mu)).cwiseAbs().maxCoeff() < options.gradient_tol) {
      converged = true;
      break;
    }

    // Weighted least-squares step: delta solves (X'WX) delta = X'(z - mu).
    Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10);
    Eigen::VectorXd sqrt_w = w.cwiseSqrt();
    Eigen::MatrixXd A = sqrt_w.asDiagonal() * Xs;
    Eigen::VectorXd b = (z - mu).cwiseQuotient(sqrt_w);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < p) {
      std::vector<std::string> collinear;
      const auto perm = qr.colsPermutation().indices();
      for (Eigen::Index k = qr.rank(); k < p; ++k)
        collinear.push_back(column_name(term_labels, perm[k]));
      std::string msg = "singular weighted normal equations; collinear terms:";
      for (const std::string& c : collinear) msg += " " + c;
      throw RankDeficiencyError(collinear, msg);
    }
    Eigen::VectorXd delta = qr.solve(b);

    // Step-halving keeps the deviance non-increasing, up to the rounding
    // noise of the deviance sum itself near the optimum.
    const double slack = 1e-10 * (1.0 + std::abs(dev));
    double step = 1.0;
    Eigen::VectorXd beta_new, eta_new;
    double dev_new = dev;
    bool accepted = false;
    for (int h = 0; h <= options.max_step_halvings; ++h) {
      beta_new = beta + step * delta;
      eta_new = Xs * beta_new;
      dev_new = deviance_of(eta_new, z);
      if (dev_new <= dev + slack) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled; convergence is checked below

    const double dev_change = dev - dev_new;
    beta = beta_new;
    eta = eta_new;
    mu = logistic(eta);
    dev = dev_new;
    ++iter;
    fit.deviance_history.push_back(dev);

    const double grad_norm = (Xs.transpose() * (z - mu)).cwiseAbs().maxCoeff();
    if (std::abs(dev_change) < options.deviance_tol && grad_norm < options.gradient_tol) {
      converged = true;
      break;
    }
  }

  if (!converged) {
    // Reaching the iteration cap or stalling the line search with a negligible
    // gradient is numerical convergence; anything else is reported.
    const double grad_norm = (Xs.transpose() * (z - mu)).cwiseAbs().maxCoeff();
    converged = grad_norm < 1e-6;
    if (!converged) {
      const Eigen::VectorXd last = back_transform(beta);
      throw NonConvergenceError(
          std::vector<double>(last.data(), last.data() + last.size()),
          "IRLS did not converge after " + std::to_string(iter) + " iterations");
    }
  }

  fit.coefficients = back_transform(beta);
  fit.term_labels = term_labels;
  fit.converged = true;
  fit.iterations = iter;
  fit.deviance = dev;

  const double eps = options.score_clamp;
  fit.scores = logistic(eta);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (fit.scores[i] < eps || fit.scores[i] > 1.0 - eps) {
      ++fit.n_clamped_scores;
      fit.scores[i] = std::clamp(fit.scores[i], eps, 1.0 - eps);
    }
  }
  fit.separation_warning = fit.n_clamped_scores > 0;
  return fit;
}

Eigen::VectorXd predict_scores(const PropensityFit& fit, const Eigen::MatrixXd& X) {
  if (X.cols() != fit.coefficients.size())
    throw ValidationError("design has " + std::to_string(X.cols()) + " columns, fit has " +
                          std::to_string(fit.coefficients.size()) + " coefficients");
  const double eps = FitOptions{}.score_clamp;
  Eigen::VectorXd scores = logistic(X * fit.coefficients);
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    scores[i] = std::clamp(scores[i], eps, 1.0 - eps);
  return scores;
}

}  // namespace stratipw
