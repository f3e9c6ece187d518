#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace stratipw {

struct FitOptions {
  int max_iterations = 50;
  double deviance_tol = 1e-8;   // |deviance change| between accepted steps
  double gradient_tol = 1e-10;  // max-norm of the score equations (standardized scale)
  int max_step_halvings = 10;
  double score_clamp = 1e-6;  // fitted probabilities clamped to [eps, 1-eps]
};

struct PropensityFit {
  Eigen::VectorXd coefficients;
  std::vector<std::string> term_labels;  // empty when the caller gave none
  Eigen::VectorXd scores;                // logit^-1(X beta), clamped to (0,1)
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  bool separation_warning = false;
  int n_clamped_scores = 0;
  std::vector<double> deviance_history;  // deviance after each accepted step
};

/// Maximum-likelihood logistic regression via iteratively reweighted least
/// squares with step-halving. Columns are standardized internally for
/// conditioning; reported coefficients are on the original scale.
PropensityFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                           const std::vector<std::string>& term_labels = {},
                           const FitOptions& options = {});

/// Elementwise logit^-1(X beta), clamped to [eps, 1-eps].
Eigen::VectorXd predict_scores(const PropensityFit& fit, const Eigen::MatrixXd& X);

}  // namespace stratipw
