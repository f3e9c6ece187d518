#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stratipw/cohort.hpp"
#include "stratipw/weights.hpp"

namespace stratipw {

struct EffectEstimate {
  std::string estimand;  // "ATE-marginal", "conditional", "stratum:<label>"
  double point = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;  // 95%
  std::string method;    // "sandwich" | "bootstrap"
  std::optional<int> n_boot;
  std::optional<int> boot_failures;
};

struct WlsFit {
  Eigen::VectorXd coefficients;
  std::vector<std::string> labels;  // "intercept", "Z", extras...
  Eigen::VectorXd residuals;
  Eigen::MatrixXd design;
  Eigen::VectorXd weights;
  Eigen::MatrixXd bread;  // (X' W X)^-1
};

/// Weighted exposed mean minus weighted unexposed mean.
double ate_weighted_difference(const std::vector<double>& y, const std::vector<int>& z,
                               const std::vector<double>& w);

/// Weighted least squares of y on (intercept, Z, extras). With no extras the
/// Z coefficient equals ate_weighted_difference exactly.
WlsFit weighted_outcome_regression(const std::vector<double>& y, const std::vector<int>& z,
                                   const std::vector<double>& w,
                                   const std::vector<std::vector<double>>& extras = {},
                                   const std::vector<std::string>& extra_labels = {});

/// HC0 sandwich standard error for one coefficient (default: Z).
double sandwich_se(const WlsFit& fit, std::size_t coefficient_index = 1);

/// Point estimate + sandwich SE + normal 95% CI for the Z coefficient.
/// The estimand is "conditional" when extra covariates were included.
EffectEstimate sandwich_effect(const Cohort& cohort, const std::vector<double>& w,
                               const std::vector<std::string>& extra_covariates = {});

struct BootstrapOptions {
  int n_resamples = 1000;
  std::uint64_t seed = 0;
  double max_failure_rate = 0.10;
};

/// Resamples with replacement within each (stratum x arm) cell, re-runs the
/// full pipeline per resample. SE is the sample SD of the resample estimates;
/// the CI is the percentile [2.5%, 97.5%] interval. Deterministic given seed.
EffectEstimate bootstrap_effect(const Cohort& cohort, const PipelineConfig& pipeline,
                                const BootstrapOptions& options,
                                const std::vector<std::string>& extra_covariates = {});

/// Weighted difference restricted to each stratum with that stratum's weights
/// (stage-1 vs stage-2 give identical results: the rescaling is arm-constant
/// within stratum). SEs are per-stratum sandwich.
std::map<std::string, EffectEstimate> stratum_effects(const Cohort& cohort,
                                                      const WeightSet& weights);

}  // namespace stratipw
