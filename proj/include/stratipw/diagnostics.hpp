#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stratipw/cohort.hpp"
#include "stratipw/weights.hpp"

namespace stratipw {

struct BalanceRow {
  std::string name;
  double unadj_mean_unexposed = 0.0;
  double unadj_mean_exposed = 0.0;
  std::optional<double> unadj_smd;  // absent when the pooled SD is degenerate
  double adj_mean_unexposed = 0.0;
  double adj_mean_exposed = 0.0;
  std::optional<double> adj_smd;
  bool flagged = false;  // |adjusted SMD| above threshold
};

struct BalanceReport {
  std::string scope;  // "overall" or "stratum:<label>"
  std::string weight_label;
  std::size_t n_unexposed = 0;
  std::size_t n_exposed = 0;
  double ess_unexposed = 0.0;  // ESS of the adjusted weights, per arm
  double ess_exposed = 0.0;
  double smd_threshold = 0.1;
  std::vector<BalanceRow> rows;
};

struct WeightDiagnostics {
  double min = 0.0, max = 0.0, mean = 0.0, cv = 0.0;
  int count_clamped_scores = 0;
  std::vector<std::pair<std::string, double>> top_k_weights;  // (patient id, weight)
};

struct OverlapSummary {
  // min, q25, median, q75, max per arm.
  std::array<double, 5> quantiles_unexposed{};
  std::array<double, 5> quantiles_exposed{};
  std::size_t n_exposed_outside = 0;   // exposed scores outside the unexposed range
  std::size_t n_unexposed_outside = 0;
};

/// Standardized mean difference, exposed minus unexposed. Returns nothing when
/// the pooled SD is degenerate (reported as not-applicable, never as 0).
std::optional<double> smd(double mean_exposed, double mean_unexposed, double sd_pool);

/// sqrt((s1^2 + s0^2)/2) from the unweighted sample: sample variance for
/// continuous covariates, p(1-p) for 0/1 covariates. The same denominator is
/// used for unadjusted and adjusted SMDs.
std::optional<double> pooled_sd(const std::vector<double>& x, const std::vector<int>& z);

double weighted_mean(const std::vector<double>& x, const std::vector<double>& w);

/// Effective sample size (sum w)^2 / sum w^2.
double ess(const std::vector<double>& w);

/// Variance inflation factor 1 + CV^2 of the weights; equals n/ESS.
double variance_inflation(const std::vector<double>& w);

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> values, double p);

BalanceReport balance_report(const Cohort& cohort, const std::vector<double>& w,
                             const std::vector<std::string>& covariates,
                             const std::string& scope = "overall",
                             double smd_threshold = 0.1,
                             const std::string& weight_label = "w");

/// One report per stratum, computed on the stratum's sub-cohort.
std::map<std::string, BalanceReport> stratum_balance_reports(
    const Cohort& cohort, const std::vector<double>& w,
    const std::vector<std::string>& covariates, double smd_threshold = 0.1,
    const std::string& weight_label = "w");

OverlapSummary overlap_summary(const std::vector<double>& scores, const std::vector<int>& z);

WeightDiagnostics weight_diagnostics(const std::vector<double>& w,
                                     const std::vector<std::string>& ids,
                                     int count_clamped_scores, std::size_t top_k = 5);

}  // namespace stratipw
