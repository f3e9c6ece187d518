#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stratipw/cohort.hpp"
#include "stratipw/design.hpp"
#include "stratipw/propensity.hpp"

namespace stratipw {

/// Per-patient weights at each pipeline stage, kept side by side for audit.
struct WeightSet {
  std::vector<double> raw;                    // ATE weights w (after optional truncation)
  std::optional<std::vector<double>> stage1;  // w': arm-balanced within stratum
  std::optional<std::vector<double>> stage2;  // w'': stratum shares restored
  std::vector<std::string> stage_labels;
  bool stratified = false;
  std::map<std::string, PropensityFit> per_stratum_fits;
  std::optional<PropensityFit> global_fit;  // unstratified runs only
  std::optional<double> truncation_percentile;

  /// The final weights of the pipeline: stage2 when present, else raw.
  const std::vector<double>& final_weights() const { return stage2 ? *stage2 : raw; }
};

/// One propensity model specification per stratum: either a single spec shared
/// by every stratum, or an explicit per-stratum map covering all strata.
struct StratifiedDesign {
  std::optional<DesignSpec> shared;
  std::map<std::string, DesignSpec> by_stratum;

  const DesignSpec& for_stratum(const std::string& stratum) const;
  void validate_for(const Cohort& cohort) const;
};

struct PipelineOptions {
  // Symmetric percentile capping of the raw weights before rescaling,
  // e.g. 0.01 caps at the [1%, 99%] quantiles. Off by default.
  std::optional<double> truncation_percentile;
};

struct PipelineConfig {
  bool stratified = true;
  StratifiedDesign design;  // for unstratified runs, `shared` is the global spec
  PipelineOptions options;
};

/// w_i = 1/e_i for exposed, 1/(1-e_i) for unexposed.
std::vector<double> ate_weights(const std::vector<double>& scores, const std::vector<int>& z);

/// Stage 1: within each stratum, scale each arm so both arm totals equal half
/// the stratum's raw weight total.
std::vector<double> rescale_stage1(const std::vector<double>& w,
                                   const std::vector<std::string>& strata,
                                   const std::vector<int>& z);

/// Stage 2: restore every stratum's share of total weight to its unweighted
/// share n_s/n; the k = mean(w_raw) factor preserves the total.
std::vector<double> rescale_stage2(const std::vector<double>& w_stage1,
                                   const std::vector<double>& w_raw,
                                   const std::vector<std::string>& strata);

/// Cap weights at the [p, 1-p] sample quantiles.
std::vector<double> truncate_weights(const std::vector<double>& w, double percentile);

/// Per-stratum propensity fit -> ATE weights -> stage 1 -> stage 2, with
/// results reassembled in original patient order.
WeightSet stratified_weight_pipeline(const Cohort& cohort, const StratifiedDesign& design,
                                     const PipelineOptions& options = {});
WeightSet stratified_weight_pipeline(const Cohort& cohort, const DesignSpec& shared_spec,
                                     const PipelineOptions& options = {});

/// Single global fit, raw ATE weights only (no rescaling stages).
WeightSet unstratified_weights(const Cohort& cohort, const DesignSpec& spec,
                               const PipelineOptions& options = {});

/// Dispatch on config.stratified.
WeightSet run_weight_pipeline(const Cohort& cohort, const PipelineConfig& config);

}  // namespace stratipw
