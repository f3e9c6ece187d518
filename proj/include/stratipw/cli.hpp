#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "stratipw/cohort.hpp"
#include "stratipw/simulate.hpp"
#include "stratipw/weights.hpp"

namespace stratipw {

/// One config drives a full run; the `run` command chains
/// simulate -> weigh -> balance -> estimate off a single file.
struct RunConfig {
  std::optional<std::string> input;
  std::string out_dir = ".";
  std::vector<std::string> formats = {"json", "md"};  // json is canonical
  CsvSchema schema;
  bool schema_id_explicit = false;       // id/outcome columns are inferred from
  bool schema_outcome_explicit = false;  // the header unless set in config
  bool stratify = true;
  std::optional<DesignSpec> design;                // global / shared
  std::map<std::string, DesignSpec> design_by_stratum;
  std::optional<double> truncate_percentile;
  std::string se_method = "sandwich";  // sandwich | bootstrap | both
  int bootstrap_n = 1000;
  std::uint64_t bootstrap_seed = 0;
  bool per_stratum_effects = false;
  std::vector<std::string> adjust_covariates;  // conditional estimate when non-empty
  double smd_threshold = 0.1;
  std::vector<std::string> balance_covariates;  // empty -> covariates + stratum indicators
  std::optional<SimConfig> sim;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Covariates reported by default: every cohort covariate plus one indicator
/// per non-reference stratum level (first sorted level dropped).
std::vector<std::string> default_balance_covariates(const Cohort& cohort);

Cohort load_cohort(const RunConfig& config);
PipelineConfig pipeline_from(const RunConfig& config, const Cohort& cohort);

Cohort cmd_simulate(const RunConfig& config);
void cmd_weigh(const RunConfig& config);
void cmd_balance(const RunConfig& config);
void cmd_estimate(const RunConfig& config);
void cmd_run(const RunConfig& config);

}  // namespace stratipw
