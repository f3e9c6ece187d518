#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stratipw/cohort.hpp"

namespace stratipw {

struct OutcomeModel {
  std::vector<double> true_effects = {5.0, 5.0};  // per-stratum effect of Z
  std::map<std::string, double> covariate_coefficients = {{"age", 0.2}, {"stage_IV", 3.0}};
  double noise_sd = 5.0;
};

/// Two-strata, two-arm generator. Cell order is S1-unexposed, S1-exposed,
/// S2-unexposed, S2-exposed. Cell counts are exact; ages are normal and the
/// stage-IV indicator Bernoulli per cell.
struct SimConfig {
  std::array<int, 4> group_sizes = {30, 50, 70, 30};
  std::array<double, 4> age_means = {60.0, 45.0, 70.0, 50.0};
  std::array<double, 4> age_sds = {8.0, 8.0, 8.0, 8.0};
  std::array<double, 4> stage4_props = {0.6, 0.55, 0.45, 0.43};
  std::optional<OutcomeModel> outcome_model;
  std::uint64_t seed = 21082025;
};

/// Deterministic given the seed; each cell draws from its own substream, so
/// generation order does not matter. With an outcome model,
/// y = tau_s * Z + sum_c gamma_c * x_c + Normal(0, noise_sd).
Cohort simulate_cohort(const SimConfig& config);

/// Long-format CSV (stratum, Z, age) for external density plotting.
void export_fig1_data(const Cohort& cohort, const std::string& path);

}  // namespace stratipw
