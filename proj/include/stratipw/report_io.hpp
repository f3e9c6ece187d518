#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "stratipw/cohort.hpp"
#include "stratipw/diagnostics.hpp"
#include "stratipw/estimation.hpp"
#include "stratipw/weights.hpp"

namespace stratipw {

nlohmann::json fit_summary_json(const PropensityFit& fit);
nlohmann::json weight_set_summary_json(const WeightSet& weights);

nlohmann::json balance_json(const BalanceReport& report);

/// Aligned-column markdown table: a 3-column unadjusted block and a 3-column
/// adjusted block per covariate row, values printed to 3 decimals.
std::string balance_markdown(const BalanceReport& report);

nlohmann::json overlap_json(const OverlapSummary& overlap);
nlohmann::json weight_diagnostics_json(const WeightDiagnostics& diagnostics);
nlohmann::json effect_json(const EffectEstimate& estimate);

/// Audit CSV: id, stratum, Z, e_hat, w, w_prime, w_doubleprime. Stage columns
/// are left empty when the stage was not computed.
void write_weights_csv(const Cohort& cohort, const WeightSet& weights, const std::string& path);

void write_text_file(const std::string& path, const std::string& contents);
void write_json_file(const std::string& path, const nlohmann::json& value);

}  // namespace stratipw
