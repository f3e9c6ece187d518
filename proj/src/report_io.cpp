#include "stratipw/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "stratipw/errors.hpp"

namespace stratipw {

namespace {

using nlohmann::json;

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_or_na(const std::optional<double>& v) { return v ? fmt3(*v) : "NA"; }

json smd_or_null(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json fit_summary_json(const PropensityFit& fit) {
  json coefficients = json::array();
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    coefficients.push_back({{"term", idx < fit.term_labels.size() ? fit.term_labels[idx]
                                                                  : "column " + std::to_string(j)},
                            {"estimate", fit.coefficients[j]}});
  }
  return json{{"coefficients", coefficients},
              {"iterations", fit.iterations},
              {"deviance", fit.deviance},
              {"converged", fit.converged},
              {"separation_warning", fit.separation_warning},
              {"clamped_scores", fit.n_clamped_scores}};
}

json weight_set_summary_json(const WeightSet& weights) {
  json out;
  out["stratified"] = weights.stratified;
  out["stages"] = weights.stage_labels;
  if (weights.truncation_percentile)
    out["truncation_percentile"] = *weights.truncation_percentile;
  if (weights.global_fit) out["fit"] = fit_summary_json(*weights.global_fit);
  if (!weights.per_stratum_fits.empty()) {
    json fits;
    for (const auto& [stratum, fit] : weights.per_stratum_fits)
      fits[stratum] = fit_summary_json(fit);
    out["per_stratum_fits"] = fits;
  }
  return out;
}

json balance_json(const BalanceReport& report) {
  json rows = json::array();
  for (const BalanceRow& row : report.rows) {
    rows.push_back({{"name", row.name},
                    {"unadj_mean_unexposed", row.unadj_mean_unexposed},
                    {"unadj_mean_exposed", row.unadj_mean_exposed},
                    {"unadj_smd", smd_or_null(row.unadj_smd)},
                    {"adj_mean_unexposed", row.adj_mean_unexposed},
                    {"adj_mean_exposed", row.adj_mean_exposed},
                    {"adj_smd", smd_or_null(row.adj_smd)},
                    {"flagged", row.flagged}});
  }
  return json{{"scope", report.scope},
              {"weight_label", report.weight_label},
              {"n_unexposed", report.n_unexposed},
              {"n_exposed", report.n_exposed},
              {"ess_unexposed", report.ess_unexposed},
              {"ess_exposed", report.ess_exposed},
              {"smd_threshold", report.smd_threshold},
              {"rows", rows}};
}

std::string balance_markdown(const BalanceReport& report) {
  std::ostringstream out;
  out << "### Balance (" << report.scope << ", adjusted with " << report.weight_label << ")\n\n";
  out << "Unadjusted: N=" << report.n_unexposed << " unexposed, N=" << report.n_exposed
      << " exposed. Adjusted: ESS=" << fmt3(report.ess_unexposed)
      << " unexposed, ESS=" << fmt3(report.ess_exposed) << " exposed.\n\n";
  out << "| Covariate | Unexposed | Exposed | SMD | Adj. Unexposed | Adj. Exposed | Adj. SMD |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|\n";
  for (const BalanceRow& row : report.rows) {
    out << "| " << row.name << " | " << fmt3(row.unadj_mean_unexposed) << " | "
        << fmt3(row.unadj_mean_exposed) << " | " << fmt_or_na(row.unadj_smd) << " | "
        << fmt3(row.adj_mean_unexposed) << " | " << fmt3(row.adj_mean_exposed) << " | "
        << fmt_or_na(row.adj_smd) << (row.flagged ? " *" : "") << " |\n";
  }
  return out.str();
}

json overlap_json(const OverlapSummary& overlap) {
  const char* names[5] = {"min", "q25", "median", "q75", "max"};
  json un, ex;
  for (int i = 0; i < 5; ++i) {
    un[names[i]] = overlap.quantiles_unexposed[static_cast<std::size_t>(i)];
    ex[names[i]] = overlap.quantiles_exposed[static_cast<std::size_t>(i)];
  }
  return json{{"unexposed", un},
              {"exposed", ex},
              {"n_exposed_outside_unexposed_range", overlap.n_exposed_outside},
              {"n_unexposed_outside_exposed_range", overlap.n_unexposed_outside}};
}

json weight_diagnostics_json(const WeightDiagnostics& diagnostics) {
  json top = json::array();
  for (const auto& [id, w] : diagnostics.top_k_weights)
    top.push_back({{"id", id}, {"weight", w}});
  return json{{"min", diagnostics.min},
              {"max", diagnostics.max},
              {"mean", diagnostics.mean},
              {"cv", diagnostics.cv},
              {"count_clamped_scores", diagnostics.count_clamped_scores},
              {"top_weights", top}};
}

json effect_json(const EffectEstimate& estimate) {
  json out{{"estimand", estimate.estimand}, {"point", estimate.point},
           {"se", estimate.se},            {"ci_low", estimate.ci_low},
           {"ci_high", estimate.ci_high},  {"method", estimate.method}};
  if (estimate.n_boot) out["n_boot"] = *estimate.n_boot;
  if (estimate.boot_failures) out["boot_failures"] = *estimate.boot_failures;
  return out;
}

void write_weights_csv(const Cohort& cohort, const WeightSet& weights, const std::string& path) {
  if (weights.raw.size() != cohort.size())
    throw ValidationError("weight set does not align with cohort");

  // Per-patient propensity scores, reassembled from the fits.
  std::vector<double> e_hat(cohort.size());
  if (weights.stratified) {
    const auto rows = stratum_row_indices(cohort);
    for (const auto& [stratum, fit] : weights.per_stratum_fits) {
      const auto& idx = rows.at(stratum);
      for (std::size_t i = 0; i < idx.size(); ++i)
        e_hat[idx[i]] = fit.scores[static_cast<Eigen::Index>(i)];
    }
  } else if (weights.global_fit) {
    for (std::size_t i = 0; i < cohort.size(); ++i)
      e_hat[i] = weights.global_fit->scores[static_cast<Eigen::Index>(i)];
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "id,stratum,Z,e_hat,w,w_prime,w_doubleprime\n";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const PatientRecord& r = cohort.patients()[i];
    out << r.id << "," << r.stratum << "," << r.exposure << "," << fmt_full(e_hat[i]) << ","
        << fmt_full(weights.raw[i]) << ",";
    if (weights.stage1) out << fmt_full((*weights.stage1)[i]);
    out << ",";
    if (weights.stage2) out << fmt_full((*weights.stage2)[i]);
    out << "\n";
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << contents;
}

void write_json_file(const std::string& path, const nlohmann::json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

}  // namespace stratipw
