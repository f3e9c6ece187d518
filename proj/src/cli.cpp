#include "stratipw/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stratipw/diagnostics.hpp"
#include "stratipw/errors.hpp"
#include "stratipw/estimation.hpp"
#include "stratipw/report_io.hpp"

namespace stratipw {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

DesignSpec parse_design(const json& j) {
  DesignSpec spec;
  if (j.contains("main")) spec.main_effects = j.at("main").get<std::vector<std::string>>();
  if (j.contains("interactions")) {
    for (const auto& pair : j.at("interactions")) {
      if (!pair.is_array() || pair.size() != 2)
        throw ValidationError("each interaction must be a pair of covariate names");
      spec.interactions.emplace_back(pair.at(0).get<std::string>(),
                                     pair.at(1).get<std::string>());
    }
  }
  return spec;
}

SimConfig parse_sim_config(const json& j) {
  SimConfig cfg;
  auto fill4 = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    const auto values = j.at(key).get<std::vector<double>>();
    if (values.size() != 4)
      throw ValidationError(std::string("simulate.") + key + " needs exactly 4 values");
    for (std::size_t i = 0; i < 4; ++i)
      target[i] = static_cast<std::decay_t<decltype(target[0])>>(values[i]);
  };
  fill4("group_sizes", cfg.group_sizes);
  fill4("age_means", cfg.age_means);
  fill4("age_sds", cfg.age_sds);
  fill4("stage4_props", cfg.stage4_props);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("outcome_model")) {
    const json& om = j.at("outcome_model");
    OutcomeModel model;
    if (om.contains("true_effects"))
      model.true_effects = om.at("true_effects").get<std::vector<double>>();
    if (om.contains("covariate_coefficients"))
      model.covariate_coefficients =
          om.at("covariate_coefficients").get<std::map<std::string, double>>();
    if (om.contains("noise_sd")) model.noise_sd = om.at("noise_sd").get<double>();
    cfg.outcome_model = std::move(model);
  }
  return cfg;
}

// Header-only peek used to infer optional id/outcome columns.
std::vector<std::string> read_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) header.push_back(field);
  return header;
}

fs::path ensure_out_dir(const RunConfig& config) {
  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

bool wants_format(const RunConfig& config, const std::string& fmt) {
  return std::find(config.formats.begin(), config.formats.end(), fmt) != config.formats.end();
}

struct PipelineRun {
  Cohort cohort;
  WeightSet weights;
};

PipelineRun run_pipeline(const RunConfig& config, std::optional<Cohort> cohort = std::nullopt) {
  Cohort c = cohort ? std::move(*cohort) : load_cohort(config);
  WeightSet ws = run_weight_pipeline(c, pipeline_from(config, c));
  return {std::move(c), std::move(ws)};
}

void write_weigh_outputs(const RunConfig& config, const PipelineRun& run) {
  const fs::path dir = ensure_out_dir(config);
  write_weights_csv(run.cohort, run.weights, (dir / "weights.csv").string());
  write_json_file((dir / "fit_summary.json").string(), weight_set_summary_json(run.weights));
}

void write_balance_outputs(const RunConfig& config, const PipelineRun& run) {
  const fs::path dir = ensure_out_dir(config);
  const std::vector<std::string> covariates = config.balance_covariates.empty()
                                                  ? default_balance_covariates(run.cohort)
                                                  : config.balance_covariates;
  const std::string weight_label = run.weights.stratified ? "w''" : "w";
  const std::vector<double>& w = run.weights.final_weights();

  const BalanceReport overall = balance_report(run.cohort, w, covariates, "overall",
                                               config.smd_threshold, weight_label);
  if (wants_format(config, "json"))
    write_json_file((dir / "balance_overall.json").string(), balance_json(overall));
  if (wants_format(config, "md"))
    write_text_file((dir / "balance_overall.md").string(), balance_markdown(overall));

  if (run.cohort.stratum_levels().size() > 1) {
    // Stratum indicators are constant within stratum, so per-stratum tables
    // cover the plain covariates only.
    std::vector<std::string> within;
    for (const std::string& name : covariates)
      if (run.cohort.has_covariate(name)) within.push_back(name);
    const auto reports = stratum_balance_reports(run.cohort, w, within, config.smd_threshold,
                                                 weight_label);
    if (wants_format(config, "json")) {
      json by_stratum;
      for (const auto& [stratum, report] : reports)
        by_stratum[stratum] = balance_json(report);
      write_json_file((dir / "balance_by_stratum.json").string(), by_stratum);
    }
    if (wants_format(config, "md")) {
      std::string md;
      for (const auto& [stratum, report] : reports) md += balance_markdown(report) + "\n";
      write_text_file((dir / "balance_by_stratum.md").string(), md);
    }
  }

  // Weight and overlap diagnostics always ship as JSON.
  json diag;
  std::vector<std::string> ids;
  for (const PatientRecord& r : run.cohort.patients()) ids.push_back(r.id);
  int clamped = 0;
  for (const auto& [stratum, fit] : run.weights.per_stratum_fits)
    clamped += fit.n_clamped_scores;
  if (run.weights.global_fit) clamped += run.weights.global_fit->n_clamped_scores;
  diag["weights"] = weight_diagnostics_json(weight_diagnostics(w, ids, clamped));

  if (run.weights.stratified) {
    const auto rows = stratum_row_indices(run.cohort);
    json overlap;
    for (const auto& [stratum, fit] : run.weights.per_stratum_fits) {
      const auto& idx = rows.at(stratum);
      std::vector<double> scores(fit.scores.data(), fit.scores.data() + fit.scores.size());
      std::vector<int> z(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        z[i] = run.cohort.patients()[idx[i]].exposure;
      overlap[stratum] = overlap_json(overlap_summary(scores, z));
    }
    diag["overlap_by_stratum"] = overlap;
  } else if (run.weights.global_fit) {
    const auto& fit = *run.weights.global_fit;
    std::vector<double> scores(fit.scores.data(), fit.scores.data() + fit.scores.size());
    diag["overlap"] = overlap_json(overlap_summary(scores, run.cohort.exposures()));
  }
  write_json_file((dir / "diagnostics.json").string(), diag);
}

void write_estimate_outputs(const RunConfig& config, const PipelineRun& run) {
  const fs::path dir = ensure_out_dir(config);
  if (!run.cohort.has_outcomes()) {
    auto missing = run.cohort.missing_outcome_ids();
    throw ValidationError("estimation requires outcomes; missing for " +
                          std::to_string(missing.size()) + " of " +
                          std::to_string(run.cohort.size()) + " records");
  }

  const std::vector<double>& w = run.weights.final_weights();
  std::vector<EffectEstimate> estimates;
  if (config.se_method == "sandwich" || config.se_method == "both")
    estimates.push_back(sandwich_effect(run.cohort, w));
  if (config.se_method == "bootstrap" || config.se_method == "both") {
    BootstrapOptions opts;
    opts.n_resamples = config.bootstrap_n;
    opts.seed = config.bootstrap_seed;
    estimates.push_back(bootstrap_effect(run.cohort, pipeline_from(config, run.cohort), opts));
  }
  if (!config.adjust_covariates.empty())
    estimates.push_back(sandwich_effect(run.cohort, w, config.adjust_covariates));

  json out;
  json effects = json::array();
  for (const EffectEstimate& est : estimates) effects.push_back(effect_json(est));
  out["effects"] = effects;
  if (config.per_stratum_effects) {
    json per_stratum;
    for (const auto& [stratum, est] : stratum_effects(run.cohort, run.weights)) {
      per_stratum[stratum] = effect_json(est);
      estimates.push_back(est);
    }
    out["stratum_effects"] = per_stratum;
  }
  write_json_file((dir / "effects.json").string(), out);

  std::printf("%-16s %-10s %10s %10s   95%% CI\n", "estimand", "method", "point", "se");
  for (const EffectEstimate& est : estimates)
    std::printf("%-16s %-10s %10.4f %10.4f   [%.4f, %.4f]\n", est.estimand.c_str(),
                est.method.c_str(), est.point, est.se, est.ci_low, est.ci_high);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig config;
  if (j.contains("input")) config.input = j.at("input").get<std::string>();
  if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("formats")) config.formats = j.at("formats").get<std::vector<std::string>>();
  for (const std::string& fmt : config.formats)
    if (fmt != "json" && fmt != "md")
      throw ValidationError("unknown report format '" + fmt + "' (expected json or md)");

  if (j.contains("schema")) {
    const json& s = j.at("schema");
    if (s.contains("id")) {
      config.schema.id_column = s.at("id").get<std::string>();
      config.schema_id_explicit = true;
    }
    if (s.contains("exposure")) config.schema.exposure_column = s.at("exposure").get<std::string>();
    if (s.contains("stratum")) config.schema.stratum_column = s.at("stratum").get<std::string>();
    if (s.contains("covariates"))
      config.schema.covariate_columns = s.at("covariates").get<std::vector<std::string>>();
    if (s.contains("outcome")) {
      config.schema.outcome_column = s.at("outcome").get<std::string>();
      config.schema_outcome_explicit = true;
    }
    if (s.contains("categorical"))
      config.schema.categorical_columns = s.at("categorical").get<std::vector<std::string>>();
  }

  if (j.contains("stratify")) config.stratify = j.at("stratify").get<bool>();
  if (j.contains("design")) config.design = parse_design(j.at("design"));
  if (j.contains("design_by_stratum"))
    for (const auto& [stratum, spec] : j.at("design_by_stratum").items())
      config.design_by_stratum.emplace(stratum, parse_design(spec));
  if (config.design && !config.design_by_stratum.empty())
    throw ValidationError("give either 'design' or 'design_by_stratum', not both");

  if (j.contains("truncate_percentile") && !j.at("truncate_percentile").is_null())
    config.truncate_percentile = j.at("truncate_percentile").get<double>();
  if (j.contains("se_method")) config.se_method = j.at("se_method").get<std::string>();
  if (config.se_method != "sandwich" && config.se_method != "bootstrap" &&
      config.se_method != "both")
    throw ValidationError("se_method must be sandwich, bootstrap or both");
  if (j.contains("bootstrap")) {
    const json& b = j.at("bootstrap");
    if (b.contains("n")) config.bootstrap_n = b.at("n").get<int>();
    if (b.contains("seed")) config.bootstrap_seed = b.at("seed").get<std::uint64_t>();
  }
  if (j.contains("per_stratum_effects"))
    config.per_stratum_effects = j.at("per_stratum_effects").get<bool>();
  if (j.contains("adjust_covariates"))
    config.adjust_covariates = j.at("adjust_covariates").get<std::vector<std::string>>();
  if (j.contains("smd_threshold")) config.smd_threshold = j.at("smd_threshold").get<double>();
  if (j.contains("balance_covariates"))
    config.balance_covariates = j.at("balance_covariates").get<std::vector<std::string>>();
  if (j.contains("simulate")) config.sim = parse_sim_config(j.at("simulate"));
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "': " + e.what());
  }
}

std::vector<std::string> default_balance_covariates(const Cohort& cohort) {
  std::vector<std::string> names = cohort.covariate_names();
  if (cohort.stratum_levels().size() > 1) {
    std::set<std::string> sorted(cohort.stratum_levels().begin(),
                                 cohort.stratum_levels().end());
    auto it = sorted.begin();
    for (++it; it != sorted.end(); ++it) names.push_back("stratum_" + *it);
  }
  return names;
}

Cohort load_cohort(const RunConfig& config) {
  if (!config.input) throw ValidationError("no input cohort CSV configured");
  CsvSchema schema = config.schema;
  const auto header = read_header(*config.input);
  auto in_header = [&](const std::string& name) {
    return std::find(header.begin(), header.end(), name) != header.end();
  };
  if (!config.schema_id_explicit && in_header("id")) schema.id_column = "id";
  if (!config.schema_outcome_explicit && in_header("y")) schema.outcome_column = "y";
  return load_csv(*config.input, schema);
}

PipelineConfig pipeline_from(const RunConfig& config, const Cohort& cohort) {
  PipelineConfig pipeline;
  pipeline.stratified = config.stratify;
  if (config.design) {
    pipeline.design.shared = *config.design;
  } else if (!config.design_by_stratum.empty()) {
    pipeline.design.by_stratum = config.design_by_stratum;
  } else {
    // Default model: main effects for every covariate, no interactions.
    DesignSpec spec;
    spec.main_effects = cohort.covariate_names();
    pipeline.design.shared = std::move(spec);
  }
  pipeline.options.truncation_percentile = config.truncate_percentile;
  return pipeline;
}

Cohort cmd_simulate(const RunConfig& config) {
  const SimConfig sim = config.sim.value_or(SimConfig{});
  Cohort cohort = simulate_cohort(sim);
  const fs::path dir = ensure_out_dir(config);
  write_csv(cohort, (dir / "cohort.csv").string());
  export_fig1_data(cohort, (dir / "fig1_data.csv").string());
  return cohort;
}

void cmd_weigh(const RunConfig& config) { write_weigh_outputs(config, run_pipeline(config)); }

void cmd_balance(const RunConfig& config) { write_balance_outputs(config, run_pipeline(config)); }

void cmd_estimate(const RunConfig& config) { write_estimate_outputs(config, run_pipeline(config)); }

void cmd_run(const RunConfig& config) {
  std::optional<Cohort> cohort;
  if (config.input) {
    cohort = load_cohort(config);
  } else {
    cohort = cmd_simulate(config);
  }
  const PipelineRun run = run_pipeline(config, std::move(cohort));
  write_weigh_outputs(config, run);
  write_balance_outputs(config, run);
  if (run.cohort.has_outcomes()) write_estimate_outputs(config, run);
}

}  // namespace stratipw
