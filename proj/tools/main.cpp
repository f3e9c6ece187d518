#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "stratipw/cli.hpp"
#include "stratipw/errors.hpp"

namespace {

int exit_code_for(stratipw::ErrorCategory category) {
  switch (category) {
    case stratipw::ErrorCategory::config: return 2;
    case stratipw::ErrorCategory::positivity: return 3;
    case stratipw::ErrorCategory::numeric: return 4;
  }
  return 1;
}

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> input;
  std::optional<std::string> out_dir;
  bool stratify_on = false;
  bool stratify_off = false;
  std::optional<std::string> formats;
  std::optional<std::uint64_t> seed;
  std::optional<int> boot;
  std::optional<std::string> se_method;
  bool per_stratum = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--input", input, "cohort CSV (overrides config)");
    cmd->add_option("--out-dir", out_dir, "output directory (overrides config)");
    cmd->add_flag("--stratify", stratify_on,
                  "fit separate per-stratum propensity models (default on)");
    cmd->add_flag("--no-stratify", stratify_off, "single global propensity model, raw weights");
    cmd->add_option("--format", formats, "comma-separated report formats: json,md");
    cmd->add_option("--seed", seed, "seed for simulation / bootstrap");
    cmd->add_option("--boot", boot, "number of bootstrap resamples");
    cmd->add_option("--se", se_method, "SE method: sandwich, bootstrap or both");
    cmd->add_flag("--per-stratum", per_stratum, "also report stratum-specific effects");
  }

  stratipw::RunConfig resolve() const {
    stratipw::RunConfig config =
        config_path ? stratipw::load_run_config(*config_path) : stratipw::RunConfig{};
    if (input) config.input = *input;
    if (out_dir) config.out_dir = *out_dir;
    if (stratify_off) config.stratify = false;
    else if (stratify_on) config.stratify = true;
    if (formats) {
      config.formats.clear();
      std::string token;
      std::stringstream ss(*formats);
      while (std::getline(ss, token, ',')) config.formats.push_back(token);
    }
    if (seed) {
      if (!config.sim) config.sim = stratipw::SimConfig{};
      config.sim->seed = *seed;
      config.bootstrap_seed = *seed;
    }
    if (boot) config.bootstrap_n = *boot;
    if (se_method) config.se_method = *se_method;
    if (per_stratum) config.per_stratum_effects = true;
    return config;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stratified propensity-score weighting pipeline"};
  app.require_subcommand(1);

  CommonFlags simulate_flags, weigh_flags, balance_flags, estimate_flags, run_flags;
  simulate_flags.attach(app.add_subcommand("simulate", "generate a synthetic cohort CSV"));
  weigh_flags.attach(app.add_subcommand(
      "weigh", "fit propensity models and write w / w' / w'' weights"));
  balance_flags.attach(app.add_subcommand("balance", "balance and weight diagnostics"));
  estimate_flags.attach(app.add_subcommand("estimate", "marginal effect with SEs"));
  run_flags.attach(app.add_subcommand("run", "simulate (or load), weigh, balance, estimate"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("simulate")) {
      stratipw::cmd_simulate(simulate_flags.resolve());
    } else if (app.got_subcommand("weigh")) {
      stratipw::cmd_weigh(weigh_flags.resolve());
    } else if (app.got_subcommand("balance")) {
      stratipw::cmd_balance(balance_flags.resolve());
    } else if (app.got_subcommand("estimate")) {
      stratipw::cmd_estimate(estimate_flags.resolve());
    } else if (app.got_subcommand("run")) {
      stratipw::cmd_run(run_flags.resolve());
    }
  } catch (const stratipw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
