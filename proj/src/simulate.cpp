#include "stratipw/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "stratipw/errors.hpp"
#include "stratipw/rng.hpp"

namespace stratipw {

namespace {

void validate_config(const SimConfig& cfg) {
  for (int n : cfg.group_sizes)
    if (n < 1) throw ValidationError("simulation group sizes must be >= 1");
  for (double sd : cfg.age_sds)
    if (!(sd > 0.0)) throw ValidationError("simulation age SDs must be > 0");
  for (double p : cfg.stage4_props)
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("stage-IV proportions must lie in [0,1]");
  if (cfg.outcome_model) {
    if (cfg.outcome_model->true_effects.size() != 2)
      throw ValidationError("outcome model needs one true effect per stratum (2)");
    if (!(cfg.outcome_model->noise_sd >= 0.0))
      throw ValidationError("outcome noise SD must be >= 0");
    for (const auto& [name, coef] : cfg.outcome_model->covariate_coefficients) {
      (void)coef;
      if (name != "age" && name != "stage_IV")
        throw ValidationError("unknown outcome-model covariate '" + name + "'");
    }
  }
}

}  // namespace

Cohort simulate_cohort(const SimConfig& cfg) {
  validate_config(cfg);
  static const char* kStrata[4] = {"S1", "S1", "S2", "S2"};
  static const int kExposure[4] = {0, 1, 0, 1};

  std::vector<PatientRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.group_sizes[0] + cfg.group_sizes[1] +
                                           cfg.group_sizes[2] + cfg.group_sizes[3]));
  std::size_t id = 0;
  for (int cell = 0; cell < 4; ++cell) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(cell));
    const std::size_t stratum_index = cell / 2;
    for (int k = 0; k < cfg.group_sizes[cell]; ++k) {
      PatientRecord r;
      r.id = std::to_string(++id);
      r.stratum = kStrata[cell];
      r.exposure = kExposure[cell];
      const double age = rng.normal(cfg.age_means[cell], cfg.age_sds[cell]);
      const double stage4 = rng.bernoulli(cfg.stage4_props[cell]);
      r.covariates = {age, stage4};
      if (cfg.outcome_model) {
        const OutcomeModel& om = *cfg.outcome_model;
        double y = om.true_effects[stratum_index] * r.exposure;
        auto it = om.covariate_coefficients.find("age");
        if (it != om.covariate_coefficients.end()) y += it->second * age;
        it = om.covariate_coefficients.find("stage_IV");
        if (it != om.covariate_coefficients.end()) y += it->second * stage4;
        y += rng.normal(0.0, om.noise_sd);
        r.outcome = y;
      }
      records.push_back(std::move(r));
    }
  }
  return Cohort(std::move(records), {"age", "stage_IV"});
}

void export_fig1_data(const Cohort& cohort, const std::string& path) {
  if (!cohort.has_covariate("age"))
    throw SchemaError("cohort has no 'age' covariate to export");
  const std::size_t age_idx = cohort.covariate_index("age");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "stratum,Z,age\n";
  char buf[40];
  for (const PatientRecord& r : cohort.patients()) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.covariates[age_idx]);
    out << r.stratum << "," << r.exposure << "," << buf << "\n";
  }
}

}  // namespace stratipw
