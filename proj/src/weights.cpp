#include "stratipw/weights.hpp"

#include <algorithm>
#include <cmath>

#include "stratipw/errors.hpp"

namespace stratipw {

namespace {

// Target allocation of each stratum's weight between the arms. 0.5 encodes the
// 1:1 pseudo-population of the ATE estimand and keeps totals unchanged.
constexpr double kEqualArmShare = 0.5;

// Type-7 (linear interpolation) sample quantile.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct StratumTotals {
  double total = 0.0;       // sum of weights in the stratum
  double arm_total[2] = {0.0, 0.0};
  std::size_t count = 0;
  std::size_t arm_count[2] = {0, 0};
};

std::map<std::string, StratumTotals> accumulate_totals(const std::vector<double>& w,
                                                       const std::vector<std::string>& strata,
                                                       const std::vector<int>& z) {
  std::map<std::string, StratumTotals> totals;
  for (std::size_t i = 0; i < w.size(); ++i) {
    StratumTotals& t = totals[strata[i]];
    t.total += w[i];
    t.arm_total[z[i]] += w[i];
    t.count += 1;
    t.arm_count[z[i]] += 1;
  }
  return totals;
}

}  // namespace

const DesignSpec& StratifiedDesign::for_stratum(const std::string& stratum) const {
  if (shared) return *shared;
  auto it = by_stratum.find(stratum);
  if (it == by_stratum.end())
    throw SchemaError("no design specified for stratum '" + stratum + "'");
  return it->second;
}

void StratifiedDesign::validate_for(const Cohort& cohort) const {
  if (shared.has_value() == !by_stratum.empty())
    throw ValidationError("exactly one design source required: shared or per-stratum");
  if (shared) {
    validate_design(cohort, *shared);
    return;
  }
  for (const std::string& level : cohort.stratum_levels()) {
    auto it = by_stratum.find(level);
    if (it == by_stratum.end())
      throw SchemaError("no design specified for stratum '" + level + "'");
    validate_design(cohort, it->second);
  }
}

std::vector<double> ate_weights(const std::vector<double>& scores, const std::vector<int>& z) {
  if (scores.size() != z.size())
    throw ValidationError("scores and exposure vectors differ in length");
  std::vector<double> w(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = scores[i];
    if (!(e > 0.0 && e < 1.0))
      throw DomainError("propensity score " + std::to_string(e) + " outside (0,1)");
    w[i] = z[i] == 1 ? 1.0 / e : 1.0 / (1.0 - e);
  }
  return w;
}

std::vector<double> rescale_stage1(const std::vector<double>& w,
                                   const std::vector<std::string>& strata,
                                   const std::vector<int>& z) {
  if (w.size() != strata.size() || w.size() != z.size())
    throw ValidationError("weight, stratum and exposure vectors differ in length");
  const auto totals = accumulate_totals(w, strata, z);
  for (const auto& [stratum, t] : totals) {
    if (t.arm_count[1] == 0)
      throw StructuralPositivityError(stratum,
                                      "stratum '" + stratum + "' has no exposed patients");
    if (t.arm_count[0] == 0)
      throw StructuralPositivityError(stratum,
                                      "stratum '" + stratum + "' has no unexposed patients");
  }
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const StratumTotals& t = totals.at(strata[i]);
    out[i] = w[i] * kEqualArmShare * t.total / t.arm_total[z[i]];
  }
  return out;
}

std::vector<double> rescale_stage2(const std::vector<double>& w_stage1,
                                   const std::vector<double>& w_raw,
                                   const std::vector<std::string>& strata) {
  if (w_stage1.size() != w_raw.size() || w_stage1.size() != strata.size())
    throw ValidationError("weight and stratum vectors differ in length");
  const std::size_t n = w_raw.size();

  std::map<std::string, StratumTotals> totals;
  double raw_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    StratumTotals& t = totals[strata[i]];
    t.total += w_raw[i];
    t.count += 1;
    raw_total += w_raw[i];
  }
  const double k = raw_total / static_cast<double>(n);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const StratumTotals& t = totals.at(strata[i]);
    out[i] = w_stage1[i] * k * static_cast<double>(t.count) / t.total;
  }
  return out;
}

std::vector<double> truncate_weights(const std::vector<double>& w, double percentile) {
  if (!(percentile > 0.0 && percentile < 0.5))
    throw ValidationError("truncation percentile must lie in (0, 0.5)");
  std::vector<double> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  const double lo = quantile_sorted(sorted, percentile);
  const double hi = quantile_sorted(sorted, 1.0 - percentile);
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::clamp(w[i], lo, hi);
  return out;
}

WeightSet stratified_weight_pipeline(const Cohort& cohort, const StratifiedDesign& design,
                                     const PipelineOptions& options) {
  design.validate_for(cohort);

  const std::vector<int> z = cohort.exposures();
  const std::vector<std::string> strata = cohort.strata();
  const auto rows_by_stratum = stratum_row_indices(cohort);

  WeightSet ws;
  ws.stratified = true;
  ws.raw.resize(cohort.size());

  for (const std::string& level : cohort.stratum_levels()) {
    const std::vector<std::size_t>& rows = rows_by_stratum.at(level);
    const Cohort part = cohort.subset(rows);
    const DesignSpec& spec = design.for_stratum(level);

    DesignMatrix dm = build_design_matrix(part, spec);
    Eigen::VectorXd zs(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) zs[i] = z[rows[i]];

    PropensityFit fit;
    try {
      fit = fit_logistic(dm.X, zs, dm.labels);
    } catch (const DegenerateResponseError&) {
      const bool exposed_missing = zs.sum() == 0.0;
      throw StructuralPositivityError(
          level, "stratum '" + level + "' has no " +
                     (exposed_missing ? "exposed" : "unexposed") + " patients");
    } catch (const Error& e) {
      throw Error(e.category(), "stratum '" + level + "': " + e.what());
    }

    std::vector<double> scores(fit.scores.data(), fit.scores.data() + fit.scores.size());
    std::vector<int> zpart(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) zpart[i] = z[rows[i]];
    const std::vector<double> w = ate_weights(scores, zpart);
    for (std::size_t i = 0; i < rows.size(); ++i) ws.raw[rows[i]] = w[i];

    ws.per_stratum_fits.emplace(level, std::move(fit));
  }

  ws.stage_labels = {"w"};
  if (options.truncation_percentile) {
    ws.raw = truncate_weights(ws.raw, *options.truncation_percentile);
    ws.truncation_percentile = options.truncation_percentile;
    ws.stage_labels = {"w (truncated)"};
  }

  ws.stage1 = rescale_stage1(ws.raw, strata, z);
  ws.stage2 = rescale_stage2(*ws.stage1, ws.raw, strata);
  ws.stage_labels.push_back("w' (arm-balanced within stratum)");
  ws.stage_labels.push_back("w'' (stratum shares restored)");
  return ws;
}

WeightSet stratified_weight_pipeline(const Cohort& cohort, const DesignSpec& shared_spec,
                                     const PipelineOptions& options) {
  StratifiedDesign design;
  design.shared = shared_spec;
  return stratified_weight_pipeline(cohort, design, options);
}

WeightSet unstratified_weights(const Cohort& cohort, const DesignSpec& spec,
                               const PipelineOptions& options) {
  DesignMatrix dm = build_design_matrix(cohort, spec);
  const std::vector<int> z = cohort.exposures();
  Eigen::VectorXd zv(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) zv[i] = z[i];

  WeightSet ws;
  ws.stratified = false;
  ws.global_fit = fit_logistic(dm.X, zv, dm.labels);
  std::vector<double> scores(ws.global_fit->scores.data(),
                             ws.global_fit->scores.data() + ws.global_fit->scores.size());
  ws.raw = ate_weights(scores, z);
  ws.stage_labels = {"w"};
  if (options.truncation_percentile) {
    ws.raw = truncate_weights(ws.raw, *options.truncation_percentile);
    ws.truncation_percentile = options.truncation_percentile;
    ws.stage_labels = {"w (truncated)"};
  }
  return ws;
}

WeightSet run_weight_pipeline(const Cohort& cohort, const PipelineConfig& config) {
  if (config.stratified) return stratified_weight_pipeline(cohort, config.design, config.options);
  if (!config.design.shared)
    throw ValidationError("unstratified run requires a single global design");
  return unstratified_weights(cohort, *config.design.shared, config.options);
}

}  // namespace stratipw
