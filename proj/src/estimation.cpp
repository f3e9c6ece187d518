#include "stratipw/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stratipw/diagnostics.hpp"
#include "stratipw/errors.hpp"
#include "stratipw/rng.hpp"

namespace stratipw {

namespace {

constexpr double kNormal975 = 1.959963984540054;

std::vector<double> require_outcomes(const Cohort& cohort) { return cohort.outcomes(); }

double wls_point(const Cohort& cohort, const std::vector<double>& w,
                 const std::vector<std::string>& extra_covariates) {
  std::vector<std::vector<double>> extras;
  for (const std::string& name : extra_covariates) extras.push_back(cohort.column(name));
  const WlsFit fit =
      weighted_outcome_regression(require_outcomes(cohort), cohort.exposures(), w, extras,
                                  extra_covariates);
  return fit.coefficients[1];
}

}  // namespace

double ate_weighted_difference(const std::vector<double>& y, const std::vector<int>& z,
                               const std::vector<double>& w) {
  if (y.size() != z.size() || y.size() != w.size())
    throw ValidationError("outcome, exposure and weight vectors differ in length");
  double num[2] = {0.0, 0.0}, den[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    num[z[i]] += w[i] * y[i];
    den[z[i]] += w[i];
  }
  if (!(den[0] > 0.0) || !(den[1] > 0.0))
    throw DomainError("both exposure arms need a positive weight total");
  return num[1] / den[1] - num[0] / den[0];
}

WlsFit weighted_outcome_regression(const std::vector<double>& y, const std::vector<int>& z,
                                   const std::vector<double>& w,
                                   const std::vector<std::vector<double>>& extras,
                                   const std::vector<std::string>& extra_labels) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (z.size() != y.size() || w.size() != y.size())
    throw ValidationError("outcome, exposure and weight vectors differ in length");
  for (double v : w)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("regression weights must be finite and non-negative");
  const auto p = static_cast<Eigen::Index>(2 + extras.size());

  WlsFit fit;
  fit.design.resize(n, p);
  fit.design.col(0).setOnes();
  fit.labels = {"intercept", "Z"};
  for (Eigen::Index i = 0; i < n; ++i) fit.design(i, 1) = z[i];
  for (std::size_t k = 0; k < extras.size(); ++k) {
    if (extras[k].size() != y.size())
      throw ValidationError("extra covariate column does not align with outcomes");
    fit.design.col(2 + static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(extras[k].data(), n);
    fit.labels.push_back(k < extra_labels.size() ? extra_labels[k]
                                                 : "extra" + std::to_string(k + 1));
  }

  fit.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), n);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  const Eigen::VectorXd sqrt_w = fit.weights.cwiseSqrt();
  const Eigen::MatrixXd A = sqrt_w.asDiagonal() * fit.design;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < p) {
    std::vector<std::string> collinear;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k)
      collinear.push_back(fit.labels[static_cast<std::size_t>(perm[k])]);
    std::string msg = "outcome regression design is rank deficient; collinear terms:";
    for (const std::string& c : collinear) msg += " " + c;
    throw RankDeficiencyError(collinear, msg);
  }
  fit.coefficients = qr.solve(sqrt_w.asDiagonal() * yv);
  fit.residuals = yv - fit.design * fit.coefficients;

  const Eigen::MatrixXd xtwx = fit.design.transpose() * fit.weights.asDiagonal() * fit.design;
  fit.bread = xtwx.inverse();
  return fit;
}

double sandwich_se(const WlsFit& fit, std::size_t coefficient_index) {
  const auto j = static_cast<Eigen::Index>(coefficient_index);
  if (j >= fit.coefficients.size())
    throw ValidationError("coefficient index out of range for sandwich SE");
  const Eigen::VectorXd wr = fit.weights.cwiseProduct(fit.residuals);
  const Eigen::MatrixXd meat = fit.design.transpose() * wr.cwiseAbs2().asDiagonal() * fit.design;
  const Eigen::MatrixXd cov = fit.bread * meat * fit.bread;
  const double var = cov(j, j);
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

EffectEstimate sandwich_effect(const Cohort& cohort, const std::vector<double>& w,
                               const std::vector<std::string>& extra_covariates) {
  std::vector<std::vector<double>> extras;
  for (const std::string& name : extra_covariates) extras.push_back(cohort.column(name));
  const WlsFit fit = weighted_outcome_regression(require_outcomes(cohort), cohort.exposures(),
                                                 w, extras, extra_covariates);
  EffectEstimate est;
  est.estimand = extra_covariates.empty() ? "ATE-marginal" : "conditional";
  est.point = fit.coefficients[1];
  est.se = sandwich_se(fit);
  est.ci_low = est.point - kNormal975 * est.se;
  est.ci_high = est.point + kNormal975 * est.se;
  est.method = "sandwich";
  return est;
}

EffectEstimate bootstrap_effect(const Cohort& cohort, const PipelineConfig& pipeline,
                                const BootstrapOptions& options,
                                const std::vector<std::string>& extra_covariates) {
  if (options.n_resamples < 2) throw ValidationError("bootstrap requires at least 2 resamples");
  require_outcomes(cohort);

  // Resampling cells: (stratum, arm), preserving each cell's size.
  std::vector<std::vector<std::size_t>> cells;
  for (const auto& [stratum, rows] : stratum_row_indices(cohort)) {
    std::vector<std::size_t> arm0, arm1;
    for (std::size_t i : rows)
      (cohort.patients()[i].exposure == 1 ? arm1 : arm0).push_back(i);
    if (!arm0.empty()) cells.push_back(std::move(arm0));
    if (!arm1.empty()) cells.push_back(std::move(arm1));
  }

  const WeightSet full = run_weight_pipeline(cohort, pipeline);
  EffectEstimate est;
  est.estimand = extra_covariates.empty() ? "ATE-marginal" : "conditional";
  est.point = wls_point(cohort, full.final_weights(), extra_covariates);
  est.method = "bootstrap";
  est.n_boot = options.n_resamples;

  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(options.n_resamples));
  int failures = 0;
  std::vector<std::size_t> rows;
  rows.reserve(cohort.size());
  for (int b = 0; b < options.n_resamples; ++b) {
    Rng rng = Rng::substream(options.seed, static_cast<std::uint64_t>(b));
    rows.clear();
    for (const auto& cell : cells)
      for (std::size_t k = 0; k < cell.size(); ++k)
        rows.push_back(cell[rng.uniform_index(cell.size())]);
    try {
      const Cohort resample = cohort.subset(rows);
      const WeightSet ws = run_weight_pipeline(resample, pipeline);
      estimates.push_back(wls_point(resample, ws.final_weights(), extra_covariates));
    } catch (const Error&) {
      ++failures;
    }
  }

  est.boot_failures = failures;
  if (failures > options.max_failure_rate * options.n_resamples)
    throw BootstrapUnstableError("bootstrap unstable: " + std::to_string(failures) + " of " +
                                 std::to_string(options.n_resamples) + " resamples failed");

  const auto m = static_cast<double>(estimates.size());
  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / m;
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  est.se = m > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  est.ci_low = sample_quantile(estimates, 0.025);
  est.ci_high = sample_quantile(estimates, 0.975);
  return est;
}

std::map<std::string, EffectEstimate> stratum_effects(const Cohort& cohort,
                                                      const WeightSet& weights) {
  require_outcomes(cohort);
  const std::vector<double>& w = weights.final_weights();
  if (w.size() != cohort.size())
    throw ValidationError("weight set does not align with cohort");

  std::map<std::string, EffectEstimate> effects;
  for (const auto& [stratum, rows] : stratum_row_indices(cohort)) {
    const Cohort part = cohort.subset(rows);
    std::vector<double> w_part(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) w_part[i] = w[rows[i]];
    EffectEstimate est = sandwich_effect(part, w_part);
    est.estimand = "stratum:" + stratum;
    effects.emplace(stratum, std::move(est));
  }
  return effects;
}

}  // namespace stratipw
