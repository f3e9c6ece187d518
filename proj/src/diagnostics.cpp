#include "stratipw/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stratipw/errors.hpp"

namespace stratipw {

namespace {

bool is_binary(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::array<double, 5> five_quantiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto q = [&](double p) {
    if (n == 1) return values[0];
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, n - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), q(0.25), q(0.5), q(0.75), values.back()};
}

}  // namespace

std::optional<double> smd(double mean_exposed, double mean_unexposed, double sd_pool) {
  if (!(sd_pool > 0.0)) return std::nullopt;
  return (mean_exposed - mean_unexposed) / sd_pool;
}

std::optional<double> pooled_sd(const std::vector<double>& x, const std::vector<int>& z) {
  if (x.size() != z.size()) throw ValidationError("value and arm vectors differ in length");
  std::vector<double> arm[2];
  for (std::size_t i = 0; i < x.size(); ++i) arm[z[i]].push_back(x[i]);
  if (arm[0].empty() || arm[1].empty()) return std::nullopt;

  const bool binary = is_binary(x);
  double var_sum = 0.0;
  for (const auto& g : arm) {
    const double n = static_cast<double>(g.size());
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / n;
    if (binary) {
      var_sum += mean * (1.0 - mean);
    } else {
      if (g.size() < 2) return std::nullopt;
      double ss = 0.0;
      for (double v : g) ss += (v - mean) * (v - mean);
      var_sum += ss / (n - 1.0);
    }
  }
  const double sd = std::sqrt(var_sum / 2.0);
  return sd > 0.0 ? std::optional<double>(sd) : std::nullopt;
}

double weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
  if (x.size() != w.size()) throw ValidationError("value and weight vectors differ in length");
  double wsum = 0.0, wxsum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    wsum += w[i];
    wxsum += w[i] * x[i];
  }
  if (!(wsum > 0.0)) throw DomainError("weighted mean requires a positive weight total");
  return wxsum / wsum;
}

double ess(const std::vector<double>& w) {
  if (w.empty()) throw ValidationError("ESS of an empty weight vector");
  double s = 0.0, s2 = 0.0;
  for (double v : w) {
    if (v < 0.0) throw ValidationError("ESS requires non-negative weights");
    s += v;
    s2 += v * v;
  }
  if (!(s > 0.0)) throw ValidationError("ESS requires a positive weight total");
  return s * s / s2;
}

double variance_inflation(const std::vector<double>& w) {
  const double n = static_cast<double>(w.size());
  (void)ess(w);  // same preconditions
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= n;
  return 1.0 + var / (mean * mean);
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty vector");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 1) return values[0];
  const double h = std::clamp(p, 0.0, 1.0) * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BalanceReport balance_report(const Cohort& cohort, const std::vector<double>& w,
                             const std::vector<std::string>& covariates,
                             const std::string& scope, double smd_threshold,
                             const std::string& weight_label) {
  if (w.size() != cohort.size())
    throw ValidationError("weight vector does not align with cohort");

  const std::vector<int> z = cohort.exposures();
  BalanceReport report;
  report.scope = scope;
  report.weight_label = weight_label;
  report.smd_threshold = smd_threshold;

  std::vector<double> w_arm[2];
  for (std::size_t i = 0; i < z.size(); ++i) w_arm[z[i]].push_back(w[i]);
  report.n_unexposed = w_arm[0].size();
  report.n_exposed = w_arm[1].size();
  if (report.n_unexposed == 0 || report.n_exposed == 0)
    throw ValidationError("balance report requires both exposure arms");
  report.ess_unexposed = ess(w_arm[0]);
  report.ess_exposed = ess(w_arm[1]);

  for (const std::string& name : covariates) {
    const std::vector<double> x = cohort.column(name);
    BalanceRow row;
    row.name = name;

    std::vector<double> x_arm[2], ones_arm[2];
    for (std::size_t i = 0; i < x.size(); ++i) {
      x_arm[z[i]].push_back(x[i]);
      ones_arm[z[i]].push_back(1.0);
    }
    row.unadj_mean_unexposed = weighted_mean(x_arm[0], ones_arm[0]);
    row.unadj_mean_exposed = weighted_mean(x_arm[1], ones_arm[1]);
    row.adj_mean_unexposed = weighted_mean(x_arm[0], w_arm[0]);
    row.adj_mean_exposed = weighted_mean(x_arm[1], w_arm[1]);

    const std::optional<double> sd = pooled_sd(x, z);
    if (sd) {
      row.unadj_smd = smd(row.unadj_mean_exposed, row.unadj_mean_unexposed, *sd);
      row.adj_smd = smd(row.adj_mean_exposed, row.adj_mean_unexposed, *sd);
      row.flagged = row.adj_smd && std::abs(*row.adj_smd) > smd_threshold;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::map<std::string, BalanceReport> stratum_balance_reports(
    const Cohort& cohort, const std::vector<double>& w,
    const std::vector<std::string>& covariates, double smd_threshold,
    const std::string& weight_label) {
  if (w.size() != cohort.size())
    throw ValidationError("weight vector does not align with cohort");
  std::map<std::string, BalanceReport> reports;
  for (const auto& [stratum, rows] : stratum_row_indices(cohort)) {
    const Cohort part = cohort.subset(rows);
    std::vector<double> w_part(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) w_part[i] = w[rows[i]];
    reports.emplace(stratum, balance_report(part, w_part, covariates, "stratum:" + stratum,
                                            smd_threshold, weight_label));
  }
  return reports;
}

OverlapSummary overlap_summary(const std::vector<double>& scores, const std::vector<int>& z) {
  if (scores.size() != z.size())
    throw ValidationError("score and arm vectors differ in length");
  std::vector<double> arm[2];
  for (std::size_t i = 0; i < scores.size(); ++i) arm[z[i]].push_back(scores[i]);
  if (arm[0].empty() || arm[1].empty())
    throw ValidationError("overlap summary requires both exposure arms");

  OverlapSummary s;
  s.quantiles_unexposed = five_quantiles(arm[0]);
  s.quantiles_exposed = five_quantiles(arm[1]);
  const auto [lo0, hi0] = std::minmax_element(arm[0].begin(), arm[0].end());
  const auto [lo1, hi1] = std::minmax_element(arm[1].begin(), arm[1].end());
  for (double v : arm[1])
    if (v < *lo0 || v > *hi0) ++s.n_exposed_outside;
  for (double v : arm[0])
    if (v < *lo1 || v > *hi1) ++s.n_unexposed_outside;
  return s;
}

WeightDiagnostics weight_diagnostics(const std::vector<double>& w,
                                     const std::vector<std::string>& ids,
                                     int count_clamped_scores, std::size_t top_k) {
  if (w.empty()) throw ValidationError("weight diagnostics of an empty vector");
  WeightDiagnostics d;
  d.min = *std::min_element(w.begin(), w.end());
  d.max = *std::max_element(w.begin(), w.end());
  d.mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - d.mean) * (v - d.mean);
  var /= static_cast<double>(w.size());
  d.cv = std::sqrt(var) / d.mean;
  d.count_clamped_scores = count_clamped_scores;

  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return w[a] != w[b] ? w[a] > w[b] : a < b;
  });
  for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
    const std::size_t i = order[k];
    d.top_k_weights.emplace_back(i < ids.size() ? ids[i] : std::to_string(i + 1), w[i]);
  }
  return d;
}

}  // namespace stratipw
