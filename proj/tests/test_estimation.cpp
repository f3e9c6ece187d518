#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stratipw/errors.hpp"
#include "stratipw/estimation.hpp"
#include "stratipw/rng.hpp"
#include "stratipw/simulate.hpp"

using namespace stratipw;

namespace {

SimConfig outcome_sim(std::uint64_t seed) {
  SimConfig cfg;
  cfg.outcome_model = OutcomeModel{};
  cfg.seed = seed;
  return cfg;
}

PipelineConfig default_pipeline() {
  PipelineConfig pc;
  pc.design.shared = DesignSpec{{"age", "stage_IV"}, {}};
  return pc;
}

}  // namespace

TEST_CASE("weighted difference covers the hand-checked cases") {
  CHECK(ate_weighted_difference({1, 3, 0, 4}, {1, 1, 0, 0}, {1, 1, 1, 1}) ==
        doctest::Approx(0.0));  // means 2 and 2
  CHECK(ate_weighted_difference({1, 3, 0, 4}, {1, 1, 0, 0}, {1, 1, 3, 1}) ==
        doctest::Approx(1.0));  // 2 - 1
  CHECK(ate_weighted_difference({5, 5, 5}, {1, 0, 0}, {2, 1, 1}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(ate_weighted_difference({1, 2}, {1, 1}, {1, 1}), DomainError);
}

TEST_CASE("covariate-free WLS reproduces the closed-form difference") {
  Rng rng(81);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 10 + rng.uniform_index(50);
    std::vector<double> y(n), w(n);
    std::vector<int> z(n);
    bool both = false;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal(0, 3);
      w[i] = std::exp(rng.normal(0, 0.7));
      z[i] = rng.bernoulli(0.5);
    }
    z[0] = 0;
    z[1] = 1;
    (void)both;
    const WlsFit fit = weighted_outcome_regression(y, z, w);
    CHECK(fit.coefficients[1] ==
          doctest::Approx(ate_weighted_difference(y, z, w)).epsilon(1e-10));
  }
}

TEST_CASE("five-row WLS matches an independent normal-equations solve") {
  const std::vector<double> y = {2.0, 3.5, -1.0, 0.5, 4.0};
  const std::vector<int> z = {1, 0, 1, 0, 1};
  const std::vector<double> w = {1.0, 2.0, 0.5, 1.5, 1.0};
  const std::vector<double> extra = {0.3, -1.2, 2.2, 0.0, 1.1};
  const WlsFit fit = weighted_outcome_regression(y, z, w, {extra}, {"x"});

  // Oracle: build X'WX and X'Wy with plain loops, solve by elimination.
  oracles::Matrix X;
  for (std::size_t i = 0; i < y.size(); ++i)
    X.push_back({1.0, static_cast<double>(z[i]), extra[i]});
  oracles::Matrix xtwx(3, std::vector<double>(3, 0.0));
  std::vector<double> xtwy(3, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      xtwy[a] += X[i][a] * w[i] * y[i];
      for (int b = 0; b < 3; ++b) xtwx[a][b] += X[i][a] * w[i] * X[i][b];
    }
  const auto beta = oracles::gauss_solve(xtwx, xtwy);
  for (int j = 0; j < 3; ++j)
    CHECK(fit.coefficients[j] == doctest::Approx(beta[static_cast<std::size_t>(j)]).epsilon(1e-10));
}

TEST_CASE("rank-deficient outcome design is reported") {
  const std::vector<double> y = {1, 2, 3, 4};
  const std::vector<int> z = {0, 1, 0, 1};
  const std::vector<double> w = {1, 1, 1, 1};
  const std::vector<double> z_copy = {0, 1, 0, 1};
  CHECK_THROWS_AS(weighted_outcome_regression(y, z, w, {z_copy}, {"z_again"}),
                  RankDeficiencyError);
}

TEST_CASE("HC0 equals the n-denominator classical SE under constant |residual|") {
  // Two patients per (arm, sign) cell makes the OLS residuals exactly +-c.
  const double c = 0.75;
  std::vector<double> y;
  std::vector<int> z;
  std::vector<double> w;
  for (int arm = 0; arm < 2; ++arm)
    for (int rep = 0; rep < 4; ++rep) {
      const double base = arm == 1 ? 3.0 : 1.0;
      y.push_back(base + (rep % 2 == 0 ? c : -c));
      z.push_back(arm);
      w.push_back(1.0);
    }
  const WlsFit fit = weighted_outcome_regression(y, z, w);
  for (Eigen::Index i = 0; i < fit.residuals.size(); ++i)
    CHECK(std::abs(fit.residuals[i]) == doctest::Approx(c).epsilon(1e-12));

  // Classical sigma^2 (X'X)^-1 with sigma^2 = c^2: Z-coefficient variance
  // is c^2 * (1/n1 + 1/n0).
  const double classical = c * std::sqrt(1.0 / 4 + 1.0 / 4);
  CHECK(sandwich_se(fit) == doctest::Approx(classical).epsilon(1e-10));
}

TEST_CASE("sandwich SE ignores a global weight rescaling") {
  Rng rng(91);
  const std::size_t n = 120;
  std::vector<double> y(n), w(n);
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = rng.bernoulli(0.4);
    w[i] = std::exp(rng.normal(0, 0.6));
    y[i] = 2.0 * z[i] + rng.normal(0, 1.5);
  }
  std::vector<double> scaled = w;
  for (double& v : scaled) v *= 7.25;
  const double a = sandwich_se(weighted_outcome_regression(y, z, w));
  const double b = sandwich_se(weighted_outcome_regression(y, z, scaled));
  CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("conditional estimates are labelled as such") {
  const Cohort cohort = simulate_cohort(outcome_sim(3));
  const WeightSet ws = stratified_weight_pipeline(cohort, DesignSpec{{"age", "stage_IV"}, {}});
  const EffectEstimate marginal = sandwich_effect(cohort, ws.final_weights());
  CHECK(marginal.estimand == "ATE-marginal");
  CHECK(marginal.method == "sandwich");
  CHECK(marginal.ci_low <= marginal.point);
  CHECK(marginal.point <= marginal.ci_high);

  const EffectEstimate conditional =
      sandwich_effect(cohort, ws.final_weights(), {"age", "stage_IV"});
  CHECK(conditional.estimand == "conditional");
}

TEST_CASE("missing outcomes list the offending ids") {
  std::vector<PatientRecord> recs;
  Rng rng(7);
  for (int i = 0; i < 8; ++i) {
    PatientRecord r{std::to_string(i + 1), "A", i % 2, {rng.normal(0, 1)}, {}};
    if (i != 5) r.outcome = rng.normal(0, 1);
    recs.push_back(std::move(r));
  }
  const Cohort cohort(std::move(recs), {"x"});
  const std::vector<double> w(cohort.size(), 1.0);
  CHECK_THROWS_WITH_AS(sandwich_effect(cohort, w), doctest::Contains("6"), ValidationError);
}

TEST_CASE("bootstrap is deterministic and degenerates cleanly") {
  SimConfig cfg = outcome_sim(21);
  const Cohort cohort = simulate_cohort(cfg);
  BootstrapOptions opts;
  opts.n_resamples = 60;
  opts.seed = 20250808;

  const EffectEstimate a = bootstrap_effect(cohort, default_pipeline(), opts);
  const EffectEstimate b = bootstrap_effect(cohort, default_pipeline(), opts);
  CHECK(a.point == b.point);
  CHECK(a.se == b.se);
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_high == b.ci_high);
  CHECK(a.method == "bootstrap");
  CHECK(*a.n_boot == 60);
  CHECK(*a.boot_failures == 0);

  opts.seed = 1;
  const EffectEstimate c = bootstrap_effect(cohort, default_pipeline(), opts);
  CHECK(c.se != a.se);  // different stream, different resamples
}

TEST_CASE("constant outcomes give a zero effect with zero SE") {
  SimConfig cfg;
  cfg.seed = 33;
  Cohort base = simulate_cohort(cfg);
  std::vector<PatientRecord> recs = base.patients();
  for (auto& r : recs) r.outcome = 4.25;
  const Cohort cohort(std::move(recs), base.covariate_names());

  BootstrapOptions opts;
  opts.n_resamples = 40;
  opts.seed = 9;
  const EffectEstimate est = bootstrap_effect(cohort, default_pipeline(), opts);
  CHECK(est.point == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(est.se == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(est.ci_low == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(est.ci_high == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("systematic resample failures raise bootstrap-unstable") {
  // Stratum B's exposed cell is {x=0, x=1} and its unexposed cell {x=0}: the
  // full-sample fit works, but any resample drawing the exposed pair as two
  // copies of x=0 has a constant covariate and fails rank detection. That
  // happens in about a quarter of resamples, far above the 10% tolerance.
  std::vector<PatientRecord> recs;
  Rng rng(77);
  int id = 0;
  for (int i = 0; i < 12; ++i) {
    PatientRecord r{std::to_string(++id), "A", i % 2, {rng.normal(0, 1)}, rng.normal(0, 1)};
    recs.push_back(std::move(r));
  }
  recs.push_back({std::to_string(++id), "B", 1, {0.0}, rng.normal(0, 1)});
  recs.push_back({std::to_string(++id), "B", 1, {1.0}, rng.normal(0, 1)});
  recs.push_back({std::to_string(++id), "B", 0, {0.0}, rng.normal(0, 1)});
  const Cohort cohort(std::move(recs), {"x"});
  BootstrapOptions opts;
  opts.n_resamples = 40;
  opts.seed = 2;
  PipelineConfig pc;
  pc.design.shared = DesignSpec{{"x"}, {}};
  CHECK_THROWS_AS(bootstrap_effect(cohort, pc, opts), BootstrapUnstableError);
}

TEST_CASE("stratum effects collapse to the marginal estimate for one stratum") {
  std::vector<PatientRecord> recs;
  Rng rng(15);
  for (int i = 0; i < 40; ++i) {
    PatientRecord r{std::to_string(i + 1), "only", i % 2, {rng.normal(0, 1)},
                    rng.normal(1.0 + (i % 2), 0.5)};
    recs.push_back(std::move(r));
  }
  const Cohort cohort(std::move(recs), {"x"});
  PipelineConfig pc;
  pc.design.shared = DesignSpec{{"x"}, {}};
  const WeightSet ws = run_weight_pipeline(cohort, pc);

  const auto effects = stratum_effects(cohort, ws);
  REQUIRE(effects.size() == 1);
  const EffectEstimate marginal = sandwich_effect(cohort, ws.final_weights());
  CHECK(effects.at("only").point == doctest::Approx(marginal.point).epsilon(1e-10));
  CHECK(effects.at("only").estimand == "stratum:only");
}

TEST_CASE("stage-1 and stage-2 weights give identical within-stratum estimates") {
  const Cohort cohort = simulate_cohort(outcome_sim(44));
  const WeightSet ws = stratified_weight_pipeline(cohort, DesignSpec{{"age", "stage_IV"}, {}});
  const auto rows = stratum_row_indices(cohort);
  for (const auto& [stratum, idx] : rows) {
    std::vector<double> y, w1, w2;
    std::vector<int> z;
    for (std::size_t i : idx) {
      y.push_back(*cohort.patients()[i].outcome);
      z.push_back(cohort.patients()[i].exposure);
      w1.push_back((*ws.stage1)[i]);
      w2.push_back((*ws.stage2)[i]);
    }
    CHECK(ate_weighted_difference(y, z, w1) ==
          doctest::Approx(ate_weighted_difference(y, z, w2)).epsilon(1e-10));
  }
}

TEST_CASE("the marginal estimate is the share-weighted average of stratum effects") {
  const Cohort cohort = simulate_cohort(outcome_sim(55));
  const WeightSet ws = stratified_weight_pipeline(cohort, DesignSpec{{"age", "stage_IV"}, {}});
  const EffectEstimate marginal = sandwich_effect(cohort, ws.final_weights());
  const auto effects = stratum_effects(cohort, ws);

  const auto rows = stratum_row_indices(cohort);
  double combined = 0.0;
  for (const auto& [stratum, idx] : rows)
    combined += effects.at(stratum).point * static_cast<double>(idx.size()) /
                static_cast<double>(cohort.size());
  CHECK(marginal.point == doctest::Approx(combined).epsilon(1e-10));
}
