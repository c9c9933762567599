#include "ksel/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ksel/simulation.hpp"

using namespace ksel;

namespace {

// Curve study on the continuous static design over a compact interior grid.
ExperimentConfig quadratic_curve_config() {
  ExperimentConfig cfg;
  cfg.target.kind = TargetSpec::Kind::ate;
  cfg.method = ExperimentMethod::curve;
  cfg.grid = VectorXd::LinSpaced(21, -0.5, 0.5);
  return cfg;
}

// True nuisances of the discrete static design, for exact moment mechanics.
StaticNuisanceHooks discrete_design_oracle(double dose) {
  StaticNuisanceHooks hooks;
  hooks.gamma = [](double d, double, const Eigen::Ref<const VectorXd>& x) {
    return d + 0.5 * x[0];
  };
  hooks.alpha = [dose](double s, double d, double, const Eigen::Ref<const VectorXd>& x) {
    if (s != 1.0 || d != dose) return 0.0;
    const double pd = dose == 1.0 ? 0.5 + 0.2 * x[0] : 0.5 - 0.2 * x[0];
    const double ps = 0.6 + 0.2 * dose + 0.1 * x[0];
    return 1.0 / (pd * ps);
  };
  return hooks;
}

}  // namespace

TEST(Experiment, SingleRepProducesASingleRow) {
  ExperimentConfig cfg = quadratic_curve_config();
  const ExperimentReport report = run_experiment(DgpSpec::s2(), cfg, {80}, 1, 3);
  ASSERT_EQ(report.rows.size(), 1u);
  ASSERT_EQ(report.summary.size(), 1u);
  const RepRecord& row = report.rows[0];
  EXPECT_TRUE(row.ok);
  EXPECT_EQ(row.n, 80);
  EXPECT_EQ(row.rep, 0);
  EXPECT_FALSE(row.has_ci);
  EXPECT_TRUE(std::isfinite(row.abs_error));
  EXPECT_DOUBLE_EQ(row.bias, row.estimate - row.truth);
  EXPECT_EQ(report.summary[0].reps_ok, 1);
  EXPECT_EQ(report.summary[0].failures, 0);
  EXPECT_DOUBLE_EQ(report.summary[0].rmse, row.abs_error);
  EXPECT_FALSE(report.summary[0].has_coverage);
}

TEST(Experiment, TruthsFollowTheClosedForms) {
  ExperimentConfig cfg = quadratic_curve_config();
  cfg.grid.resize(3);
  cfg.grid << 0.0, 0.5, 1.0;
  const ExperimentReport report = run_experiment(DgpSpec::s2(), cfg, {60}, 1, 5);
  // theta0(d) = d^2 on the quadratic design, averaged over the grid.
  EXPECT_DOUBLE_EQ(report.rows[0].truth, (0.0 + 0.25 + 1.0) / 3.0);

  StaticParams p;
  p.d_on_x = 0.0;  // treatment independent of X: the treated-group curve is theta0(d')
  ExperimentConfig att = quadratic_curve_config();
  att.target.kind = TargetSpec::Kind::att;
  att.target.d = 0.3;
  att.grid.resize(2);
  att.grid << 0.0, 1.0;
  const ExperimentReport rep2 = run_experiment(DgpSpec::custom_static(p), att, {60}, 1, 5);
  EXPECT_DOUBLE_EQ(rep2.rows[0].truth, 0.5);
}

TEST(Experiment, ReportsAreBitReproducible) {
  ExperimentConfig cfg = quadratic_curve_config();
  const ExperimentReport a = run_experiment(DgpSpec::s2(), cfg, {50, 70}, 3, 11);
  const ExperimentReport b = run_experiment(DgpSpec::s2(), cfg, {50, 70}, 3, 11);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].seed, b.rows[i].seed);
    EXPECT_EQ(a.rows[i].ok, b.rows[i].ok);
    EXPECT_EQ(a.rows[i].estimate, b.rows[i].estimate);  // bitwise, not approximate
    EXPECT_EQ(a.rows[i].truth, b.rows[i].truth);
    EXPECT_EQ(a.rows[i].bias, b.rows[i].bias);
    EXPECT_EQ(a.rows[i].abs_error, b.rows[i].abs_error);
    EXPECT_EQ(a.rows[i].error, b.rows[i].error);
  }
  ASSERT_EQ(a.summary.size(), b.summary.size());
  for (std::size_t k = 0; k < a.summary.size(); ++k) {
    EXPECT_EQ(a.summary[k].rmse, b.summary[k].rmse);
    EXPECT_EQ(a.summary[k].mean_bias, b.summary[k].mean_bias);
    EXPECT_EQ(a.summary[k].reps_ok, b.summary[k].reps_ok);
  }

  const ExperimentReport c = run_experiment(DgpSpec::s2(), cfg, {50, 70}, 3, 12);
  EXPECT_NE(a.rows[0].estimate, c.rows[0].estimate);
}

TEST(Experiment, FailuresAreRecordedNotFatal) {
  // Two-unit folds on the discrete design: some folds hold no treated (or no
  // selected treated) unit, so individual replications fail by construction.
  ExperimentConfig cfg;
  cfg.target.kind = TargetSpec::Kind::ate;
  cfg.target.d = 1.0;
  cfg.method = ExperimentMethod::dml;
  cfg.folds = 5;
  const Index reps = 40;
  const ExperimentReport report = run_experiment(DgpSpec::s1(), cfg, {10}, reps, 21);
  const SizeSummary& agg = report.summary[0];
  EXPECT_EQ(agg.reps_ok + agg.failures, reps);
  EXPECT_GE(agg.failures, 1);
  EXPECT_GE(agg.reps_ok, 1);
  for (const RepRecord& row : report.rows) {
    if (!row.ok) EXPECT_FALSE(row.error.empty());
  }
  EXPECT_TRUE(std::isfinite(agg.rmse));
  EXPECT_TRUE(agg.has_coverage);
}

TEST(Experiment, OracleCoverageMatchesTheNominalLevel) {
  ExperimentConfig cfg;
  cfg.target.kind = TargetSpec::Kind::ate;
  cfg.target.d = 1.0;
  cfg.method = ExperimentMethod::dml;
  cfg.folds = 5;
  cfg.static_hooks = discrete_design_oracle(1.0);
  const ExperimentReport report = run_experiment(DgpSpec::s1(), cfg, {1000}, 200, 2025);
  const SizeSummary& agg = report.summary[0];
  EXPECT_EQ(agg.failures, 0);
  ASSERT_TRUE(agg.has_coverage);
  EXPECT_GE(agg.coverage, 0.90);
  EXPECT_LE(agg.coverage, 0.99);
  EXPECT_LE(std::abs(agg.mean_bias), 0.03);
}

TEST(Experiment, CurveErrorShrinksWithSampleSize) {
  ExperimentConfig cfg = quadratic_curve_config();
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ExperimentReport report = run_experiment(DgpSpec::s2(), cfg, {400, 1600}, 1, seed);
    ASSERT_EQ(report.summary.size(), 2u);
    ASSERT_EQ(report.summary[0].reps_ok, 1);
    ASSERT_EQ(report.summary[1].reps_ok, 1);
    if (report.summary[1].rmse < report.summary[0].rmse) ++improved;
  }
  EXPECT_GE(improved, 8);
}

TEST(Experiment, RejectsBadConfigurations) {
  ExperimentConfig curve = quadratic_curve_config();
  EXPECT_THROW(run_experiment(DgpSpec::s2(), curve, {50}, 0, 1), InputError);
  EXPECT_THROW(run_experiment(DgpSpec::s2(), curve, {}, 3, 1), InputError);
  EXPECT_THROW(run_experiment(DgpSpec::s2(), curve, {50, 0}, 3, 1), InputError);

  ExperimentConfig dml = curve;
  dml.method = ExperimentMethod::dml;
  EXPECT_THROW(run_experiment(DgpSpec::s2(), dml, {50}, 3, 1), ConfigError);  // grid set
  dml.grid.resize(0);
  dml.folds = 1;
  EXPECT_THROW(run_experiment(DgpSpec::s2(), dml, {50}, 3, 1), ConfigError);
  dml.folds = 5;
  dml.level = 1.1;
  EXPECT_THROW(run_experiment(DgpSpec::s2(), dml, {50}, 3, 1), ConfigError);
  dml.level = 0.05;
  dml.target.kind = TargetSpec::Kind::ate_contrast;
  dml.static_hooks = discrete_design_oracle(1.0);
  EXPECT_THROW(run_experiment(DgpSpec::s1(), dml, {50}, 3, 1), ConfigError);
  dml.static_hooks = {};
  dml.target.kind = TargetSpec::Kind::ds;
  EXPECT_THROW(run_experiment(DgpSpec::s2(), dml, {50}, 3, 1), ConfigError);

  ExperimentConfig shift = quadratic_curve_config();
  shift.target.kind = TargetSpec::Kind::ds;  // no covariate shift requested
  EXPECT_THROW(run_experiment(DgpSpec::s2(), shift, {50}, 3, 1), ConfigError);

  ExperimentConfig dyncfg;
  dyncfg.target.kind = TargetSpec::Kind::att;
  EXPECT_THROW(run_experiment(DgpSpec::d1(), dyncfg, {50}, 3, 1), ConfigError);
}

// The simulators' own law: million-draw conditional moments agree with the
// structural equations within three Monte Carlo standard errors.
TEST(Simulation, MillionDrawMomentsMatchTheDesign) {
  const Index big = 1000000;

  {  // discrete design: conditional outcome means and selection rates at the atoms
    const Dataset data = simulate(DgpSpec::s1(), big, 99);
    for (double dq : {0.0, 1.0})
      for (double xq : {-1.0, 1.0}) {
        double ysum = 0.0, ssum = 0.0;
        Index cnt = 0, scnt = 0;
        for (Index i = 0; i < big; ++i) {
          if (data.d[i] != dq || data.x(i, 0) != xq) continue;
          ++cnt;
          ssum += data.s[i];
          if (data.s[i] == 1.0) {
            ysum += data.sy[i];
            ++scnt;
          }
        }
        ASSERT_GT(scnt, 0);
        const double cell = static_cast<double>(cnt);
        const double psel = 0.6 + 0.2 * dq + 0.1 * xq;
        EXPECT_NEAR(ssum / cell, psel, 3.0 * std::sqrt(psel * (1.0 - psel) / cell));
        // Selection is independent of Y given (D,X), so the selected mean is unbiased.
        EXPECT_NEAR(ysum / static_cast<double>(scnt), dq + 0.5 * xq,
                    3.0 * 0.1 / std::sqrt(static_cast<double>(scnt)));
      }
  }

  {  // continuous design: the structural residual has mean zero
    const Dataset data = simulate(DgpSpec::s2(), big, 101);
    double rsum = 0.0;
    Index scnt = 0;
    for (Index i = 0; i < big; ++i) {
      if (data.s[i] != 1.0) continue;
      const double di = data.d[i], xi = data.x(i, 0);
      rsum += data.sy[i] - (di * di + xi * di);
      ++scnt;
    }
    EXPECT_NEAR(rsum / static_cast<double>(scnt), 0.0,
                3.0 * 0.1 / std::sqrt(static_cast<double>(scnt)));
  }

  {  // dynamic design: mediator and outcome residuals have mean zero
    const Dataset data = simulate(DgpSpec::d1(), big, 103);
    double msum = 0.0, rsum = 0.0;
    Index scnt = 0;
    for (Index i = 0; i < big; ++i) {
      msum += data.m(i, 0) - (data.d[i] + data.x(i, 0));
      if (data.s[i] != 1.0) continue;
      rsum += data.sy[i] - (data.m(i, 0) + data.x(i, 0));
      ++scnt;
    }
    EXPECT_NEAR(msum / static_cast<double>(big), 0.0, 3.0 * 0.25 / std::sqrt(static_cast<double>(big)));
    EXPECT_NEAR(rsum / static_cast<double>(scnt), 0.0,
                3.0 * 0.1 / std::sqrt(static_cast<double>(scnt)));
  }
}
