#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/dml.hpp"
#include "ksel/dynamic_estimators.hpp"
#include "ksel/simulation.hpp"
#include "ksel/static_estimators.hpp"

namespace ksel {

// How a replication estimates its target: a plug-in curve evaluated at one or
// many doses, or the debiased cross-fitted estimator with its interval.
enum class ExperimentMethod { curve, dml };

struct ExperimentConfig {
  TargetSpec target;
  ExperimentMethod method = ExperimentMethod::curve;
  VectorXd grid;        // curve method only: score the whole dose grid per rep
  Index folds = 5;      // dml method
  double level = 0.05;  // dml method
  FitOptions fit;
  StaticNuisanceHooks static_hooks;  // dml method: bypass nuisance fitting
  DynamicNuisanceHooks dynamic_hooks;
};

// One replication.  For a dose grid, estimate/truth are grid means and
// abs_error is the root mean squared error over the grid; for a scalar target
// they are the point values and abs_error = |bias|.  The runtime is wall
// clock and is the only field outside the reproducible surface.
struct RepRecord {
  Index n = 0;
  Index rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // failure note when !ok
  double estimate = 0.0;
  double truth = 0.0;
  double bias = 0.0;
  double abs_error = 0.0;
  bool has_ci = false;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool covered = false;
  double runtime_s = 0.0;
};

// Aggregate over the successful replications at one sample size.
struct SizeSummary {
  Index n = 0;
  Index reps_ok = 0;
  Index failures = 0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double mean_bias = std::numeric_limits<double>::quiet_NaN();
  bool has_coverage = false;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double median_runtime_s = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
  std::vector<RepRecord> rows;       // replication order: sizes outer, reps inner
  std::vector<SizeSummary> summary;  // one entry per requested size
};

namespace detail {

// Truth for each evaluated dose; computed once, outside the replication loop.
inline VectorXd experiment_truths(const DgpSpec& dgp, const TargetSpec& target,
                                  const Eigen::Ref<const VectorXd>& doses) {
  VectorXd out(doses.size());
  for (Index g = 0; g < doses.size(); ++g) {
    TargetSpec t = target;
    if (t.kind == TargetSpec::Kind::att)
      t.dprime = doses[g];  // the treated-group curve ranges over d'
    else
      t.d = doses[g];
    out[g] = true_value(dgp, t).value;
  }
  return out;
}

inline VectorXd experiment_curve_values(const Dataset& data, const DgpSpec& dgp,
                                        const ExperimentConfig& cfg,
                                        const Eigen::Ref<const VectorXd>& doses,
                                        std::uint64_t rep_seed) {
  using Kind = TargetSpec::Kind;
  const KernelSet kers = KernelSet::defaults(data);
  if (dgp.dynamic()) {
    DynamicFit fit(data, kers, cfg.fit);
    return fit.ate_curve(doses).values;
  }
  StaticFit fit(data, kers, cfg.fit, /*with_v=*/cfg.target.kind == Kind::cate);
  switch (cfg.target.kind) {
    case Kind::ate:
    case Kind::ate_contrast:
      return fit.ate_curve(doses).values;
    case Kind::ds: {
      // Shifted covariate sample of the same size, from its own substream.
      std::mt19937_64 rng(derive_seed(rep_seed, 1));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      MatrixXd xtilde(data.n(), 1);
      for (Index i = 0; i < data.n(); ++i) xtilde(i, 0) = unif(rng);
      return fit.ds_curve(xtilde, doses).values;
    }
    case Kind::att:
      return fit.att_curve(cfg.target.d, doses).values;
    case Kind::cate:
      return fit.cate_curve(VectorXd::Constant(1, cfg.target.v), doses).values;
    case Kind::grad_ate:
      return fit.grad_ate_curve(doses).values;
  }
  throw ConfigError("run_experiment: unknown target kind");
}

inline EffectEstimate experiment_dml_estimate(const Dataset& data, const DgpSpec& dgp,
                                              const ExperimentConfig& cfg,
                                              std::uint64_t rep_seed) {
  using Kind = TargetSpec::Kind;
  DmlConfig dcfg;
  dcfg.level = cfg.level;
  dcfg.seed = rep_seed;
  dcfg.fit = cfg.fit;
  dcfg.static_hooks = cfg.static_hooks;
  dcfg.dynamic_hooks = cfg.dynamic_hooks;
  if (dgp.dynamic()) {
    if (cfg.target.kind == Kind::ate) return dml_dynamic(data, cfg.target.d, cfg.folds, dcfg);
    if (cfg.target.kind == Kind::ate_contrast)
      return effect_contrast(dml_dynamic(data, 1.0, cfg.folds, dcfg),
                             dml_dynamic(data, 0.0, cfg.folds, dcfg), cfg.level);
    throw ConfigError("run_experiment: dynamic dml supports ate and ate_contrast");
  }
  switch (cfg.target.kind) {
    case Kind::ate:
      return dml_static(data, DmlKind::ate(cfg.target.d), cfg.folds, dcfg);
    case Kind::ate_contrast:
      return effect_contrast(dml_static(data, DmlKind::ate(1.0), cfg.folds, dcfg),
                             dml_static(data, DmlKind::ate(0.0), cfg.folds, dcfg), cfg.level);
    case Kind::att:
      return dml_static(data, DmlKind::att(cfg.target.d, cfg.target.dprime), cfg.folds, dcfg);
    case Kind::cate:
      return dml_static(data, DmlKind::cate(cfg.target.d, cfg.target.v), cfg.folds, dcfg);
    default:
      throw ConfigError("run_experiment: dml supports ate/ate_contrast/att/cate");
  }
}

}  // namespace detail

// Replication study over a ladder of sample sizes.  Per-rep data and fold
// seeds come from derive_seed(derive_seed(seed, size_index), rep), so any
// subset of replications can be reproduced independently.  A failing
// replication records its error note and is excluded from the aggregates; it
// never aborts the study.
inline ExperimentReport run_experiment(const DgpSpec& dgp, const ExperimentConfig& cfg,
                                       const std::vector<Index>& sizes, Index reps,
                                       std::uint64_t seed) {
  using Kind = TargetSpec::Kind;
  if (reps < 1) throw InputError("run_experiment: need reps >= 1");
  if (sizes.empty()) throw InputError("run_experiment: need at least one sample size");
  for (Index n : sizes)
    if (n < 1) throw InputError("run_experiment: sample sizes must be positive");
  dgp.validate();
  cfg.fit.validate();
  if (!(cfg.level > 0.0) || !(cfg.level < 1.0))
    throw ConfigError("run_experiment: level must lie in (0,1)");
  if (cfg.method == ExperimentMethod::dml) {
    if (cfg.grid.size() > 0) throw ConfigError("run_experiment: the dose grid applies to the curve method");
    if (cfg.folds < 2) throw ConfigError("run_experiment: dml needs at least two folds");
    if (cfg.static_hooks.alpha && cfg.target.kind == Kind::ate_contrast)
      throw ConfigError("run_experiment: a balancing-weight hook is target-specific and cannot serve a contrast");
    if (cfg.target.kind == Kind::ds || cfg.target.kind == Kind::grad_ate)
      throw ConfigError("run_experiment: dml supports ate/ate_contrast/att/cate");
  } else {
    if (cfg.target.kind == Kind::ate_contrast && cfg.grid.size() > 0)
      throw ConfigError("run_experiment: a contrast target is scalar; drop the grid");
    if (cfg.target.kind == Kind::ds && cfg.target.shift != TargetSpec::Shift::x_uniform01)
      throw ConfigError("run_experiment: a shifted-population target needs a covariate shift");
    if (dgp.dynamic() && cfg.target.kind != Kind::ate && cfg.target.kind != Kind::ate_contrast)
      throw ConfigError("run_experiment: dynamic curves support ate and ate_contrast");
  }
  if (cfg.grid.size() > 0 && !cfg.grid.allFinite())
    throw InputError("run_experiment: dose grid must be finite");

  const bool grid_mode = cfg.method == ExperimentMethod::curve && cfg.grid.size() > 0;
  const bool contrast = cfg.target.kind == Kind::ate_contrast;
  VectorXd doses;
  if (grid_mode)
    doses = cfg.grid;
  else if (contrast) {
    doses.resize(2);
    doses << 1.0, 0.0;
  } else
    doses = VectorXd::Constant(
        1, cfg.target.kind == Kind::att ? cfg.target.dprime : cfg.target.d);
  const VectorXd truths = contrast
                              ? VectorXd::Constant(1, true_value(dgp, cfg.target).value)
                              : detail::experiment_truths(dgp, cfg.target, doses);

  ExperimentReport report;
  report.rows.reserve(sizes.size() * static_cast<std::size_t>(reps));
  for (std::size_t ni = 0; ni < sizes.size(); ++ni) {
    const Index n = sizes[ni];
    const std::uint64_t size_seed = derive_seed(seed, static_cast<std::uint64_t>(ni));
    for (Index rep = 0; rep < reps; ++rep) {
      RepRecord row;
      row.n = n;
      row.rep = rep;
      row.seed = derive_seed(size_seed, static_cast<std::uint64_t>(rep));
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Dataset data = simulate(dgp, n, row.seed);
        if (cfg.method == ExperimentMethod::curve) {
          const VectorXd values =
              detail::experiment_curve_values(data, dgp, cfg, doses, row.seed);
          if (contrast) {
            row.estimate = values[0] - values[1];
            row.truth = truths[0];
          } else {
            row.estimate = values.mean();
            row.truth = truths.mean();
          }
          row.bias = row.estimate - row.truth;
          row.abs_error = grid_mode
                              ? std::sqrt((values - truths).squaredNorm() /
                                          static_cast<double>(doses.size()))
                              : std::abs(row.bias);
        } else {
          const EffectEstimate est = detail::experiment_dml_estimate(data, dgp, cfg, row.seed);
          row.estimate = est.theta;
          row.truth = truths[0];
          row.bias = row.estimate - row.truth;
          row.abs_error = std::abs(row.bias);
          row.has_ci = true;
          row.ci_lo = est.ci_lo;
          row.ci_hi = est.ci_hi;
          row.covered = est.ci_lo <= row.truth && row.truth <= est.ci_hi;
        }
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.rows.push_back(std::move(row));
    }

    SizeSummary agg;
    agg.n = n;
    double sq = 0.0, bias_sum = 0.0, cover_sum = 0.0;
    std::vector<double> times;
    for (std::size_t r = report.rows.size() - static_cast<std::size_t>(reps);
         r < report.rows.size(); ++r) {
      const RepRecord& row = report.rows[r];
      if (!row.ok) {
        ++agg.failures;
        continue;
      }
      ++agg.reps_ok;
      sq += row.abs_error * row.abs_error;
      bias_sum += row.bias;
      if (row.has_ci) {
        agg.has_coverage = true;
        cover_sum += row.covered ? 1.0 : 0.0;
      }
      times.push_back(row.runtime_s);
    }
    if (agg.reps_ok > 0) {
      const double k = static_cast<double>(agg.reps_ok);
      agg.rmse = std::sqrt(sq / k);
      agg.mean_bias = bias_sum / k;
      if (agg.has_coverage) agg.coverage = cover_sum / k;
      std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
      agg.median_runtime_s = times[times.size() / 2];
    }
    report.summary.push_back(agg);
  }
  return report;
}

}  // namespace ksel
