#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/dynamic_estimators.hpp"
#include "ksel/kernels.hpp"
#include "ksel/options.hpp"
#include "ksel/ridge.hpp"
#include "ksel/riesz.hpp"
#include "ksel/static_estimators.hpp"
#include "ksel/stats.hpp"

namespace ksel {

// ---------------------------------------------------------------------------
// Fold bookkeeping
// ---------------------------------------------------------------------------

// A random partition of {0..n-1} into folds whose sizes differ by at most one.
struct FoldPlan {
  int folds = 0;
  std::vector<int> assignment;  // fold id per observation, values in [0, folds)
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(assignment.size()); }

  // Observation indices per fold, ascending within each fold.
  std::vector<std::vector<Index>> groups() const {
    std::vector<std::vector<Index>> g(static_cast<std::size_t>(folds));
    for (Index i = 0; i < size(); ++i) g[static_cast<std::size_t>(assignment[i])].push_back(i);
    return g;
  }

  // Everything outside the given fold, ascending — the fold's training rows.
  std::vector<Index> complement(int fold) const {
    std::vector<Index> out;
    out.reserve(assignment.size());
    for (Index i = 0; i < size(); ++i)
      if (assignment[i] != fold) out.push_back(i);
    return out;
  }

  void validate(Index n) const {
    if (folds < 2) throw ConfigError("FoldPlan: need at least two folds");
    if (size() != n) throw InputError("FoldPlan: assignment length disagrees with the sample");
    std::vector<Index> counts(static_cast<std::size_t>(folds), 0);
    for (int f : assignment) {
      if (f < 0 || f >= folds) throw InputError("FoldPlan: fold id out of range");
      ++counts[static_cast<std::size_t>(f)];
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*hi - *lo > 1) throw InputError("FoldPlan: fold sizes differ by more than one");
  }
};

// Balanced partition: shuffle the indices, then deal them out round-robin.
inline FoldPlan make_folds(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("make_folds: need at least two folds");
  if (n < 2 * static_cast<Index>(folds))
    throw InputError("make_folds: need n >= 2L observations, got n=" + std::to_string(n) +
                     " with L=" + std::to_string(folds));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.assignment.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i)
    plan.assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % folds);
  return plan;
}

// ---------------------------------------------------------------------------
// Estimand selection, configuration, and results
// ---------------------------------------------------------------------------

// Discrete-treatment estimand for the cross-fitted procedures.  d is the
// treatment level of interest; for treated-group means d is the conditioning
// level and dprime the counterfactual dose; v is the subgroup level.
struct DmlKind {
  Estimand estimand = Estimand::ate;
  double d = 1.0;
  double dprime = 0.0;
  double v = 1.0;

  static DmlKind ate(double d) { return {Estimand::ate, d, 0.0, 0.0}; }
  // Shifted-population mean; the balancing weights fall back to the training
  // population, so this differs from ate only in its reported tag.
  static DmlKind ds(double d) { return {Estimand::ds, d, 0.0, 0.0}; }
  static DmlKind att(double d, double dprime) { return {Estimand::att, d, dprime, 0.0}; }
  static DmlKind cate(double d, double v) { return {Estimand::cate, d, 0.0, v}; }
};

// Test seams: a hook, when set, replaces the corresponding fitted nuisance
// wholesale.  Nothing is fitted for a hooked nuisance and the clipping and
// censoring guards are bypassed — the hook's word is final.
struct StaticNuisanceHooks {
  // Outcome regression at (1, d, [v,] x); v is the subgroup level for
  // subgroup kinds and the observed subgroup value (or 0) elsewhere.
  std::function<double(double d, double v, const Eigen::Ref<const VectorXd>& x)> gamma;
  // Balancing weight at the observed unit.
  std::function<double(double s, double d, double v, const Eigen::Ref<const VectorXd>& x)> alpha;
};

struct DynamicNuisanceHooks {
  // Outcome regression gamma(1, d, x, m).
  std::function<double(double d, const Eigen::Ref<const VectorXd>& x,
                       const Eigen::Ref<const VectorXd>& m)>
      gamma;
  // Counterfactual mean omega(1, d; x).
  std::function<double(double d, const Eigen::Ref<const VectorXd>& x)> omega;
  // Treatment propensity pi(d; x).
  std::function<double(double d, const Eigen::Ref<const VectorXd>& x)> pi;
  // Selection propensity rho(1; d, x, m).
  std::function<double(double d, const Eigen::Ref<const VectorXd>& x,
                       const Eigen::Ref<const VectorXd>& m)>
      rho;
};

struct DmlConfig {
  double level = 0.05;     // two-sided miscoverage a of the reported interval
  std::uint64_t seed = 0;  // fold-assignment seed
  FitOptions fit{};        // penalty selection, resolved per fold
  double clip_eps = 0.01;  // propensities pulled into [eps, 1-eps]
  double censor_bound = RieszEstimator::default_censor_bound();  // balancing-weight clamp
  std::optional<KernelSet> kernels;  // defaults to indicator-treatment kernels
  std::optional<FoldPlan> plan;      // overrides the seeded partition when set
  StaticNuisanceHooks static_hooks;
  DynamicNuisanceHooks dynamic_hooks;

  void validate() const {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("DmlConfig: level must lie in (0,1)");
    if (!(clip_eps > 0.0 && clip_eps < 0.5))
      throw ConfigError("DmlConfig: clip_eps must lie in (0, 0.5)");
    if (!(censor_bound > 0.0)) throw ConfigError("DmlConfig: censor_bound must be positive");
    fit.validate();
  }
};

// What each fold's nuisance stage did: the penalties it picked and how often
// the guards engaged.  Penalties a path does not use stay zero.
struct FoldDiagnostics {
  int fold = 0;
  Index held_out = 0;
  double lambda = 0.0;   // outcome-regression penalty
  double lambda3 = 0.0;  // balancing-weight penalty (static path)
  double lambda4 = 0.0;  // mediator-embedding penalty (dynamic path)
  double lambda6 = 0.0;  // treatment-propensity penalty (dynamic path)
  double lambda7 = 0.0;  // selection-propensity penalty (dynamic path)
  Index censored = 0;    // balancing-weight evaluations clamped at the bound
  Index clipped = 0;     // propensity evaluations pulled into the clip band
};

// Cross-fitted point estimate with its Gaussian interval.  psi holds the
// per-observation moment contributions in observation order; for ratio
// estimands (treated-group and subgroup means) it holds the delta-method
// linearization recentred at theta.  Either way theta is the mean of psi and
// sigma^2 its mean squared deviation.
struct EffectEstimate {
  double theta = 0.0;
  double sigma = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.05;
  Index n = 0;
  int folds = 0;
  VectorXd psi;
  std::vector<FoldDiagnostics> fold_info;
};

// ---------------------------------------------------------------------------
// Per-fold nuisances (public so harnesses can fit folds in isolation)
// ---------------------------------------------------------------------------

// Static-path nuisances fitted on one fold's complement: the outcome
// regression and the balancing weight for the requested kind.
class StaticFoldNuisance {
 public:
  StaticFoldNuisance(const Dataset& train, const KernelSet& kers, const DmlKind& kind,
                     const DmlConfig& cfg)
      : kind_(kind), hooks_(cfg.static_hooks) {
    if (!hooks_.gamma)
      fit_.emplace(train, kers, cfg.fit, /*with_v=*/kind.estimand == Estimand::cate);
    if (!hooks_.alpha)
      riesz_.emplace(RieszBlocks::build(train, kers, riesz_query(kind)), cfg.fit,
                     cfg.censor_bound);
  }

  // Outcome regression at (1, dval, [vval,] x).
  double regression(double dval, double vval, const Eigen::Ref<const VectorXd>& x) const {
    if (hooks_.gamma) return hooks_.gamma(dval, vval, x);
    if (kind_.estimand == Estimand::cate)
      return fit_->gamma(1.0, dval, VectorXd::Constant(1, vval), x);
    return fit_->gamma(1.0, dval, x);
  }

  // Censored balancing weight at the observed unit.
  double weight(double s, double dval, double vval, const Eigen::Ref<const VectorXd>& x) const {
    if (hooks_.alpha) return hooks_.alpha(s, dval, vval, x);
    if (kind_.estimand == Estimand::cate)
      return riesz_->value(s, dval, VectorXd::Constant(1, vval), x);
    return riesz_->value(s, dval, x);
  }

  double lambda() const { return fit_ ? fit_->lambda() : 0.0; }
  double lambda3() const { return riesz_ ? riesz_->lambda3() : 0.0; }
  Index censored() const { return riesz_ ? riesz_->censored_count() : 0; }

  static RieszQuery riesz_query(const DmlKind& kind) {
    switch (kind.estimand) {
      case Estimand::ate:
        return {RieszKind::ate, kind.d, 0.0, 0.0};
      case Estimand::ds:
        return {RieszKind::ds, kind.d, 0.0, 0.0};
      case Estimand::att:
        return {RieszKind::att, kind.d, kind.dprime, 0.0};
      case Estimand::cate:
        return {RieszKind::cate, kind.d, 0.0, kind.v};
      default:
        throw ConfigError("dml_static: kind must be one of ate/ds/att/cate");
    }
  }

 private:
  DmlKind kind_;
  StaticNuisanceHooks hooks_;
  std::optional<StaticFit> fit_;
  std::optional<RieszEstimator> riesz_;
};

// Dynamic-path nuisances fitted on one fold's complement: the outcome
// regression with its counterfactual mean, and the two propensities.
class DynamicFoldNuisance {
 public:
  DynamicFoldNuisance(const Dataset& train, const KernelSet& kers, const DmlConfig& cfg)
      : hooks_(cfg.dynamic_hooks), clip_(cfg.clip_eps) {
    if (!hooks_.gamma || !hooks_.omega) fit_.emplace(train, kers, cfg.fit);
    const bool need_pi = !hooks_.pi;
    const bool need_rho = !hooks_.rho;
    if (need_pi || need_rho) {
      const GramSet g = GramSet::build(train, kers, /*with_m=*/true, /*with_v=*/false);
      x_ = train.x;
      kx_ = kers.x;
      if (need_pi) {
        lambda6_ = resolve_scalar_lambda(cfg.fit, g.xx, train.d);
        wpi_ = ridge_solve(g.xx, train.d, lambda6_);
      }
      if (need_rho) {
        d_ = train.d;
        m_ = train.m;
        kd_ = kers.d;
        km_ = *kers.m;
        const MatrixXd kfac = g.dd.cwiseProduct(g.xx).cwiseProduct(g.mm);
        lambda7_ = resolve_scalar_lambda(cfg.fit, kfac, train.s);
        wrho_ = ridge_solve(kfac, train.s, lambda7_);
      }
    }
  }

  // Outcome regression gamma(1, dval, x, m).
  double gamma(double dval, const Eigen::Ref<const VectorXd>& x,
               const Eigen::Ref<const VectorXd>& m) const {
    if (hooks_.gamma) return hooks_.gamma(dval, x, m);
    return fit_->gamma(1.0, dval, x, m);
  }

  // Counterfactual mean omega(1, dval; x).
  double omega(double dval, const Eigen::Ref<const VectorXd>& x) const {
    if (hooks_.omega) return hooks_.omega(dval, x);
    return fit_->omega(dval, x);
  }

  // Clipped treatment propensity pi(dval; x) for dval in {0,1}.
  double pi(double dval, const Eigen::Ref<const VectorXd>& x) const {
    if (hooks_.pi) return hooks_.pi(dval, x);
    const double p1 = wpi_.dot(gram_column(kx_, x_, x));
    return clip(dval == 1.0 ? p1 : 1.0 - p1);
  }

  // Clipped selection propensity rho(1; dval, x, m).
  double rho(double dval, const Eigen::Ref<const VectorXd>& x,
             const Eigen::Ref<const VectorXd>& m) const {
    if (hooks_.rho) return hooks_.rho(dval, x, m);
    const VectorXd col = gram_column(kd_, d_, dval)
                             .cwiseProduct(gram_column(kx_, x_, x))
                             .cwiseProduct(gram_column(km_, m_, m));
    return clip(wrho_.dot(col));
  }

  double lambda() const { return fit_ ? fit_->lambda() : 0.0; }
  double lambda4() const { return fit_ ? fit_->lambda4() : 0.0; }
  double lambda6() const { return lambda6_; }
  double lambda7() const { return lambda7_; }
  Index clipped() const { return clipped_; }

 private:
  double clip(double p) const {
    const double c = std::clamp(p, clip_, 1.0 - clip_);
    if (c != p) ++clipped_;
    return c;
  }

  DynamicNuisanceHooks hooks_;
  double clip_ = 0.01;
  std::optional<DynamicFit> fit_;
  MatrixXd x_, m_;
  VectorXd d_;
  KernelSpec kx_, kd_, km_;
  VectorXd wpi_, wrho_;
  double lambda6_ = 0.0;
  double lambda7_ = 0.0;
  mutable Index clipped_ = 0;
};

// ---------------------------------------------------------------------------
// Cross-fitted estimators
// ---------------------------------------------------------------------------

namespace detail {

inline FoldPlan resolve_plan(const DmlConfig& cfg, Index n, int folds, const char* who) {
  FoldPlan plan = cfg.plan ? *cfg.plan : make_folds(n, folds, cfg.seed);
  plan.validate(n);
  if (plan.folds != folds)
    throw ConfigError(std::string(who) + ": fold plan disagrees with the requested fold count");
  return plan;
}

// Every fold must contain the units the requested kind averages over.  Each
// training complement is a union of the other folds, so passing this check
// also guarantees every complement can support the nuisance fits.
inline void check_fold_support_static(const Dataset& data, const DmlKind& kind,
                                      const std::vector<std::vector<Index>>& groups) {
  for (std::size_t ell = 0; ell < groups.size(); ++ell) {
    bool group_hit = false;     // a unit of the subpopulation being averaged
    bool selected_hit = false;  // a selected unit at the regression's dose
    for (Index i : groups[ell]) {
      const double d_i = data.d[i];
      const double s_i = data.s[i];
      switch (kind.estimand) {
        case Estimand::ate:
        case Estimand::ds:
          group_hit = true;
          selected_hit = selected_hit || (s_i == 1.0 && d_i == kind.d);
          break;
        case Estimand::att:
          group_hit = group_hit || d_i == kind.d;
          selected_hit = selected_hit || (s_i == 1.0 && d_i == kind.dprime);
          break;
        case Estimand::cate:
          group_hit = group_hit || data.v(i, 0) == kind.v;
          selected_hit =
              selected_hit || (s_i == 1.0 && d_i == kind.d && data.v(i, 0) == kind.v);
          break;
        default:
          throw ConfigError("dml_static: kind must be one of ate/ds/att/cate");
      }
    }
    const std::string fold = "fold " + std::to_string(ell);
    if (!group_hit)
      throw EstimationError("dml_static: " + fold +
                            " contains no unit of the requested subpopulation");
    if (!selected_hit)
      throw EstimationError("dml_static: " + fold +
                            " contains no selected unit at the requested treatment");
  }
}

}  // namespace detail

// Cross-fitted estimate of a discrete-treatment effect under selection on
// observables: per fold, the outcome regression and balancing weight are fit
// on the complement and the doubly robust moment is averaged over the fold.
inline EffectEstimate dml_static(const Dataset& data, const DmlKind& kind, int folds = 5,
                                 const DmlConfig& cfg = {}) {
  cfg.validate();
  const KernelSet kers =
      cfg.kernels ? *cfg.kernels : KernelSet::defaults(data, /*treat_indicator=*/true);
  if (kers.d.family != KernelFamily::indicator)
    throw ConfigError("dml_static: discrete-treatment inference needs an indicator treatment kernel");
  const bool ratio = kind.estimand == Estimand::att || kind.estimand == Estimand::cate;
  if (kind.estimand == Estimand::cate) {
    if (!data.has_v() || !kers.v)
      throw InputError("dml_static: subgroup kind needs a V column and kernel");
    if (data.v.cols() != 1) throw InputError("dml_static: subgroup kind needs a single V column");
    if (kers.v->family != KernelFamily::indicator)
      throw ConfigError("dml_static: subgroup kind needs an indicator subgroup kernel");
  }

  const Index n = data.n();
  const FoldPlan plan = detail::resolve_plan(cfg, n, folds, "dml_static");
  const auto groups = plan.groups();
  detail::check_fold_support_static(data, kind, groups);

  VectorXd psi_raw = VectorXd::Zero(n);
  VectorXd base = VectorXd::Zero(n);  // ratio-denominator indicators
  std::vector<FoldDiagnostics> info;
  info.reserve(groups.size());

  for (int ell = 0; ell < plan.folds; ++ell) {
    const Dataset train = data.rows(plan.complement(ell));
    const StaticFoldNuisance nuis(train, kers, kind, cfg);
    for (Index i : groups[static_cast<std::size_t>(ell)]) {
      const VectorXd x = data.x.row(i).transpose();
      const double d_i = data.d[i];
      const double v_i = data.has_v() ? data.v(i, 0) : 0.0;
      double mpart = 0.0;
      double b_i = 0.0;
      switch (kind.estimand) {
        case Estimand::ate:
        case Estimand::ds:
          mpart = nuis.regression(kind.d, v_i, x);
          break;
        case Estimand::att:
          b_i = d_i == kind.d ? 1.0 : 0.0;
          if (b_i != 0.0) mpart = nuis.regression(kind.dprime, v_i, x);
          break;
        case Estimand::cate:
          b_i = v_i == kind.v ? 1.0 : 0.0;
          if (b_i != 0.0) mpart = nuis.regression(kind.d, kind.v, x);
          break;
        default:
          break;
      }
      const double resid = data.sy[i] - nuis.regression(d_i, v_i, x);
      psi_raw[i] = mpart + nuis.weight(data.s[i], d_i, v_i, x) * resid;
      base[i] = b_i;
    }
    FoldDiagnostics fd;
    fd.fold = ell;
    fd.held_out = static_cast<Index>(groups[static_cast<std::size_t>(ell)].size());
    fd.lambda = nuis.lambda();
    fd.lambda3 = nuis.lambda3();
    fd.censored = nuis.censored();
    info.push_back(fd);
  }

  EffectEstimate out;
  out.level = cfg.level;
  out.n = n;
  out.folds = plan.folds;
  out.fold_info = std::move(info);
  if (!ratio) {
    out.theta = psi_raw.mean();
    out.psi = std::move(psi_raw);
  } else {
    // theta is the moment average over the subpopulation share; psi holds the
    // delta-method linearization so the variance formula below still applies.
    const double phat = base.mean();
    out.theta = psi_raw.mean() / phat;
    out.psi = (psi_raw - out.theta * base) / phat;
    out.psi.array() += out.theta;
  }
  out.sigma = std::sqrt((out.psi.array() - out.theta).square().mean());
  std::tie(out.ci_lo, out.ci_hi) = confidence_interval(out.theta, out.sigma, n, cfg.level);
  return out;
}

// Cross-fitted estimate of the counterfactual mean outcome at treatment
// d in {0,1} under dynamic selection: the multiply robust moment combines the
// counterfactual mean, the outcome regression, and both propensities.
inline EffectEstimate dml_dynamic(const Dataset& data, double d, int folds = 5,
                                  const DmlConfig& cfg = {}) {
  cfg.validate();
  const KernelSet kers =
      cfg.kernels ? *cfg.kernels : KernelSet::defaults(data, /*treat_indicator=*/true);
  if (!data.has_m() || !kers.m)
    throw InputError("dml_dynamic: follow-up covariates M are required");
  if (!(d == 0.0 || d == 1.0)) throw InputError("dml_dynamic: treatment level must be 0 or 1");
  for (Index i = 0; i < data.n(); ++i)
    if (data.d[i] != 0.0 && data.d[i] != 1.0)
      throw InputError("dml_dynamic: treatment column must be binary");

  const Index n = data.n();
  const FoldPlan plan = detail::resolve_plan(cfg, n, folds, "dml_dynamic");
  const auto groups = plan.groups();
  for (std::size_t ell = 0; ell < groups.size(); ++ell) {
    const bool hit = std::any_of(groups[ell].begin(), groups[ell].end(),
                                 [&](Index i) { return data.d[i] == d; });
    if (!hit)
      throw EstimationError("dml_dynamic: fold " + std::to_string(ell) +
                            " contains no unit at the requested treatment");
  }

  VectorXd psi = VectorXd::Zero(n);
  std::vector<FoldDiagnostics> info;
  info.reserve(groups.size());

  for (int ell = 0; ell < plan.folds; ++ell) {
    const Dataset train = data.rows(plan.complement(ell));
    const DynamicFoldNuisance nuis(train, kers, cfg);
    for (Index i : groups[static_cast<std::size_t>(ell)]) {
      const VectorXd x = data.x.row(i).transpose();
      const VectorXd m = data.m.row(i).transpose();
      const double omega = nuis.omega(d, x);
      double value = omega;
      if (data.d[i] == d) {
        const double pi = nuis.pi(d, x);
        const double gamma = nuis.gamma(d, x, m);
        value += (gamma - omega) / pi;
        if (data.s[i] == 1.0) value += (data.sy[i] - gamma) / (pi * nuis.rho(d, x, m));
      }
      psi[i] = value;
    }
    FoldDiagnostics fd;
    fd.fold = ell;
    fd.held_out = static_cast<Index>(groups[static_cast<std::size_t>(ell)].size());
    fd.lambda = nuis.lambda();
    fd.lambda4 = nuis.lambda4();
    fd.lambda6 = nuis.lambda6();
    fd.lambda7 = nuis.lambda7();
    fd.clipped = nuis.clipped();
    info.push_back(fd);
  }

  EffectEstimate out;
  out.level = cfg.level;
  out.n = n;
  out.folds = plan.folds;
  out.fold_info = std::move(info);
  out.theta = psi.mean();
  out.psi = std::move(psi);
  out.sigma = std::sqrt((out.psi.array() - out.theta).square().mean());
  std::tie(out.ci_lo, out.ci_hi) = confidence_interval(out.theta, out.sigma, n, cfg.level);
  return out;
}

// Difference of two cross-fitted estimates computed on the same sample and
// fold plan (e.g. a treatment-level contrast).  Differencing the
// per-observation contributions keeps their covariance in the variance.
inline EffectEstimate effect_contrast(const EffectEstimate& a, const EffectEstimate& b,
                                      double level = 0.05) {
  if (a.n != b.n || a.psi.size() != b.psi.size())
    throw InputError("effect_contrast: estimates cover different samples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("effect_contrast: level must lie in (0,1)");
  EffectEstimate out;
  out.level = level;
  out.n = a.n;
  out.folds = a.folds;
  out.theta = a.theta - b.theta;
  out.psi = a.psi - b.psi;
  out.sigma = std::sqrt((out.psi.array() - out.theta).square().mean());
  std::tie(out.ci_lo, out.ci_hi) = confidence_interval(out.theta, out.sigma, out.n, level);
  return out;
}

}  // namespace ksel
