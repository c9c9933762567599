#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"

namespace ksel {

enum class DgpId { s1, s2, d1, custom_static, custom_dynamic };

// Structural coefficients of the continuous static family:
//   X ~ U[-1,1];  D = d_on_x*X + U[-1,1];
//   Y = y_quad*D^2 + y_inter*X*D + y_lin_x*X + y_lin_d*D + N(0, noise_sd^2);
//   P(S=1|D,X) = sel_lo + (sel_hi - sel_lo) * sigmoid(sel_a0 + sel_ad*D + sel_ax*X).
struct StaticParams {
  double d_on_x = 0.3;
  double y_quad = 1.0, y_inter = 1.0, y_lin_x = 0.0, y_lin_d = 0.0;
  double noise_sd = 0.1;
  double sel_a0 = 0.0, sel_ad = 1.0, sel_ax = 0.5;
  double sel_lo = 0.3, sel_hi = 0.95;
  bool with_v = false;  // adds V ~ Bernoulli(0.5) on {0,1}, independent of everything
};

// Structural coefficients of the dynamic family:
//   X ~ U[-1,1];  P(D=1|X) = 0.5 + pd_slope*X;  M = m_d*D + m_x*X + N(0, m_sd^2);
//   Y = y_m*M + y_x*X + y_d*D + N(0, noise_sd^2);
//   P(S=1|D,X,M) = clamp(sigmoid(sel_a0 + sel_ad*D + sel_am*M + sel_ax*X), sel_lo, sel_hi).
struct DynamicParams {
  double pd_slope = 0.25;
  double m_d = 1.0, m_x = 1.0, m_sd = 0.25;
  double y_m = 1.0, y_x = 1.0, y_d = 0.0;
  double noise_sd = 0.1;
  double sel_a0 = 1.0, sel_ad = 0.5, sel_am = -0.3, sel_ax = 0.0;
  double sel_lo = 0.05, sel_hi = 0.95;
};

struct DgpSpec {
  DgpId id = DgpId::s2;
  StaticParams st;   // used by s2 / custom_static
  DynamicParams dy;  // used by d1 / custom_dynamic

  static DgpSpec s1() { return DgpSpec{DgpId::s1, {}, {}}; }
  static DgpSpec s2() { return DgpSpec{DgpId::s2, {}, {}}; }
  static DgpSpec d1() { return DgpSpec{DgpId::d1, {}, {}}; }
  static DgpSpec custom_static(StaticParams p) { return DgpSpec{DgpId::custom_static, p, {}}; }
  static DgpSpec custom_dynamic(DynamicParams p) { return DgpSpec{DgpId::custom_dynamic, {}, p}; }

  bool dynamic() const { return id == DgpId::d1 || id == DgpId::custom_dynamic; }

  // Overlap check: every reachable (d,x[,m]) cell must select with probability
  // strictly inside (0,1).  Scanned on a grid over the reachable ranges.
  void validate() const;
};

namespace detail {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline double static_selection_prob(const StaticParams& p, double d, double x) {
  return p.sel_lo + (p.sel_hi - p.sel_lo) * sigmoid(p.sel_a0 + p.sel_ad * d + p.sel_ax * x);
}

inline double dynamic_selection_prob(const DynamicParams& p, double d, double x, double m) {
  return std::clamp(sigmoid(p.sel_a0 + p.sel_ad * d + p.sel_am * m + p.sel_ax * x), p.sel_lo, p.sel_hi);
}

inline double s1_selection_prob(double d, double x) { return 0.6 + 0.2 * d + 0.1 * x; }

}  // namespace detail

inline void DgpSpec::validate() const {
  auto check = [](double p, const std::string& where) {
    if (!(p > 0.0) || !(p < 1.0))
      throw ConfigError("DgpSpec: selection probability leaves (0,1) at " + where);
  };
  switch (id) {
    case DgpId::s1:
      for (double d : {0.0, 1.0})
        for (double x : {-1.0, 1.0})
          check(detail::s1_selection_prob(d, x),
                "d=" + std::to_string(d) + ", x=" + std::to_string(x));
      return;
    case DgpId::s2:
    case DgpId::custom_static: {
      if (!(st.sel_lo < st.sel_hi)) throw ConfigError("DgpSpec: selection bounds inverted");
      const double dmax = std::abs(st.d_on_x) + 1.0;
      for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
          const double d = -dmax + 2.0 * dmax * i / 20.0;
          const double x = -1.0 + 2.0 * j / 20.0;
          check(detail::static_selection_prob(st, d, x),
                "d=" + std::to_string(d) + ", x=" + std::to_string(x));
        }
      return;
    }
    case DgpId::d1:
    case DgpId::custom_dynamic: {
      if (!(dy.sel_lo < dy.sel_hi)) throw ConfigError("DgpSpec: selection bounds inverted");
      for (double xs : {-1.0, 1.0}) {
        const double p1 = 0.5 + dy.pd_slope * xs;
        if (!(p1 > 0.0) || !(p1 < 1.0)) throw ConfigError("DgpSpec: treatment propensity leaves (0,1)");
      }
      const double mmax = std::abs(dy.m_d) + std::abs(dy.m_x) + 5.0 * dy.m_sd;
      for (double d : {0.0, 1.0})
        for (int j = 0; j <= 20; ++j)
          for (int l = 0; l <= 20; ++l) {
            const double x = -1.0 + 2.0 * j / 20.0;
            const double m = -mmax + 2.0 * mmax * l / 20.0;
            check(detail::dynamic_selection_prob(dy, d, x, m),
                  "d=" + std::to_string(d) + ", x=" + std::to_string(x) + ", m=" + std::to_string(m));
          }
      return;
    }
  }
  throw ConfigError("DgpSpec: unknown id");
}

// Draws n i.i.d. rows.  Outcomes on unselected rows are blanked through the
// Dataset sy convention.  Deterministic for a fixed (spec, n, seed).
inline Dataset simulate(const DgpSpec& spec, Index n, std::uint64_t seed) {
  if (n < 1) throw InputError("simulate: need n >= 1");
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd s(n), y(n), d(n);
  MatrixXd x(n, 1);
  const bool dyn = spec.dynamic();
  MatrixXd m = dyn ? MatrixXd(n, 1) : MatrixXd();
  const bool with_v = !dyn && spec.id != DgpId::s1 && spec.st.with_v;
  MatrixXd v = with_v ? MatrixXd(n, 1) : MatrixXd();

  for (Index i = 0; i < n; ++i) {
    switch (spec.id) {
      case DgpId::s1: {
        const double xi = unif(rng) < 0.5 ? -1.0 : 1.0;
        const double di = unif(rng) < 0.5 + 0.2 * xi ? 1.0 : 0.0;
        const double yi = di + 0.5 * xi + 0.1 * gauss(rng);
        const double si = unif(rng) < detail::s1_selection_prob(di, xi) ? 1.0 : 0.0;
        x(i, 0) = xi;
        d[i] = di;
        y[i] = yi;
        s[i] = si;
        break;
      }
      case DgpId::s2:
      case DgpId::custom_static: {
        const StaticParams& p = spec.st;
        const double xi = 2.0 * unif(rng) - 1.0;
        const double di = p.d_on_x * xi + (2.0 * unif(rng) - 1.0);
        const double yi = p.y_quad * di * di + p.y_inter * xi * di + p.y_lin_x * xi +
                          p.y_lin_d * di + p.noise_sd * gauss(rng);
        const double si = unif(rng) < detail::static_selection_prob(p, di, xi) ? 1.0 : 0.0;
        x(i, 0) = xi;
        d[i] = di;
        y[i] = yi;
        s[i] = si;
        if (with_v) v(i, 0) = unif(rng) < 0.5 ? 0.0 : 1.0;
        break;
      }
      case DgpId::d1:
      case DgpId::custom_dynamic: {
        const DynamicParams& p = spec.dy;
        const double xi = 2.0 * unif(rng) - 1.0;
        const double di = unif(rng) < 0.5 + p.pd_slope * xi ? 1.0 : 0.0;
        const double mi = p.m_d * di + p.m_x * xi + p.m_sd * gauss(rng);
        const double yi = p.y_m * mi + p.y_x * xi + p.y_d * di + p.noise_sd * gauss(rng);
        const double si = unif(rng) < detail::dynamic_selection_prob(p, di, xi, mi) ? 1.0 : 0.0;
        x(i, 0) = xi;
        d[i] = di;
        m(i, 0) = mi;
        y[i] = yi;
        s[i] = si;
        break;
      }
    }
  }
  return Dataset::make(s, y, d, x, m, v);
}

// What to compare an estimator against.
struct TargetSpec {
  enum class Kind { ate, ate_contrast, ds, att, cate, grad_ate } kind = Kind::ate;
  double d = 1.0;
  double dprime = 0.0;  // att: the counterfactual dose d'
  double v = 1.0;       // cate: subgroup value
  enum class Shift { none, x_uniform01 } shift = Shift::none;  // ds: alternative X law
};

struct TruthValue {
  double value = 0.0;
  double mc_se = 0.0;  // 0 for closed forms
};

// Ground truth of an estimand under a DGP: closed form where available,
// otherwise a Monte Carlo counterfactual oracle with N=1e6 structural draws
// (selection plays no role in the truth).
inline TruthValue true_value(const DgpSpec& spec, const TargetSpec& t, std::uint64_t mc_seed = 17) {
  using Kind = TargetSpec::Kind;
  auto closed_static_ate = [&](double d) {
    return spec.st.y_quad * d * d + spec.st.y_lin_d * d;  // E[X] = 0 kills the X terms
  };
  switch (spec.id) {
    case DgpId::s1: {
      // E[X|D=d] follows from P(D=1|X=x) = 0.5 + 0.2x on x in {-1,+1}.
      auto e_x_given_d = [](double d) { return d == 1.0 ? 0.4 : -0.4; };
      switch (t.kind) {
        case Kind::ate: return {t.d, 0.0};
        case Kind::ate_contrast: return {1.0, 0.0};
        case Kind::att: return {t.dprime + 0.5 * e_x_given_d(t.d), 0.0};
        case Kind::grad_ate: throw ConfigError("true_value: discrete treatment has no dose gradient");
        default: break;
      }
      break;
    }
    case DgpId::s2:
    case DgpId::custom_static: {
      switch (t.kind) {
        case Kind::ate: return {closed_static_ate(t.d), 0.0};
        case Kind::ate_contrast: return {closed_static_ate(1.0) - closed_static_ate(0.0), 0.0};
        case Kind::grad_ate: return {2.0 * spec.st.y_quad * t.d + spec.st.y_lin_d, 0.0};
        case Kind::cate:
          if (spec.st.with_v) return {closed_static_ate(t.d), 0.0};  // V independent of everything
          break;
        case Kind::att:
          if (spec.st.d_on_x == 0.0) return {closed_static_ate(t.dprime), 0.0};  // D independent of X
          break;
        case Kind::ds:
          if (t.shift == TargetSpec::Shift::x_uniform01) {
            const double ex = 0.5;
            return {spec.st.y_quad * t.d * t.d + spec.st.y_inter * t.d * ex + spec.st.y_lin_x * ex +
                        spec.st.y_lin_d * t.d,
                    0.0};
          }
          break;
        default: break;
      }
      break;
    }
    case DgpId::d1:
    case DgpId::custom_dynamic: {
      auto closed_dyn_ate = [&](double d) { return spec.dy.y_m * spec.dy.m_d * d + spec.dy.y_d * d; };
      switch (t.kind) {
        case Kind::ate: return {closed_dyn_ate(t.d), 0.0};
        case Kind::ate_contrast: return {closed_dyn_ate(1.0) - closed_dyn_ate(0.0), 0.0};
        default: break;
      }
      break;
    }
  }

  // Monte Carlo counterfactual fallback for cases without a closed form here.
  if (t.kind == Kind::ate || t.kind == Kind::att) {
    const Index big = 1000000;
    std::mt19937_64 rng(mc_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double dose = t.kind == Kind::att ? t.dprime : t.d;
    double sum = 0.0, sumsq = 0.0;
    Index count = 0;
    for (Index i = 0; i < big; ++i) {
      const double xi = 2.0 * unif(rng) - 1.0;
      if (t.kind == Kind::att && !spec.dynamic()) {
        // Condition on the observed dose by rejection against D = c*X + U.
        const double di = spec.st.d_on_x * xi + (2.0 * unif(rng) - 1.0);
        if (std::abs(di - t.d) > 0.05) continue;  // narrow window around d
      }
      double yi;
      if (spec.dynamic()) {
        const double mi = spec.dy.m_d * dose + spec.dy.m_x * xi;  // noise is mean-zero
        yi = spec.dy.y_m * mi + spec.dy.y_x * xi + spec.dy.y_d * dose;
      } else {
        yi = spec.st.y_quad * dose * dose + spec.st.y_inter * xi * dose + spec.st.y_lin_x * xi +
             spec.st.y_lin_d * dose;
      }
      sum += yi;
      sumsq += yi * yi;
      ++count;
    }
    if (count < 100) throw EstimationError("true_value: Monte Carlo oracle starved of draws");
    const double mean = sum / static_cast<double>(count);
    const double var = sumsq / static_cast<double>(count) - mean * mean;
    return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(count))};
  }
  throw ConfigError("true_value: estimand not supported for this DGP");
}

// Closed-form nuisance functions of the preset DGPs, for oracle-mode tests.
namespace oracle {

inline double s1_pd1(double x) { return 0.5 + 0.2 * x; }
inline double s1_rho(double d, double x) { return detail::s1_selection_prob(d, x); }
inline double s1_gamma(double d, double x) { return d + 0.5 * x; }
// Balancing weight for the mean counterfactual outcome at dose dq:
// alpha0(s,d,x) = s * 1{d = dq} / (P(S=1|dq,x) * P(D=dq|x)).
inline double s1_alpha_ate(double dq, double s, double d, double x) {
  if (s != 1.0 || d != dq) return 0.0;
  const double pd = dq == 1.0 ? s1_pd1(x) : 1.0 - s1_pd1(x);
  return 1.0 / (s1_rho(dq, x) * pd);
}

inline double d1_pd1(double x) { return 0.5 + 0.25 * x; }
inline double d1_rho(double d, double x, double m) {
  return detail::dynamic_selection_prob(DgpSpec::d1().dy, d, x, m);
}
inline double d1_gamma(double /*d*/, double x, double m) { return m + x; }
inline double d1_omega(double d, double x) { return d + 2.0 * x; }

}  // namespace oracle

}  // namespace ksel
