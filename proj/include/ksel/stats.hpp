#pragma once

#include <cmath>

#include "ksel/common.hpp"

namespace ksel {

// Standard Gaussian quantile (inverse CDF) evaluated at p in (0, 1).
//
// Self-contained on purpose: a rational initial guess (Acklam's minimax
// coefficients, relative error below 1.2e-9 on the whole open interval)
// followed by one Halley correction step through std::erfc, which leaves the
// result accurate to roughly double precision — comfortably inside the 1e-8
// budget the confidence intervals are documented to.
inline double gaussian_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("gaussian_quantile: p must lie strictly in (0,1)");

  // Rational approximations for the lower tail, central region, and upper
  // tail; the tails share coefficients by symmetry.
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley step on f(x) = Phi(x) - p with Phi evaluated through erfc.
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double sqrt_2pi = 2.5066282746310005024;
  const double err = 0.5 * std::erfc(-x * inv_sqrt2) - p;
  const double u = err * sqrt_2pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// Two-sided interval theta +/- c_a * sigma / sqrt(n) where c_a is the
// standard Gaussian 1 - a/2 quantile.  sigma = 0 collapses to the point.
inline std::pair<double, double> confidence_interval(double theta, double sigma, Index n,
                                                     double a) {
  if (!(sigma >= 0.0)) throw InputError("confidence_interval: sigma must be nonnegative");
  if (!(a > 0.0 && a < 1.0)) throw InputError("confidence_interval: level must lie in (0,1)");
  if (n < 1) throw InputError("confidence_interval: need at least one observation");
  const double half = gaussian_quantile(1.0 - 0.5 * a) * sigma / std::sqrt(static_cast<double>(n));
  return {theta - half, theta + half};
}

}  // namespace ksel
