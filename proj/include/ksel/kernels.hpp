#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ksel/common.hpp"

namespace ksel {

enum class KernelFamily { gaussian, indicator };

// Product kernel over the coordinates of one variable.  Gaussian factors use a
// per-coordinate lengthscale; the indicator kernel is exact equality of all
// coordinates (for discrete variables).
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  VectorXd lengthscales;  // size dim; ignored by the indicator family
  Index dim = 0;

  static KernelSpec gaussian(VectorXd ls) {
    KernelSpec k;
    k.family = KernelFamily::gaussian;
    k.dim = ls.size();
    k.lengthscales = std::move(ls);
    k.validate();
    return k;
  }
  static KernelSpec gaussian1d(double ls) { return gaussian(VectorXd::Constant(1, ls)); }
  static KernelSpec indicator(Index dim) {
    KernelSpec k;
    k.family = KernelFamily::indicator;
    k.dim = dim;
    k.validate();
    return k;
  }

  void validate() const {
    if (dim < 1) throw ConfigError("kernel dimension must be >= 1");
    if (family == KernelFamily::gaussian) {
      if (lengthscales.size() != dim)
        throw ConfigError("gaussian kernel needs one lengthscale per coordinate");
      for (Index j = 0; j < dim; ++j)
        if (!(lengthscales[j] > 0.0) || !std::isfinite(lengthscales[j]))
          throw ConfigError("gaussian lengthscales must be positive and finite");
    }
  }
};

inline double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& a,
                          const Eigen::Ref<const VectorXd>& b) {
  if (a.size() != spec.dim || b.size() != spec.dim)
    throw InputError("eval_kernel: point dimension does not match kernel spec");
  if (spec.family == KernelFamily::indicator) {
    for (Index j = 0; j < spec.dim; ++j)
      if (a[j] != b[j]) return 0.0;
    return 1.0;
  }
  double q = 0.0;
  for (Index j = 0; j < spec.dim; ++j) {
    const double t = (a[j] - b[j]) / spec.lengthscales[j];
    q += t * t;
  }
  return std::exp(-0.5 * q);
}

inline double eval_kernel(const KernelSpec& spec, double a, double b) {
  VectorXd va = VectorXd::Constant(1, a), vb = VectorXd::Constant(1, b);
  return eval_kernel(spec, va, vb);
}

// Cross-Gram K[i,j] = k(A_i, B_j); rows are points.
inline MatrixXd gram(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& a,
                     const Eigen::Ref<const MatrixXd>& b) {
  if (a.cols() != spec.dim || b.cols() != spec.dim)
    throw InputError("gram: point dimension does not match kernel spec");
  MatrixXd k(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j)
      k(i, j) = eval_kernel(spec, a.row(i).transpose(), b.row(j).transpose());
  return k;
}

// Self-Gram; computed on the lower triangle and mirrored so the result is
// exactly symmetric with an exact unit diagonal.
inline MatrixXd gram(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& a) {
  if (a.cols() != spec.dim) throw InputError("gram: point dimension does not match kernel spec");
  const Index n = a.rows();
  MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      const double v = eval_kernel(spec, a.row(i).transpose(), a.row(j).transpose());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Column of kernel evaluations k(A_i, b) against a single query point.
inline VectorXd gram_column(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& a,
                            const Eigen::Ref<const VectorXd>& b) {
  if (a.cols() != spec.dim || b.size() != spec.dim)
    throw InputError("gram_column: point dimension does not match kernel spec");
  VectorXd k(a.rows());
  for (Index i = 0; i < a.rows(); ++i) k[i] = eval_kernel(spec, a.row(i).transpose(), b);
  return k;
}

inline VectorXd gram_column(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& a, double b) {
  MatrixXd am = a;
  VectorXd bv = VectorXd::Constant(1, b);
  return gram_column(spec, am, bv);
}

// d/dq of the column k(D_i, q) for a one-dimensional gaussian kernel:
// ((D_i - q) / sigma^2) * k(D_i, q).  The indicator family has no derivative.
inline VectorXd grad_gram_column(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& dpoints,
                                 double q) {
  if (spec.family != KernelFamily::gaussian)
    throw ConfigError("grad_gram_column: only the gaussian family is differentiable");
  if (spec.dim != 1) throw ConfigError("grad_gram_column: treatment kernel must be one-dimensional");
  const double s2 = spec.lengthscales[0] * spec.lengthscales[0];
  VectorXd g(dpoints.size());
  for (Index i = 0; i < dpoints.size(); ++i) {
    const double diff = dpoints[i] - q;
    g[i] = diff / s2 * std::exp(-0.5 * diff * diff / s2);
  }
  return g;
}

namespace detail {

inline double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Per-coordinate median of pairwise absolute differences, the default gaussian
// lengthscale rule.  Zero distances (ties) participate in the median; if they
// push the median itself to zero while the coordinate still varies, the median
// of the strictly positive distances is used instead so the lengthscale stays
// valid.  A coordinate with no variation at all is an error.  Samples larger
// than max_points are thinned to a seeded random subset first.
inline VectorXd median_heuristic(const Eigen::Ref<const MatrixXd>& points, Index max_points = 5000,
                                 std::uint64_t seed = 0) {
  const Index n = points.rows();
  if (n < 2) throw InputError("median_heuristic: need at least two points");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (n > max_points) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_points));
    std::sort(idx.begin(), idx.end());
  }
  const Index m = static_cast<Index>(idx.size());
  VectorXd out(points.cols());
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
  for (Index j = 0; j < points.cols(); ++j) {
    dist.clear();
    double maxd = 0.0;
    for (Index a = 0; a < m; ++a)
      for (Index b = a + 1; b < m; ++b) {
        const double dd = std::abs(points(idx[a], j) - points(idx[b], j));
        dist.push_back(dd);
        maxd = std::max(maxd, dd);
      }
    if (maxd == 0.0)
      throw ConfigError("median_heuristic: coordinate " + std::to_string(j) +
                        " is constant; no lengthscale exists");
    double med = detail::median_inplace(dist);
    if (med == 0.0) {
      std::vector<double> pos;
      pos.reserve(dist.size());
      for (double dd : dist)
        if (dd > 0.0) pos.push_back(dd);
      med = detail::median_inplace(pos);
    }
    out[j] = med;
  }
  return out;
}

}  // namespace ksel
