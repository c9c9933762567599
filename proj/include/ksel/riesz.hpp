#pragma once

#include <algorithm>
#include <utility>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/kernels.hpp"
#include "ksel/options.hpp"
#include "ksel/ridge.hpp"

namespace ksel {

// Which moment functional the balancing weight represents.  The shifted-
// population variant shares the ATE block structure: its evaluation uses the
// training-population kernels throughout.
enum class RieszKind { ate, ds, att, cate };

struct RieszQuery {
  RieszKind kind = RieszKind::ate;
  double d = 1.0;       // dose of interest (observed dose for att)
  double dprime = 0.0;  // att: counterfactual dose
  double v = 1.0;       // cate: subgroup level

  bool masked() const { return kind == RieszKind::att || kind == RieszKind::cate; }
};

// The 2n x 2n system behind the balancing-weight estimator.  Row block one
// carries the data-kernel features, row block two the query-kernel features;
// the off-diagonal blocks are transposes of each other by construction.
struct RieszBlocks {
  MatrixXd k;      // [[K1, K2], [K3, K4]]
  MatrixXd omega;  // [[K1*K1, K1*K2], [K3*K1, K3*K2]]
  VectorXd z;      // [K2; K4] * 1_n
  RieszQuery query;
  Dataset data;
  KernelSet kers;
  VectorXd afactor;  // per-row scalar of K2: k(S_i,1)k(D_i,·)[k(V_i,v)]
  VectorXd mask;     // att/cate column mask; all ones otherwise
  double self_scale = 1.0;  // k(1,1)k(d,d)[k(v,v)] entering K4

  static RieszBlocks build(Dataset data, KernelSet kers, const RieszQuery& q) {
    RieszBlocks b;
    b.query = q;
    b.data = std::move(data);
    b.kers = std::move(kers);
    const Index n = b.data.n();
    const bool cate = q.kind == RieszKind::cate;
    if (cate) {
      if (!b.data.has_v() || !b.kers.v)
        throw InputError("RieszBlocks: cate query needs a V column and kernel");
      if (b.kers.v->family != KernelFamily::indicator)
        throw ConfigError("RieszBlocks: cate query needs an indicator subgroup kernel");
      if (b.data.v.cols() != 1)
        throw ConfigError("RieszBlocks: cate query supports a single subgroup column");
    }
    if (q.kind == RieszKind::att && b.kers.d.family != KernelFamily::indicator)
      throw ConfigError("RieszBlocks: att query needs an indicator treatment kernel");

    const GramSet grams = GramSet::build(b.data, b.kers, /*with_m=*/false, cate);
    MatrixXd k1 = grams.ss.cwiseProduct(grams.dd).cwiseProduct(grams.xx);
    if (cate) k1 = k1.cwiseProduct(grams.vv);

    const double dose = q.kind == RieszKind::att ? q.dprime : q.d;
    b.afactor = gram_column(b.kers.s, VectorXd(b.data.s), 1.0)
                    .cwiseProduct(gram_column(b.kers.d, VectorXd(b.data.d), dose));
    b.mask = VectorXd::Ones(n);
    b.self_scale = eval_kernel(b.kers.s, 1.0, 1.0) * eval_kernel(b.kers.d, dose, dose);
    if (q.kind == RieszKind::att) {
      for (Index i = 0; i < n; ++i) b.mask[i] = b.data.d[i] == q.d ? 1.0 : 0.0;
    } else if (cate) {
      const VectorXd kv = gram_column(*b.kers.v, b.data.v, VectorXd::Constant(1, q.v));
      b.afactor = b.afactor.cwiseProduct(kv);
      for (Index i = 0; i < n; ++i) b.mask[i] = b.data.v(i, 0) == q.v ? 1.0 : 0.0;
      b.self_scale *= eval_kernel(*b.kers.v, q.v, q.v);
    }

    const MatrixXd k2 = (b.afactor * b.mask.transpose()).cwiseProduct(grams.xx);
    const MatrixXd k4 = b.self_scale * (b.mask * b.mask.transpose()).cwiseProduct(grams.xx);

    b.k.resize(2 * n, 2 * n);
    b.k.topLeftCorner(n, n) = k1;
    b.k.topRightCorner(n, n) = k2;
    b.k.bottomLeftCorner(n, n) = k2.transpose();
    b.k.bottomRightCorner(n, n) = k4;

    b.omega.resize(2 * n, 2 * n);
    b.omega.topLeftCorner(n, n).noalias() = k1 * k1;
    b.omega.topRightCorner(n, n).noalias() = k1 * k2;
    b.omega.bottomLeftCorner(n, n) = b.omega.topRightCorner(n, n).transpose();
    b.omega.bottomRightCorner(n, n).noalias() = k2.transpose() * k2;

    b.z = b.k.rightCols(n) * VectorXd::Ones(n);
    return b;
  }

  // The 2n query vector u at an evaluation point (the cate overload adds V).
  VectorXd query_vector(double s, double dval, const Eigen::Ref<const VectorXd>& x) const {
    if (query.kind == RieszKind::cate)
      throw ConfigError("RieszBlocks: cate query vector needs the V argument");
    return assemble_u(s, dval, x, 1.0, 1.0);
  }
  VectorXd query_vector(double s, double dval, const Eigen::Ref<const VectorXd>& v,
                        const Eigen::Ref<const VectorXd>& x) const {
    if (query.kind != RieszKind::cate)
      throw ConfigError("RieszBlocks: V argument only applies to cate queries");
    const double kv_scalar = eval_kernel(*kers.v, VectorXd::Constant(1, query.v), v);
    const VectorXd kv_rows = gram_column(*kers.v, data.v, v);
    return assemble_u_vec(s, dval, x, kv_rows, kv_scalar);
  }

 private:
  VectorXd assemble_u(double s, double dval, const Eigen::Ref<const VectorXd>& x,
                      double kv_scalar, double kv_row_scale) const {
    return assemble_u_vec(s, dval, x, VectorXd::Constant(data.n(), kv_row_scale), kv_scalar);
  }

  VectorXd assemble_u_vec(double s, double dval, const Eigen::Ref<const VectorXd>& x,
                          const VectorXd& kv_rows, double kv_scalar) const {
    const Index n = data.n();
    const VectorXd kx = gram_column(kers.x, data.x, x);
    const VectorXd ks = gram_column(kers.s, VectorXd(data.s), s);
    const VectorXd kd = gram_column(kers.d, VectorXd(data.d), dval);
    const double dose = query.kind == RieszKind::att ? query.dprime : query.d;
    const double scalar = eval_kernel(kers.s, 1.0, s) * eval_kernel(kers.d, dose, dval) * kv_scalar;
    VectorXd u(2 * n);
    u.head(n) = ks.cwiseProduct(kd).cwiseProduct(kx).cwiseProduct(kv_rows);
    u.tail(n) = scalar * mask.cwiseProduct(kx);
    return u;
  }
};

// z'(Omega + n*lambda3*K)^{-1}u with censored evaluations.  The factorization
// is kept so tests can probe linearity in both z and u.
class RieszEstimator {
 public:
  // Bound defaults to 1/eps^2 for eps = 0.01.
  static double default_censor_bound() { return 1e4; }

  explicit RieszEstimator(RieszBlocks blocks, FitOptions opt = {},
                          double censor_bound = default_censor_bound())
      : blocks_(std::move(blocks)), bound_(censor_bound) {
    opt.validate();
    if (!(bound_ > 0.0)) throw ConfigError("RieszEstimator: censor bound must be positive");
    const Index n = blocks_.data.n();
    lambda3_ = resolve_riesz_lambda(opt, blocks_.k, n);
    MatrixXd system = blocks_.omega + static_cast<double>(n) * lambda3_ * blocks_.k;
    llt_.compute(system);
    if (llt_.info() != Eigen::Success) {
      // Same jitter policy as the scalar ridge: one trace-scaled retry.
      const double jitter = 1e-10 * system.trace() / static_cast<double>(system.rows());
      system.diagonal().array() += jitter;
      llt_.compute(system);
      if (llt_.info() != Eigen::Success)
        throw NumericError("RieszEstimator: system factorization failed after jitter");
    }
    zsol_ = llt_.solve(blocks_.z);
  }

  const RieszBlocks& blocks() const { return blocks_; }
  double lambda3() const { return lambda3_; }
  double censor_bound() const { return bound_; }
  Index censored_count() const { return censored_; }

  double censor(double value) const { return std::clamp(value, -bound_, bound_); }

  // Uncensored bilinear evaluation against an externally built query vector.
  double apply(const Eigen::Ref<const VectorXd>& u) const { return zsol_.dot(u); }

  // Solve against the retained factorization (linearity probes).
  VectorXd solve(const Eigen::Ref<const VectorXd>& rhs) const { return llt_.solve(rhs); }

  double raw_value(double s, double dval, const Eigen::Ref<const VectorXd>& x) const {
    return apply(blocks_.query_vector(s, dval, x));
  }
  double raw_value(double s, double dval, const Eigen::Ref<const VectorXd>& v,
                   const Eigen::Ref<const VectorXd>& x) const {
    return apply(blocks_.query_vector(s, dval, v, x));
  }

  double value(double s, double dval, const Eigen::Ref<const VectorXd>& x) const {
    return censor_tracked(raw_value(s, dval, x));
  }
  double value(double s, double dval, const Eigen::Ref<const VectorXd>& v,
               const Eigen::Ref<const VectorXd>& x) const {
    return censor_tracked(raw_value(s, dval, v, x));
  }

 private:
  double censor_tracked(double value) const {
    const double clipped = censor(value);
    if (clipped != value) ++censored_;
    return clipped;
  }

  RieszBlocks blocks_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd zsol_;
  double lambda3_ = 0.0;
  double bound_ = 0.0;
  mutable Index censored_ = 0;
};

}  // namespace ksel
