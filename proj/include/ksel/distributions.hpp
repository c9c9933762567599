#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/embeddings.hpp"
#include "ksel/kernels.hpp"
#include "ksel/options.hpp"
#include "ksel/ridge.hpp"

namespace ksel {

// Estimand selector for counterfactual outcome distributions.  The shifted
// sample rides along for the alternative-population kinds; the static path
// reads only its covariates, the dynamic path all three blocks.
struct DistKind {
  Estimand estimand = Estimand::ate;
  double d = 1.0;
  double dprime = 0.0;
  double v = 1.0;
  ShiftedSample shift;

  static DistKind ate(double d) { return {Estimand::ate, d, 0.0, 0.0, {}}; }
  static DistKind ds(double d, ShiftedSample tilde) {
    return {Estimand::ds, d, 0.0, 0.0, std::move(tilde)};
  }
  static DistKind att(double d, double dprime) { return {Estimand::att, d, dprime, 0.0, {}}; }
  static DistKind cate(double d, double v) { return {Estimand::cate, d, 0.0, v, {}}; }
};

// A counterfactual distribution embedding: a weight per training row whose
// evaluation at y is sum_i w_i * S_i * k_Y(Y_i, y).  The y-dependence of the
// closed forms factors entirely through that outcome-kernel column, so the
// weights are computed once and reused for every probe.  Blanked outcomes
// enter through S*Y (zero), where their zero selection weight silences them.
class DistEmbedding {
 public:
  DistEmbedding(VectorXd weights, VectorXd s, VectorXd y_filled, KernelSpec y_kernel,
                Estimand tag)
      : weights_(std::move(weights)),
        s_(std::move(s)),
        y_(std::move(y_filled)),
        ky_(std::move(y_kernel)),
        tag_(tag) {
    if (weights_.size() != s_.size() || weights_.size() != y_.size())
      throw InputError("DistEmbedding: weight, selection, and outcome lengths disagree");
    if (!weights_.allFinite()) throw NumericError("DistEmbedding: weights are not finite");
    wsel_ = weights_.cwiseProduct(s_);
  }

  double operator()(double y) const { return wsel_.dot(gram_column(ky_, y_, y)); }

  const VectorXd& weights() const { return weights_; }
  const VectorXd& selection() const { return s_; }
  const VectorXd& outcomes() const { return y_; }
  const KernelSpec& y_kernel() const { return ky_; }
  Estimand tag() const { return tag_; }
  Index n() const { return weights_.size(); }

 private:
  VectorXd weights_, s_, y_;
  KernelSpec ky_;
  Estimand tag_;
  VectorXd wsel_;  // weights ⊙ selection, the mass actually carried by each row
};

namespace detail {

// Target Gram of the outcome-embedding regression: the regression target for
// row i is S_i * phi(Y_i), so inner products carry both selection factors.
inline MatrixXd selected_outcome_gram(const Dataset& data, const KernelSpec& ky) {
  return (data.s * data.s.transpose()).cwiseProduct(gram(ky, MatrixXd(data.sy)));
}

inline const KernelSpec& outcome_kernel(const KernelSet& kers) {
  if (!kers.y) throw ConfigError("distribution embedding: an outcome kernel is required");
  if (kers.y->family != KernelFamily::gaussian)
    throw ConfigError("distribution embedding: the outcome kernel must be gaussian");
  return *kers.y;
}

}  // namespace detail

// Embedding of the counterfactual outcome distribution under static
// selection.  The penalty on the outcome-embedding solve is tuned against
// the selected-outcome target Gram; the auxiliary embeddings reuse the same
// penalties as the corresponding mean curves.
inline DistEmbedding dist_embedding_static(const Dataset& data, const DistKind& kind,
                                           const KernelSet& kers, const FitOptions& opt = {}) {
  opt.validate();
  const KernelSpec& ky = detail::outcome_kernel(kers);
  const bool with_v = kind.estimand == Estimand::cate;
  if (with_v && (!data.has_v() || !kers.v))
    throw InputError("dist_embedding_static: subgroup kind needs a V column and kernel");

  const GramSet g = GramSet::build(data, kers, /*with_m=*/false, with_v);
  MatrixXd kprod = g.ss.cwiseProduct(g.dd).cwiseProduct(g.xx);
  if (with_v) kprod = kprod.cwiseProduct(g.vv);

  const VectorXd ks1 = gram_column(kers.s, data.s, 1.0);
  const VectorXd kd = gram_column(kers.d, data.d, kind.d);
  VectorXd q;
  Estimand tag = kind.estimand;
  switch (kind.estimand) {
    case Estimand::ate:
      q = ks1.cwiseProduct(kd).cwiseProduct(g.xx.rowwise().mean());
      break;
    case Estimand::ds: {
      if (kind.shift.x.rows() < 1) throw InputError("dist_embedding_static: shifted sample is empty");
      if (kind.shift.x.cols() != data.x.cols())
        throw InputError("dist_embedding_static: shifted covariate width disagrees");
      const VectorXd qx = gram(kers.x, data.x, kind.shift.x).rowwise().mean();
      q = ks1.cwiseProduct(kd).cwiseProduct(qx);
      break;
    }
    case Estimand::att: {
      const double lambda1 = resolve_embedding_lambda(opt, g.dd, g.xx);
      const VectorXd beta = conditional_weights(g.dd, lambda1, kd).weights;
      q = ks1.cwiseProduct(gram_column(kers.d, data.d, kind.dprime))
              .cwiseProduct(g.xx * beta);
      break;
    }
    case Estimand::cate: {
      const double lambda2 = resolve_embedding_lambda(opt, g.vv, g.xx);
      const VectorXd kv = gram_column(*kers.v, data.v, VectorXd::Constant(1, kind.v));
      const VectorXd beta = conditional_weights(g.vv, lambda2, kv).weights;
      q = ks1.cwiseProduct(kd).cwiseProduct(kv).cwiseProduct(g.xx * beta);
      break;
    }
    default:
      throw ConfigError("dist_embedding_static: kind must be one of ate/ds/att/cate");
  }

  const double lambda8 =
      resolve_embedding_lambda(opt, kprod, detail::selected_outcome_gram(data, ky));
  const VectorXd w = ridge_factor(kprod, lambda8).solve(q);
  return DistEmbedding(w, data.s, data.sy, ky, tag);
}

// Embedding of the counterfactual outcome distribution under dynamic
// selection, with the mediator integrated out through its conditional
// embedding.  The averages over covariates use the same rearrangement (and
// the same training-size normalization) as the dynamic mean curves.
inline DistEmbedding dist_embedding_dynamic(const Dataset& data, const DistKind& kind,
                                            const KernelSet& kers, const FitOptions& opt = {}) {
  opt.validate();
  const KernelSpec& ky = detail::outcome_kernel(kers);
  if (!data.has_m() || !kers.m)
    throw InputError("dist_embedding_dynamic: follow-up covariates M are required");

  const GramSet g = GramSet::build(data, kers, /*with_m=*/true, /*with_v=*/false);
  const MatrixXd kprod = g.ss.cwiseProduct(g.dd).cwiseProduct(g.xx).cwiseProduct(g.mm);
  const MatrixXd kdx = g.dd.cwiseProduct(g.xx);
  const Index n = data.n();

  const VectorXd ks1 = gram_column(kers.s, data.s, 1.0);
  const VectorXd kd = gram_column(kers.d, data.d, kind.d);
  VectorXd q;
  Estimand tag = Estimand::dyn_ate;
  switch (kind.estimand) {
    case Estimand::ate: {
      const double lambda4 = resolve_embedding_lambda(opt, kdx, g.mm);
      const MatrixXd r2 = ridge_factor(kdx, lambda4).solve(g.mm).transpose();
      const VectorXd qcov =
          (r2.cwiseProduct(g.xx * g.xx / static_cast<double>(n))) * kd;
      q = ks1.cwiseProduct(kd).cwiseProduct(qcov);
      break;
    }
    case Estimand::ds: {
      const ShiftedSample& tilde = kind.shift;
      if (!tilde.dynamic_complete())
        throw InputError("dist_embedding_dynamic: shifted sample needs covariates, treatments, and mediators");
      if (tilde.x.cols() != data.x.cols() || tilde.m.cols() != data.m.cols())
        throw InputError("dist_embedding_dynamic: shifted column widths disagree");
      const MatrixXd dtt = gram(kers.d, MatrixXd(tilde.d));
      const MatrixXd xtt = gram(kers.x, tilde.x);
      const MatrixXd mtt = gram(*kers.m, tilde.m);
      const double lambda5 = resolve_embedding_lambda(opt, dtt.cwiseProduct(xtt), mtt);
      const MatrixXd km_cross = gram(*kers.m, data.m, tilde.m);
      const MatrixXd r5 = ridge_factor(dtt.cwiseProduct(xtt), lambda5)
                              .solve(km_cross.transpose())
                              .transpose();
      const MatrixXd kx_cross = gram(kers.x, data.x, tilde.x);
      const VectorXd kdt = gram_column(kers.d, tilde.d, kind.d);
      const VectorXd qcov =
          (r5.cwiseProduct(kx_cross * xtt / static_cast<double>(n))) * kdt;
      q = ks1.cwiseProduct(kd).cwiseProduct(qcov);
      tag = Estimand::dyn_ds;
      break;
    }
    default:
      throw ConfigError("dist_embedding_dynamic: kind must be ate or ds");
  }

  const double lambda9 =
      resolve_embedding_lambda(opt, kprod, detail::selected_outcome_gram(data, ky));
  const VectorXd w = ridge_factor(kprod, lambda9).solve(q);
  return DistEmbedding(w, data.s, data.sy, ky, tag);
}

// Default herding candidates: the observed selected outcomes plus a 512-point
// uniform grid over their range padded by ten percent on each side.
inline VectorXd default_candidates(const DistEmbedding& emb) {
  std::vector<double> sel;
  for (Index i = 0; i < emb.n(); ++i)
    if (emb.selection()[i] == 1.0) sel.push_back(emb.outcomes()[i]);
  if (sel.empty()) throw InputError("default_candidates: no selected outcomes to span");
  const auto [lo_it, hi_it] = std::minmax_element(sel.begin(), sel.end());
  const double pad = 0.1 * (*hi_it - *lo_it);
  const Index grid_points = 512;
  VectorXd out(static_cast<Index>(sel.size()) + grid_points);
  for (std::size_t i = 0; i < sel.size(); ++i) out[static_cast<Index>(i)] = sel[i];
  out.tail(grid_points) = VectorXd::LinSpaced(grid_points, *lo_it - pad, *hi_it + pad);
  return out;
}

// Greedy herding: each draw maximizes the embedding minus the running
// similarity to the draws already made, with the printed 1/(j+1) weighting.
// Candidates are scanned in ascending order with strict improvement, so ties
// resolve toward the smallest value; duplicates in the candidate set are
// collapsed first.  Deterministic given the candidates.
inline VectorXd herd(const DistEmbedding& emb, Index m,
                     const Eigen::Ref<const VectorXd>& candidates) {
  if (m < 1) throw InputError("herd: need at least one sample");
  if (candidates.size() < 1) throw InputError("herd: candidate set is empty");
  if (!candidates.allFinite()) throw InputError("herd: candidates must be finite");

  std::vector<double> cand(candidates.begin(), candidates.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  const Index c = static_cast<Index>(cand.size());
  VectorXd grid(c);
  for (Index i = 0; i < c; ++i) grid[i] = cand[static_cast<std::size_t>(i)];

  VectorXd theta(c);
  for (Index i = 0; i < c; ++i) theta[i] = emb(grid[i]);
  VectorXd ksum = VectorXd::Zero(c);

  VectorXd draws(m);
  for (Index j = 1; j <= m; ++j) {
    Index best = 0;
    double best_score = theta[0] - ksum[0] / static_cast<double>(j + 1);
    for (Index i = 1; i < c; ++i) {
      const double score = theta[i] - ksum[i] / static_cast<double>(j + 1);
      if (score > best_score) {
        best = i;
        best_score = score;
      }
    }
    draws[j - 1] = grid[best];
    if (j < m) ksum += gram_column(emb.y_kernel(), grid, grid[best]);
  }
  return draws;
}

// RKHS distance between the fitted embedding and the empirical embedding of
// the given samples.  Both sides are first merged onto the union of their
// support points, with exactly equal points combined, so the difference is
// taken between small coefficients rather than between order-one norms --
// otherwise rounding would floor the result near sqrt(machine epsilon) even
// when the samples reproduce the embedding exactly.  The squared norm of the
// merged coefficients is clamped at zero before the root.
inline double mmd(const Eigen::Ref<const VectorXd>& samples, const DistEmbedding& emb) {
  if (samples.size() < 1) throw InputError("mmd: need at least one sample");
  if (!samples.allFinite()) throw InputError("mmd: samples must be finite");
  std::vector<std::pair<double, double>> atoms;  // (support point, coefficient)
  const VectorXd wsel = emb.weights().cwiseProduct(emb.selection());
  for (Index i = 0; i < emb.n(); ++i)
    if (wsel[i] != 0.0) atoms.emplace_back(emb.outcomes()[i], wsel[i]);
  const double sample_mass = -1.0 / static_cast<double>(samples.size());
  for (Index j = 0; j < samples.size(); ++j) atoms.emplace_back(samples[j], sample_mass);
  std::sort(atoms.begin(), atoms.end());

  std::vector<double> pts, coef;
  for (const auto& [p, c] : atoms) {
    if (!pts.empty() && pts.back() == p)
      coef.back() += c;
    else {
      pts.push_back(p);
      coef.push_back(c);
    }
  }
  const Index k = static_cast<Index>(pts.size());  // >= 1: samples always contribute
  VectorXd points(k), c(k);
  for (Index i = 0; i < k; ++i) {
    points[i] = pts[static_cast<std::size_t>(i)];
    c[i] = coef[static_cast<std::size_t>(i)];
  }
  const double sq = c.dot(gram(emb.y_kernel(), MatrixXd(points)) * c);
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace ksel
