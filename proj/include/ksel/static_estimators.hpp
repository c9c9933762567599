#pragma once

#include <optional>
#include <utility>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/embeddings.hpp"
#include "ksel/kernels.hpp"
#include "ksel/options.hpp"
#include "ksel/ridge.hpp"

namespace ksel {

// Closed-form curve estimators for the static selection model.  One ridge
// solve against the product Gram K_SS .* K_DD .* K_XX (optionally .* K_VV for
// subgroup curves) is shared by every curve query; each grid point then costs
// one cross-column assembly and a dot product.
class StaticFit {
 public:
  StaticFit(Dataset data, KernelSet kers, FitOptions opt = {}, bool with_v = false)
      : data_(std::move(data)), kers_(std::move(kers)), opt_(opt), with_v_(with_v) {
    opt_.validate();
    if (with_v_ && (!data_.has_v() || !kers_.v))
      throw InputError("StaticFit: subgroup fit requested but V column or kernel missing");
    grams_ = GramSet::build(data_, kers_, /*with_m=*/false, with_v_);
    kprod_ = grams_.ss.cwiseProduct(grams_.dd).cwiseProduct(grams_.xx);
    if (with_v_) kprod_ = kprod_.cwiseProduct(grams_.vv);
    ks1_ = gram_column(kers_.s, VectorXd(data_.s), 1.0);
    lambda_ = resolve_scalar_lambda(opt_, kprod_, data_.sy);
    alpha_ = ridge_solve(kprod_, data_.sy, lambda_);
  }

  const Dataset& data() const { return data_; }
  const KernelSet& kernels() const { return kers_; }
  const GramSet& grams() const { return grams_; }
  bool with_v() const { return with_v_; }
  double lambda() const { return lambda_; }

  // Penalty of the treatment-conditional covariate embedding, tuned on demand.
  double lambda1() const {
    if (!lambda1_) lambda1_ = resolve_embedding_lambda(opt_, grams_.dd, grams_.xx);
    return *lambda1_;
  }
  // Penalty of the subgroup-conditional covariate embedding, tuned on demand.
  double lambda2() const {
    if (!with_v_) throw ConfigError("StaticFit: lambda2 requires a subgroup fit");
    if (!lambda2_) lambda2_ = resolve_embedding_lambda(opt_, grams_.vv, grams_.xx);
    return *lambda2_;
  }

  // Outcome regression gamma(s,d,x) (selected-outcome conditional mean).
  double gamma(double s, double dval, const Eigen::Ref<const VectorXd>& x) const {
    if (with_v_) throw ConfigError("StaticFit: subgroup fit requires the gamma(s,d,v,x) overload");
    return alpha_.dot(query_column(s, dval, x));
  }
  double gamma(double s, double dval, const Eigen::Ref<const VectorXd>& v,
               const Eigen::Ref<const VectorXd>& x) const {
    if (!with_v_) throw ConfigError("StaticFit: gamma(s,d,v,x) requires a subgroup fit");
    VectorXd col = query_column(s, dval, x).cwiseProduct(gram_column(*kers_.v, data_.v, v));
    return alpha_.dot(col);
  }

  // Mean counterfactual outcome curve over the training covariate population.
  CurveEstimate ate_curve(const Eigen::Ref<const VectorXd>& grid) const {
    require_plain("ate_curve");
    const VectorXd q = grams_.xx.rowwise().mean();
    return dose_curve(Estimand::ate, grid, q, /*derivative=*/false);
  }

  // Same curve averaged over covariates from an alternative population.
  CurveEstimate ds_curve(const Eigen::Ref<const MatrixXd>& xtilde,
                         const Eigen::Ref<const VectorXd>& grid) const {
    require_plain("ds_curve");
    const VectorXd q = shifted_mean_column(xtilde);
    return dose_curve(Estimand::ds, grid, q, false);
  }

  // Counterfactual mean of dose dprime for the subpopulation actually dosed at d.
  CurveEstimate att_curve(double d, const Eigen::Ref<const VectorXd>& dprime_grid) const {
    require_plain("att_curve");
    const VectorXd beta =
        conditional_weights(grams_.dd, lambda1(), gram_column(kers_.d, VectorXd(data_.d), d)).weights;
    const VectorXd q = grams_.xx * beta;
    return dose_curve(Estimand::att, dprime_grid, q, false);
  }

  // Dose curve within the subgroup V = v.
  CurveEstimate cate_curve(const Eigen::Ref<const VectorXd>& v,
                           const Eigen::Ref<const VectorXd>& grid) const {
    if (!with_v_) throw ConfigError("StaticFit: cate_curve requires a subgroup fit");
    const VectorXd kvv = gram_column(*kers_.v, data_.v, v);
    const VectorXd beta = conditional_weights(grams_.vv, lambda2(), kvv).weights;
    const VectorXd q = (grams_.xx * beta).cwiseProduct(kvv);
    return dose_curve(Estimand::cate, grid, q, false);
  }

  // Derivative-in-dose versions of the four curves (gaussian treatment kernel only).
  CurveEstimate grad_ate_curve(const Eigen::Ref<const VectorXd>& grid) const {
    require_plain("grad_ate_curve");
    return dose_curve(Estimand::grad_ate, grid, grams_.xx.rowwise().mean(), true);
  }
  CurveEstimate grad_ds_curve(const Eigen::Ref<const MatrixXd>& xtilde,
                              const Eigen::Ref<const VectorXd>& grid) const {
    require_plain("grad_ds_curve");
    return dose_curve(Estimand::grad_ds, grid, shifted_mean_column(xtilde), true);
  }
  CurveEstimate grad_att_curve(double d, const Eigen::Ref<const VectorXd>& dprime_grid) const {
    require_plain("grad_att_curve");
    const VectorXd beta =
        conditional_weights(grams_.dd, lambda1(), gram_column(kers_.d, VectorXd(data_.d), d)).weights;
    return dose_curve(Estimand::grad_att, dprime_grid, grams_.xx * beta, true);
  }
  CurveEstimate grad_cate_curve(const Eigen::Ref<const VectorXd>& v,
                                const Eigen::Ref<const VectorXd>& grid) const {
    if (!with_v_) throw ConfigError("StaticFit: grad_cate_curve requires a subgroup fit");
    const VectorXd kvv = gram_column(*kers_.v, data_.v, v);
    const VectorXd beta = conditional_weights(grams_.vv, lambda2(), kvv).weights;
    return dose_curve(Estimand::grad_cate, grid, (grams_.xx * beta).cwiseProduct(kvv), true);
  }

 private:
  void require_plain(const char* op) const {
    if (with_v_) throw ConfigError(std::string("StaticFit: ") + op + " is not defined on a subgroup fit");
  }

  VectorXd query_column(double s, double dval, const Eigen::Ref<const VectorXd>& x) const {
    return gram_column(kers_.s, VectorXd(data_.s), s)
        .cwiseProduct(gram_column(kers_.d, VectorXd(data_.d), dval))
        .cwiseProduct(gram_column(kers_.x, data_.x, x));
  }

  VectorXd shifted_mean_column(const Eigen::Ref<const MatrixXd>& xtilde) const {
    if (xtilde.rows() < 1) throw InputError("ds_curve: shifted sample is empty");
    if (xtilde.cols() != data_.x.cols()) throw InputError("ds_curve: shifted covariate width mismatch");
    return gram(kers_.x, data_.x, xtilde).rowwise().mean();
  }

  CurveEstimate dose_curve(Estimand tag, const Eigen::Ref<const VectorXd>& grid, const VectorXd& q,
                           bool derivative) const {
    if (grid.size() < 1) throw InputError("curve: empty dose grid");
    CurveEstimate out;
    out.estimand = tag;
    out.grid = grid;
    out.values.resize(grid.size());
    const VectorXd base = ks1_.cwiseProduct(q);
    for (Index g = 0; g < grid.size(); ++g) {
      const VectorXd kd = derivative ? grad_gram_column(kers_.d, VectorXd(data_.d), grid[g])
                                     : gram_column(kers_.d, VectorXd(data_.d), grid[g]);
      out.values[g] = alpha_.dot(base.cwiseProduct(kd));
    }
    if (!out.values.allFinite()) throw NumericError("curve: non-finite estimate produced");
    return out;
  }

  Dataset data_;
  KernelSet kers_;
  FitOptions opt_;
  bool with_v_;
  GramSet grams_;
  MatrixXd kprod_;
  VectorXd ks1_;
  VectorXd alpha_;
  double lambda_ = 0.0;
  mutable std::optional<double> lambda1_;
  mutable std::optional<double> lambda2_;
};

}  // namespace ksel
