#pragma once

#include "ksel/common.hpp"
#include "ksel/ridge.hpp"

namespace ksel {

// How ridge penalties are chosen: leave-one-out tuning on each regression's
// own objective, one fixed value everywhere, or rate-based values from
// user-supplied smoothness exponents.
enum class PenaltyMode { loocv, fixed, theory };

struct FitOptions {
  PenaltyMode mode = PenaltyMode::loocv;
  double fixed_lambda = 1e-3;  // every penalty in fixed mode; also the no-tuning fallback
  double theory_c = 2.0;       // regression penalties n^(-1/(c+1))
  double theory_b3 = 2.0;      // balancing-weight penalty n^(-b3/(b3*c3+1))
  double theory_c3 = 2.0;
  LambdaGrid grid = LambdaGrid::log_default();

  void validate() const {
    if (!(fixed_lambda > 0.0)) throw ConfigError("FitOptions: fixed_lambda must be positive");
    if (!(theory_c > 0.0) || !(theory_b3 > 0.0) || !(theory_c3 > 0.0))
      throw ConfigError("FitOptions: theory exponents must be positive");
    grid.validate();
  }
};

inline double resolve_scalar_lambda(const FitOptions& o, const Eigen::Ref<const MatrixXd>& k,
                                    const Eigen::Ref<const VectorXd>& y) {
  switch (o.mode) {
    case PenaltyMode::fixed:
      return o.fixed_lambda;
    case PenaltyMode::theory:
      return lambda_theory(k.rows(), o.theory_c);
    case PenaltyMode::loocv:
      return tune_lambda(k, y, o.grid);
  }
  throw ConfigError("FitOptions: unknown penalty mode");
}

inline double resolve_embedding_lambda(const FitOptions& o, const Eigen::Ref<const MatrixXd>& k_bb,
                                       const Eigen::Ref<const MatrixXd>& k_aa) {
  switch (o.mode) {
    case PenaltyMode::fixed:
      return o.fixed_lambda;
    case PenaltyMode::theory:
      return lambda_theory(k_bb.rows(), o.theory_c);
    case PenaltyMode::loocv:
      return tune_lambda_embedding(k_bb, k_aa, o.grid);
  }
  throw ConfigError("FitOptions: unknown penalty mode");
}

// Penalty for the balancing-weight (Riesz) solve.  No leave-one-out objective
// exists for it, so the loocv mode falls back to a trace-normalized default.
inline double resolve_riesz_lambda(const FitOptions& o, const Eigen::Ref<const MatrixXd>& k_big,
                                   Index n) {
  switch (o.mode) {
    case PenaltyMode::fixed:
      return o.fixed_lambda;
    case PenaltyMode::theory:
      return lambda_theory_riesz(n, o.theory_b3, o.theory_c3);
    case PenaltyMode::loocv:
      return 1e-3 * k_big.trace() / static_cast<double>(k_big.rows());
  }
  throw ConfigError("FitOptions: unknown penalty mode");
}

enum class Estimand { ate, ds, att, cate, grad_ate, grad_ds, grad_att, grad_cate, dyn_ate, dyn_ds };

// A dose grid with point estimates.
struct CurveEstimate {
  VectorXd grid;
  VectorXd values;
  Estimand estimand = Estimand::ate;
};

}  // namespace ksel
