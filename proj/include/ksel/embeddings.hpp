#pragma once

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/kernels.hpp"
#include "ksel/ridge.hpp"

namespace ksel {

enum class EmbeddingRole { x, m, xm_pair };

// Weight vector over training rows representing an empirical mean embedding of
// one variable role.  Evaluating the embedded mean against any function's
// kernel column is a dot product with these weights.
struct EmbeddingWeights {
  VectorXd weights;
  EmbeddingRole role = EmbeddingRole::x;
};

// Uniform weights of the plain (unconditional) empirical embedding.
inline EmbeddingWeights unconditional_weights(Index n, EmbeddingRole role = EmbeddingRole::x) {
  if (n < 1) throw InputError("unconditional_weights: need n >= 1");
  return {VectorXd::Constant(n, 1.0 / static_cast<double>(n)), role};
}

// Conditional mean embedding weights (K_BB + n*lambda*I)^{-1} k_Bb, where B is
// the conditioning variable (possibly a Hadamard product of several roles) and
// k_Bb its cross column at the query.
inline EmbeddingWeights conditional_weights(const Eigen::Ref<const MatrixXd>& k_bb, double lambda,
                                            const Eigen::Ref<const VectorXd>& k_bq,
                                            EmbeddingRole role = EmbeddingRole::x) {
  if (k_bq.size() != k_bb.rows()) throw InputError("conditional_weights: cross column length mismatch");
  return {ridge_solve(k_bb, k_bq, lambda), role};
}

// Embedding weights beta(d,x) = (K_DD .* K_XX + n*lambda4*I)^{-1} (K_Dd .* K_Xx)
// of the follow-up covariate M given (D,X) = (d,x).
inline EmbeddingWeights sequential_pair_weights(const Dataset& data, const KernelSet& kers, double d,
                                                const Eigen::Ref<const VectorXd>& x, double lambda4) {
  if (!data.has_m()) throw InputError("sequential_pair_weights: dataset has no M column");
  const MatrixXd k_bb = gram(kers.d, MatrixXd(data.d)).cwiseProduct(gram(kers.x, data.x));
  const VectorXd k_bq =
      gram_column(kers.d, VectorXd(data.d), d).cwiseProduct(gram_column(kers.x, data.x, x));
  return conditional_weights(k_bb, lambda4, k_bq, EmbeddingRole::m);
}

}  // namespace ksel
