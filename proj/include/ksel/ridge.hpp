#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ksel/common.hpp"

namespace ksel {

// Grid of ridge penalties searched by the tuners.  Values are interpreted as
// lambda in the regularizer n*lambda*I.
struct LambdaGrid {
  std::vector<double> values;

  static LambdaGrid log_spaced(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2)
      throw ConfigError("LambdaGrid: need 0 < lo < hi and count >= 2");
    LambdaGrid g;
    g.values.resize(static_cast<std::size_t>(count));
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < count; ++i)
      g.values[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
    return g;
  }
  static LambdaGrid log_default() { return log_spaced(1e-8, 1e2, 20); }

  void validate() const {
    if (values.empty()) throw ConfigError("LambdaGrid: empty grid");
    double prev = 0.0;
    for (double v : values) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("LambdaGrid: penalties must be positive and finite");
      if (v <= prev) throw ConfigError("LambdaGrid: penalties must be strictly increasing");
      prev = v;
    }
  }
};

// Rate-based penalty lambda = n^(-1/(c+1)) for a regression whose target lives
// in a space of smoothness c.
inline double lambda_theory(Index n, double c) {
  if (n < 1 || !(c > 0.0)) throw ConfigError("lambda_theory: need n >= 1 and c > 0");
  return std::pow(static_cast<double>(n), -1.0 / (c + 1.0));
}

// Rate-based penalty lambda = n^(-b/(b*c+1)) used for the balancing-weight solve.
inline double lambda_theory_riesz(Index n, double b, double c) {
  if (n < 1 || !(b > 0.0) || !(c > 0.0)) throw ConfigError("lambda_theory_riesz: need n >= 1, b > 0, c > 0");
  return std::pow(static_cast<double>(n), -b / (b * c + 1.0));
}

// Cholesky of K + n*lambda*I.  On breakdown retries once with an extra jitter
// of 1e-10 * trace(K)/n on the diagonal, then gives up.
inline Eigen::LLT<MatrixXd> ridge_factor(const Eigen::Ref<const MatrixXd>& k, double lambda) {
  if (k.rows() != k.cols() || k.rows() < 1) throw InputError("ridge_factor: K must be square and non-empty");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge_factor: lambda must be positive and finite");
  const Index n = k.rows();
  const double nl = static_cast<double>(n) * lambda;
  MatrixXd a = k;
  a.diagonal().array() += nl;
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * k.trace() / static_cast<double>(n);
  a.diagonal().array() += jitter;
  llt.compute(a);
  if (llt.info() == Eigen::Success) return llt;
  throw NumericError("ridge_factor: Cholesky failed even after diagonal jitter; K is not positive semi-definite");
}

// Kernel ridge coefficients alpha = (K + n*lambda*I)^{-1} y.
inline VectorXd ridge_solve(const Eigen::Ref<const MatrixXd>& k, const Eigen::Ref<const VectorXd>& y,
                            double lambda) {
  if (y.size() != k.rows()) throw InputError("ridge_solve: y length must match K");
  return ridge_factor(k, lambda).solve(y);
}

namespace detail {
// Smallest leave-one-out leverage allowed before the loss is declared degenerate.
inline constexpr double kLoocvDiagFloor = 1e-12;
}  // namespace detail

// Exact leave-one-out squared error of kernel ridge, via the shortcut
//   H = I - K (K + n*lambda*I)^{-1} = n*lambda (K + n*lambda*I)^{-1},
//   loss = (1/n) || diag(H)^{-1} H y ||^2.
// Equals the average squared error of refitting on n-1 points (with the same
// absolute regularizer n*lambda) and predicting the held-out point.
inline double loocv_loss(const Eigen::Ref<const MatrixXd>& k, const Eigen::Ref<const VectorXd>& y,
                         double lambda) {
  if (y.size() != k.rows()) throw InputError("loocv_loss: y length must match K");
  const Index n = k.rows();
  const double nl = static_cast<double>(n) * lambda;
  Eigen::LLT<MatrixXd> llt = ridge_factor(k, lambda);
  const VectorXd hy = nl * llt.solve(y);
  const MatrixXd ainv = llt.solve(MatrixXd::Identity(n, n));
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double hii = nl * ainv(i, i);
    if (!(hii > detail::kLoocvDiagFloor))
      throw NumericError("loocv_loss: leave-one-out leverage vanished (penalty too small or duplicate rows)");
    const double e = hy[i] / hii;
    loss += e * e;
  }
  return loss / static_cast<double>(n);
}

// Eigendecomposition-backed ridge helper.  One O(n^3) factorization serves a
// whole penalty grid: every per-lambda quantity below costs O(n^2) (plus one
// matrix product for the embedding loss).
class RidgeEig {
 public:
  explicit RidgeEig(const Eigen::Ref<const MatrixXd>& k) : n_(k.rows()) {
    if (k.rows() != k.cols() || k.rows() < 1) throw InputError("RidgeEig: K must be square and non-empty");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
    if (es.info() != Eigen::Success) throw NumericError("RidgeEig: eigendecomposition failed");
    q_ = es.eigenvectors();
    // Clamp tiny negative eigenvalues from rounding; K is a Gram matrix.
    evals_ = es.eigenvalues().cwiseMax(0.0);
    q2_ = q_.cwiseProduct(q_);
  }

  Index n() const { return n_; }
  const MatrixXd& q() const { return q_; }

  VectorXd solve(const Eigen::Ref<const VectorXd>& y, double lambda) const {
    const double nl = static_cast<double>(n_) * lambda;
    return q_ * ((q_.transpose() * y).array() / (evals_.array() + nl)).matrix();
  }

  double loocv_loss(const Eigen::Ref<const VectorXd>& y, double lambda) const {
    const double nl = static_cast<double>(n_) * lambda;
    const VectorXd g = (nl / (evals_.array() + nl)).matrix();
    const VectorXd hy = q_ * (g.cwiseProduct(q_.transpose() * y));
    const VectorXd hdiag = q2_ * g;
    double loss = 0.0;
    for (Index i = 0; i < n_; ++i) {
      if (!(hdiag[i] > detail::kLoocvDiagFloor))
        throw NumericError("loocv_loss: leave-one-out leverage vanished (penalty too small or duplicate rows)");
      const double e = hy[i] / hdiag[i];
      loss += e * e;
    }
    return loss / static_cast<double>(n_);
  }

  // Target-space projection B = Q^T K_target Q, reused across the grid.
  MatrixXd project(const Eigen::Ref<const MatrixXd>& k_target) const {
    if (k_target.rows() != n_ || k_target.cols() != n_)
      throw InputError("RidgeEig::project: target Gram size mismatch");
    return q_.transpose() * k_target * q_;
  }

  // Leave-one-out loss for a vector-valued (feature-space) regression with
  // target Gram K_target = Q B Q^T form: (1/n) sum_i [H K_target H]_ii / H_ii^2.
  double loocv_embedding_loss(const Eigen::Ref<const MatrixXd>& b_projected, double lambda) const {
    if (b_projected.rows() != n_ || b_projected.cols() != n_)
      throw InputError("RidgeEig::loocv_embedding_loss: projected Gram size mismatch");
    const double nl = static_cast<double>(n_) * lambda;
    const VectorXd g = (nl / (evals_.array() + nl)).matrix();
    const VectorXd hdiag = q2_ * g;
    MatrixXd c = b_projected;
    c.array().colwise() *= g.array();
    c.array().rowwise() *= g.transpose().array();
    const MatrixXd t = q_ * c;
    double loss = 0.0;
    for (Index i = 0; i < n_; ++i) {
      if (!(hdiag[i] > detail::kLoocvDiagFloor))
        throw NumericError("loocv_embedding_loss: leave-one-out leverage vanished (penalty too small or duplicate rows)");
      const double num = t.row(i).dot(q_.row(i));
      loss += num / (hdiag[i] * hdiag[i]);
    }
    return loss / static_cast<double>(n_);
  }

 private:
  Index n_;
  MatrixXd q_;
  VectorXd evals_;
  MatrixXd q2_;
};

namespace detail {

template <class LossFn>
double argmin_on_grid(const LambdaGrid& grid, LossFn&& loss_fn) {
  grid.validate();
  // Losses within this relative tolerance count as tied; ties resolve toward
  // the larger penalty, which the ascending scan visits last.
  constexpr double kTieRel = 1e-12;
  bool found = false;
  double best_lambda = 0.0, best_loss = 0.0;
  for (double lambda : grid.values) {
    double loss;
    try {
      loss = loss_fn(lambda);
    } catch (const NumericError&) {
      continue;  // degenerate leverage at this penalty; skip it
    }
    if (!std::isfinite(loss)) continue;
    if (!found || loss <= best_loss + kTieRel * std::abs(best_loss)) {
      best_lambda = lambda;
      if (!found || loss < best_loss) best_loss = loss;
      found = true;
    }
  }
  if (!found) throw NumericError("tune_lambda: no penalty on the grid produced a finite loss");
  return best_lambda;
}

}  // namespace detail

// Grid argmin of the leave-one-out loss; ties resolve toward the larger penalty.
inline double tune_lambda(const Eigen::Ref<const MatrixXd>& k, const Eigen::Ref<const VectorXd>& y,
                          const LambdaGrid& grid = LambdaGrid::log_default()) {
  if (y.size() != k.rows()) throw InputError("tune_lambda: y length must match K");
  RidgeEig eig(k);
  return detail::argmin_on_grid(grid, [&](double l) { return eig.loocv_loss(y, l); });
}

// Reference (single-factorization) form of the vector-valued leave-one-out loss,
// with conditioning Gram K_bb and target Gram K_aa.
inline double loocv_embedding_loss(const Eigen::Ref<const MatrixXd>& k_bb,
                                   const Eigen::Ref<const MatrixXd>& k_aa, double lambda) {
  if (k_bb.rows() != k_bb.cols() || k_aa.rows() != k_aa.cols() || k_bb.rows() != k_aa.rows())
    throw InputError("loocv_embedding_loss: Gram size mismatch");
  const Index n = k_bb.rows();
  const double nl = static_cast<double>(n) * lambda;
  Eigen::LLT<MatrixXd> llt = ridge_factor(k_bb, lambda);
  const MatrixXd ainv = llt.solve(MatrixXd::Identity(n, n));
  const MatrixXd h = nl * ainv;
  const MatrixXd hkh = h * k_aa * h;
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!(h(i, i) > detail::kLoocvDiagFloor))
      throw NumericError("loocv_embedding_loss: leave-one-out leverage vanished (penalty too small or duplicate rows)");
    loss += hkh(i, i) / (h(i, i) * h(i, i));
  }
  return loss / static_cast<double>(n);
}

inline double tune_lambda_embedding(const Eigen::Ref<const MatrixXd>& k_bb,
                                    const Eigen::Ref<const MatrixXd>& k_aa,
                                    const LambdaGrid& grid = LambdaGrid::log_default()) {
  RidgeEig eig(k_bb);
  const MatrixXd b = eig.project(k_aa);
  return detail::argmin_on_grid(grid, [&](double l) { return eig.loocv_embedding_loss(b, l); });
}

}  // namespace ksel
