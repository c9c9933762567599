#include "ksel/ridge.hpp"

#include <gtest/gtest.h>

#include <random>

#include "ksel/kernels.hpp"

using namespace ksel;

namespace {

MatrixXd random_points(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  MatrixXd a(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) a(i, j) = nd(rng);
  return a;
}

VectorXd random_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) y[i] = nd(rng);
  return y;
}

// Naive leave-one-out oracle: refit on the n-1 remaining points keeping the
// same absolute regularizer n*lambda, predict the held-out point, average the
// squared errors.
double naive_loocv(const MatrixXd& k, const VectorXd& y, double lambda) {
  const Index n = k.rows();
  const double nl = static_cast<double>(n) * lambda;
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    MatrixXd ksub(n - 1, n - 1);
    VectorXd ysub(n - 1), kcol(n - 1);
    Index r = 0;
    for (Index a = 0; a < n; ++a) {
      if (a == i) continue;
      ysub[r] = y[a];
      kcol[r] = k(a, i);
      Index c = 0;
      for (Index b = 0; b < n; ++b) {
        if (b == i) continue;
        ksub(r, c++) = k(a, b);
      }
      ++r;
    }
    MatrixXd reg = ksub + nl * MatrixXd::Identity(n - 1, n - 1);
    VectorXd alpha = reg.ldlt().solve(ysub);
    const double pred = kcol.dot(alpha);
    loss += (y[i] - pred) * (y[i] - pred);
  }
  return loss / static_cast<double>(n);
}

// Same brute-force scheme for the vector-valued (embedding) loss: the held-out
// residual norm is expanded with kernel evaluations of the target variable.
double naive_embedding_loocv(const MatrixXd& k_bb, const MatrixXd& k_aa, double lambda) {
  const Index n = k_bb.rows();
  const double nl = static_cast<double>(n) * lambda;
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    MatrixXd ksub(n - 1, n - 1), kasub(n - 1, n - 1);
    VectorXd kcol(n - 1), kacol(n - 1);
    Index r = 0;
    for (Index a = 0; a < n; ++a) {
      if (a == i) continue;
      kcol[r] = k_bb(a, i);
      kacol[r] = k_aa(a, i);
      Index c = 0;
      for (Index b = 0; b < n; ++b) {
        if (b == i) continue;
        ksub(r, c) = k_bb(a, b);
        kasub(r, c) = k_aa(a, b);
        ++c;
      }
      ++r;
    }
    MatrixXd reg = ksub + nl * MatrixXd::Identity(n - 1, n - 1);
    VectorXd beta = reg.ldlt().solve(kcol);
    loss += k_aa(i, i) - 2.0 * beta.dot(kacol) + beta.dot(kasub * beta);
  }
  return loss / static_cast<double>(n);
}

MatrixXd gaussian_gram(Index n, std::uint64_t seed, double ls = 1.0) {
  return gram(KernelSpec::gaussian1d(ls), random_points(n, 1, seed));
}

}  // namespace

TEST(Ridge, ScalarExample) {
  MatrixXd k = MatrixXd::Constant(1, 1, 1.0);
  VectorXd y = VectorXd::Constant(1, 2.0);
  VectorXd alpha = ridge_solve(k, y, 1.0);
  EXPECT_DOUBLE_EQ(alpha[0], 1.0);
  EXPECT_DOUBLE_EQ(k(0, 0) * alpha[0], 1.0);  // prediction at the training point
}

TEST(Ridge, ZeroTargetsGiveZeroWeights) {
  MatrixXd k = gaussian_gram(8, 3);
  VectorXd alpha = ridge_solve(k, VectorXd::Zero(8), 0.3);
  EXPECT_DOUBLE_EQ(alpha.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ridge, ResidualIdentity) {
  MatrixXd k = gaussian_gram(12, 4);
  VectorXd y = random_vector(12, 5);
  const double lambda = 0.05;
  VectorXd alpha = ridge_solve(k, y, lambda);
  MatrixXd reg = k + 12.0 * lambda * MatrixXd::Identity(12, 12);
  EXPECT_LE((reg * alpha - y).norm(), 1e-8 * y.norm());
}

TEST(Ridge, PrimalDualEquivalenceOracle) {
  // Degree-2 polynomial kernel k(a,b) = (1 + a*b)^2 with explicit feature map
  // (1, sqrt(2)*a, a^2): the Gram-side solve must match the feature-side solve.
  const Index n = 10;
  VectorXd pts = random_vector(n, 17);
  VectorXd y = random_vector(n, 18);
  auto phi = [](double a) { return (VectorXd(3) << 1.0, std::sqrt(2.0) * a, a * a).finished(); };
  MatrixXd features(n, 3);
  for (Index i = 0; i < n; ++i) features.row(i) = phi(pts[i]).transpose();
  MatrixXd k = features * features.transpose();
  const double lambda = 0.07;
  const double nl = static_cast<double>(n) * lambda;
  VectorXd alpha = ridge_solve(k, y, lambda);
  VectorXd w = (features.transpose() * features + nl * MatrixXd::Identity(3, 3))
                   .ldlt()
                   .solve(features.transpose() * y);
  for (double q : {-0.7, 0.0, 0.4, 1.2}) {
    VectorXd kq(n);
    for (Index i = 0; i < n; ++i) {
      const double t = 1.0 + pts[i] * q;
      kq[i] = t * t;
    }
    EXPECT_NEAR(kq.dot(alpha), phi(q).dot(w), 1e-8);
  }
}

TEST(Ridge, SolveRejectsBadInputs) {
  MatrixXd k = gaussian_gram(4, 9);
  EXPECT_THROW(ridge_solve(k, VectorXd::Zero(3), 0.1), InputError);
  EXPECT_THROW(ridge_solve(k, VectorXd::Zero(4), 0.0), ConfigError);
  EXPECT_THROW(ridge_solve(k, VectorXd::Zero(4), -1.0), ConfigError);
  MatrixXd bad = -10.0 * MatrixXd::Identity(4, 4);
  EXPECT_THROW(ridge_solve(bad, VectorXd::Ones(4), 1e-12), NumericError);
}

TEST(Ridge, LoocvLargePenaltyLimit) {
  MatrixXd k = gaussian_gram(15, 23);
  VectorXd y = random_vector(15, 24);
  const double loss = loocv_loss(k, y, 1e12);
  const double limit = y.squaredNorm() / 15.0;
  EXPECT_NEAR(loss, limit, 1e-4 * limit);
}

TEST(Ridge, LoocvHandExample) {
  MatrixXd k = MatrixXd::Identity(2, 2);
  VectorXd y(2);
  y << 1.0, -1.0;
  EXPECT_NEAR(loocv_loss(k, y, 0.5), 1.0, 1e-12);
}

TEST(Ridge, LoocvMatchesNaiveRefitOracle) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<Index> nd(2, 50);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = nd(rng);
    MatrixXd k = gaussian_gram(n, 100 + static_cast<std::uint64_t>(rep));
    VectorXd y = random_vector(n, 200 + static_cast<std::uint64_t>(rep));
    for (double lambda : {1e-3, 0.1, 1.0}) {
      EXPECT_NEAR(loocv_loss(k, y, lambda), naive_loocv(k, y, lambda), 1e-8);
    }
  }
}

TEST(Ridge, LoocvDuplicateRowsTinyPenaltyErrors) {
  MatrixXd pts(4, 1);
  pts << 0.0, 0.0, 1.0, 2.0;  // duplicate point
  MatrixXd k = gram(KernelSpec::gaussian1d(1.0), pts);
  VectorXd y = random_vector(4, 77);
  EXPECT_THROW(loocv_loss(k, y, 1e-17), NumericError);
}

TEST(Ridge, EigPathMatchesDirectLoocv) {
  for (std::uint64_t seed : {40u, 41u}) {
    MatrixXd k = gaussian_gram(30, seed);
    VectorXd y = random_vector(30, seed + 100);
    RidgeEig eig(k);
    for (double lambda : {1e-6, 1e-3, 0.1, 10.0}) {
      const double direct = loocv_loss(k, y, lambda);
      EXPECT_NEAR(eig.loocv_loss(y, lambda), direct, 1e-8 * std::max(1.0, direct));
      const VectorXd a1 = eig.solve(y, lambda), a2 = ridge_solve(k, y, lambda);
      EXPECT_LE((a1 - a2).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, a2.norm()));
    }
  }
}

TEST(Ridge, TuneSingleValueGrid) {
  MatrixXd k = gaussian_gram(10, 55);
  VectorXd y = random_vector(10, 56);
  LambdaGrid g;
  g.values = {0.37};
  EXPECT_DOUBLE_EQ(tune_lambda(k, y, g), 0.37);
}

TEST(Ridge, TunePicksLargePenaltyForNoise) {
  MatrixXd k = gaussian_gram(60, 61, 0.1);  // short lengthscale: flexible fit
  VectorXd y = random_vector(60, 62);       // pure noise
  LambdaGrid g;
  g.values = {1e-6, 1e6};
  EXPECT_DOUBLE_EQ(tune_lambda(k, y, g), 1e6);
}

TEST(Ridge, TunePicksSmallPenaltyForSmoothSignal) {
  MatrixXd pts = random_points(40, 1, 63);
  MatrixXd k = gram(KernelSpec::gaussian1d(1.0), pts);
  VectorXd y(40);
  for (Index i = 0; i < 40; ++i) y[i] = std::sin(pts(i, 0));
  LambdaGrid g;
  g.values = {1e-8, 1e2};
  EXPECT_DOUBLE_EQ(tune_lambda(k, y, g), 1e-8);
}

TEST(Ridge, TuneTiesResolveTowardLargerPenalty) {
  // With K = I every penalty gives the same leave-one-out loss, so the tie
  // break must surface the largest grid value.
  MatrixXd k = MatrixXd::Identity(3, 3);
  VectorXd y = random_vector(3, 64);
  const double best = tune_lambda(k, y, LambdaGrid::log_default());
  EXPECT_DOUBLE_EQ(best, LambdaGrid::log_default().values.back());
}

TEST(Ridge, WeightNormNonincreasingInPenalty) {
  MatrixXd k = gaussian_gram(25, 71);
  VectorXd y = random_vector(25, 72);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-4, 1e-2, 1.0, 1e2, 1e4}) {
    const double norm = ridge_solve(k, y, lambda).norm();
    EXPECT_LE(norm, prev + 1e-12);
    prev = norm;
  }
}

TEST(Ridge, PermutationInvariantPredictions) {
  const Index n = 20;
  MatrixXd pts = random_points(n, 1, 81);
  MatrixXd k = gram(KernelSpec::gaussian1d(1.0), pts);
  VectorXd y = random_vector(n, 82);
  VectorXd kq = gram_column(KernelSpec::gaussian1d(1.0), VectorXd(pts.col(0)), 0.33);
  const double pred = kq.dot(ridge_solve(k, y, 0.2));

  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(83));
  MatrixXd kp(n, n);
  VectorXd yp(n), kqp(n);
  for (Index i = 0; i < n; ++i) {
    yp[i] = y[perm[i]];
    kqp[i] = kq[perm[i]];
    for (Index j = 0; j < n; ++j) kp(i, j) = k(perm[i], perm[j]);
  }
  EXPECT_NEAR(kqp.dot(ridge_solve(kp, yp, 0.2)), pred, 1e-10);
}

TEST(Ridge, EmbeddingLossMatchesBruteForceOracle) {
  for (Index n : {6, 15, 30}) {
    MatrixXd b_pts = random_points(n, 1, 90 + static_cast<std::uint64_t>(n));
    MatrixXd a_pts = random_points(n, 2, 91 + static_cast<std::uint64_t>(n));
    MatrixXd k_bb = gram(KernelSpec::gaussian1d(0.8), b_pts);
    MatrixXd k_aa = gram(KernelSpec::gaussian((VectorXd(2) << 1.0, 1.5).finished()), a_pts);
    for (double lambda : {1e-2, 0.5}) {
      const double direct = loocv_embedding_loss(k_bb, k_aa, lambda);
      EXPECT_NEAR(direct, naive_embedding_loocv(k_bb, k_aa, lambda), 1e-8);
      RidgeEig eig(k_bb);
      EXPECT_NEAR(eig.loocv_embedding_loss(eig.project(k_aa), lambda), direct,
                  1e-8 * std::max(1.0, direct));
    }
  }
}

TEST(Ridge, TuneEmbeddingRuns) {
  MatrixXd b_pts = random_points(25, 1, 95);
  MatrixXd k_bb = gram(KernelSpec::gaussian1d(0.8), b_pts);
  // Target strongly depends on the conditioning variable: prefer light penalty.
  MatrixXd k_aa = gram(KernelSpec::gaussian1d(1.0), b_pts);
  LambdaGrid g;
  g.values = {1e-6, 1e6};
  EXPECT_DOUBLE_EQ(tune_lambda_embedding(k_bb, k_aa, g), 1e-6);
}

TEST(Ridge, TheoryRates) {
  EXPECT_NEAR(lambda_theory(100, 2.0), std::pow(100.0, -1.0 / 3.0), 1e-15);
  EXPECT_NEAR(lambda_theory_riesz(100, 2.0, 2.0), std::pow(100.0, -0.4), 1e-15);
  EXPECT_THROW(lambda_theory(0, 2.0), ConfigError);
}

TEST(Ridge, GridValidation) {
  LambdaGrid g = LambdaGrid::log_default();
  EXPECT_EQ(g.values.size(), 20u);
  EXPECT_NEAR(g.values.front(), 1e-8, 1e-20);
  EXPECT_NEAR(g.values.back(), 1e2, 1e-10);
  LambdaGrid bad;
  bad.values = {0.5, 0.5};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.values = {};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.values = {-1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
}
