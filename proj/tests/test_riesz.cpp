// Tests for the balancing-weight (Riesz) estimator: block assembly against
// entrywise transcriptions, the scalar hand case, linearity, censoring, and
// statistical recovery of the inverse-propensity truth on a discrete design.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ksel/dataset.hpp"
#include "ksel/riesz.hpp"
#include "ksel/simulation.hpp"

namespace {

using ksel::Dataset;
using ksel::FitOptions;
using ksel::Index;
using ksel::KernelSet;
using ksel::KernelSpec;
using ksel::MatrixXd;
using ksel::PenaltyMode;
using ksel::RieszBlocks;
using ksel::RieszEstimator;
using ksel::RieszKind;
using ksel::RieszQuery;
using ksel::VectorXd;

Dataset small_discrete(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd s(n), y(n), d(n), vcol(n);
  MatrixXd x(n, 1);
  for (Index i = 0; i < n; ++i) {
    s[i] = unif(rng) < 0.8 ? 1.0 : 0.0;
    d[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
    vcol[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
    x(i, 0) = 2.0 * unif(rng) - 1.0;
    y[i] = d[i] + x(i, 0) + 0.1 * unif(rng);
  }
  return Dataset::make(s, y, d, x, {}, MatrixXd(vcol));
}

KernelSet discrete_kernels() {
  KernelSet k;
  k.s = KernelSpec::indicator(1);
  k.d = KernelSpec::indicator(1);
  k.x = KernelSpec::gaussian1d(0.9);
  k.v = KernelSpec::indicator(1);
  return k;
}

FitOptions fixed_lambda(double lam) {
  FitOptions o;
  o.mode = PenaltyMode::fixed;
  o.fixed_lambda = lam;
  return o;
}

// Entrywise transcription of the four blocks for each query kind.
MatrixXd manual_k(const Dataset& data, const KernelSet& kers, const RieszQuery& q) {
  const Index n = data.n();
  const double dose = q.kind == RieszKind::att ? q.dprime : q.d;
  auto ks = [&](double a, double b) { return ksel::eval_kernel(kers.s, a, b); };
  auto kd = [&](double a, double b) { return ksel::eval_kernel(kers.d, a, b); };
  auto kx = [&](Index i, Index j) {
    return ksel::eval_kernel(kers.x, VectorXd(data.x.row(i)), VectorXd(data.x.row(j)));
  };
  auto kv = [&](double a, double b) { return ksel::eval_kernel(*kers.v, a, b); };
  auto maskd = [&](Index i) { return data.d[i] == q.d ? 1.0 : 0.0; };
  auto maskv = [&](Index i) { return data.v(i, 0) == q.v ? 1.0 : 0.0; };
  MatrixXd big(2 * n, 2 * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double k1 = ks(data.s[i], data.s[j]) * kd(data.d[i], data.d[j]) * kx(i, j);
      double k2 = ks(data.s[i], 1.0) * kd(data.d[i], dose) * kx(i, j);
      double k4 = ks(1.0, 1.0) * kd(dose, dose) * kx(i, j);
      switch (q.kind) {
        case RieszKind::ate:
        case RieszKind::ds:
          break;
        case RieszKind::att:
          k2 *= maskd(j);
          k4 *= maskd(i) * maskd(j);
          break;
        case RieszKind::cate:
          k1 *= kv(data.v(i, 0), data.v(j, 0));
          k2 *= maskv(j) * kv(data.v(i, 0), q.v);
          k4 *= maskv(i) * maskv(j) * kv(q.v, q.v);
          break;
      }
      big(i, j) = k1;
      big(i, j + n) = k2;
      big(i + n, j) = 0.0;  // filled below from the k2 transcription
      big(i + n, j + n) = k4;
    }
  // k3 is the reflection of k2: k3(W_i, W_j) = k2(W_j, W_i).
  big.bottomLeftCorner(n, n) = big.topRightCorner(n, n).transpose();
  return big;
}

TEST(RieszBlocksTest, MatchesEntrywiseTranscriptionAllKinds) {
  const Dataset data = small_discrete(10, 21);
  const KernelSet kers = discrete_kernels();
  std::vector<RieszQuery> queries;
  queries.push_back({RieszKind::ate, 1.0, 0.0, 1.0});
  queries.push_back({RieszKind::ds, 0.0, 0.0, 1.0});
  queries.push_back({RieszKind::att, 1.0, 0.0, 1.0});
  queries.push_back({RieszKind::cate, 1.0, 0.0, 1.0});
  for (const auto& q : queries) {
    const RieszBlocks b = RieszBlocks::build(data, kers, q);
    const MatrixXd expect = manual_k(data, kers, q);
    EXPECT_EQ((b.k - expect).cwiseAbs().maxCoeff(), 0.0);
    // Off-diagonal symmetry is exact.
    EXPECT_EQ((b.k.topRightCorner(10, 10) - b.k.bottomLeftCorner(10, 10).transpose())
                  .cwiseAbs()
                  .maxCoeff(),
              0.0);
    // Omega blocks are the products of the assembled blocks.
    MatrixXd omega(20, 20);
    const MatrixXd k1 = expect.topLeftCorner(10, 10);
    const MatrixXd k2 = expect.topRightCorner(10, 10);
    const MatrixXd k3 = expect.bottomLeftCorner(10, 10);
    omega.topLeftCorner(10, 10) = k1 * k1;
    omega.topRightCorner(10, 10) = k1 * k2;
    omega.bottomLeftCorner(10, 10) = k3 * k1;
    omega.bottomRightCorner(10, 10) = k3 * k2;
    EXPECT_LE((b.omega - omega).cwiseAbs().maxCoeff(), 1e-12);
    const VectorXd z_expect = expect.rightCols(10) * VectorXd::Ones(10);
    EXPECT_LE((b.z - z_expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RieszBlocksTest, SingleObservationHandAssembly) {
  VectorXd s(1), y(1), d(1);
  MatrixXd x(1, 1);
  s << 1.0;
  y << 0.5;
  d << 0.7;
  x << 0.33;
  KernelSet kers;
  kers.s = KernelSpec::gaussian1d(1.0);
  kers.d = KernelSpec::gaussian1d(1.0);
  kers.x = KernelSpec::gaussian1d(1.0);
  RieszQuery q;
  q.kind = RieszKind::ate;
  q.d = 0.7;  // equals the lone treatment value
  const RieszBlocks b = RieszBlocks::build(Dataset::make(s, y, d, x), kers, q);
  // Every self-kernel evaluates to one, so all four blocks are the scalar 1.
  EXPECT_EQ(b.k, MatrixXd::Ones(2, 2));
  EXPECT_EQ(b.omega, MatrixXd::Ones(2, 2));
  EXPECT_EQ(b.z, VectorXd::Ones(2));
  const RieszEstimator est(b, fixed_lambda(0.5));
  const VectorXd xq = VectorXd::Constant(1, 0.33);
  // (Omega + n*lam3*K) = 1.5 * ones(2,2); after jitter the solve gives
  // z'M^{-1}u = 2/3 for u = (1,1).
  EXPECT_NEAR(est.value(1.0, 0.7, xq), 2.0 / 3.0, 1e-6);
}

TEST(RieszBlocksTest, EmptyTreatmentMaskZeroesEverything) {
  const Dataset data = small_discrete(12, 5);
  RieszQuery q;
  q.kind = RieszKind::att;
  q.d = 2.0;  // no unit carries this dose
  q.dprime = 1.0;
  const RieszBlocks b = RieszBlocks::build(data, discrete_kernels(), q);
  EXPECT_EQ(b.k.bottomRightCorner(12, 12).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b.z.cwiseAbs().maxCoeff(), 0.0);
  const RieszEstimator est(b, fixed_lambda(1e-3));
  const VectorXd xq = VectorXd::Constant(1, 0.2);
  EXPECT_EQ(est.value(1.0, 1.0, xq), 0.0);
  EXPECT_EQ(est.value(0.0, 0.0, xq), 0.0);
}

TEST(Riesz, LinearInQueryVectorAndWeights) {
  const Dataset data = small_discrete(30, 8);
  RieszQuery q;
  q.kind = RieszKind::ate;
  q.d = 1.0;
  const RieszBlocks b = RieszBlocks::build(data, discrete_kernels(), q);
  const RieszEstimator est(b, fixed_lambda(0.1));  // solid conditioning for the solve probes
  const VectorXd x1 = VectorXd::Constant(1, 0.4);
  const VectorXd x2 = VectorXd::Constant(1, -0.7);
  const VectorXd u1 = est.blocks().query_vector(1.0, 1.0, x1);
  const VectorXd u2 = est.blocks().query_vector(0.0, 1.0, x2);
  EXPECT_NEAR(est.apply(u1 + u2), est.apply(u1) + est.apply(u2), 1e-12);
  EXPECT_NEAR(est.apply(2.5 * u1), 2.5 * est.apply(u1), 1e-12);
  // Linearity in the weight vector through the retained factorization.  The
  // probe lives in the range of K; the system matrix is singular orthogonal
  // to it, so a raw coordinate vector would exercise the nullspace instead.
  const VectorXd z2 = est.blocks().k.col(3);
  const double lhs = est.solve(est.blocks().z + z2).dot(u1);
  const double rhs = est.solve(est.blocks().z).dot(u1) + est.solve(z2).dot(u1);
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
}

TEST(Riesz, CensoringClampsAndCounts) {
  const Dataset data = small_discrete(12, 19);
  RieszQuery q;
  q.kind = RieszKind::ate;
  q.d = 1.0;
  const RieszBlocks b = RieszBlocks::build(data, discrete_kernels(), q);
  const RieszEstimator est(b, fixed_lambda(1e-3), 10.0);
  EXPECT_EQ(est.censor(0.5), 0.5);
  EXPECT_EQ(est.censor(99.0), 10.0);
  EXPECT_EQ(est.censor(-99.0), -10.0);
  EXPECT_EQ(RieszEstimator::default_censor_bound(), 1e4);

  const RieszEstimator tight(RieszBlocks::build(data, discrete_kernels(), q), fixed_lambda(1e-3),
                             1e-12);
  const VectorXd xq = VectorXd::Constant(1, 0.1);
  const double v = tight.value(1.0, 1.0, xq);
  EXPECT_LE(std::abs(v), 1e-12);
  EXPECT_GE(tight.censored_count(), 1);
  EXPECT_EQ(est.censored_count(), 0);
}

TEST(Riesz, ShiftKindSharesTrainingBlocks) {
  const Dataset data = small_discrete(15, 4);
  RieszQuery ate_q{RieszKind::ate, 1.0, 0.0, 1.0};
  RieszQuery ds_q{RieszKind::ds, 1.0, 0.0, 1.0};
  const RieszBlocks a = RieszBlocks::build(data, discrete_kernels(), ate_q);
  const RieszBlocks b = RieszBlocks::build(data, discrete_kernels(), ds_q);
  EXPECT_EQ((a.k - b.k).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.omega - b.omega).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.z - b.z).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Riesz, RejectsInvalidConfigurations) {
  const Dataset data = small_discrete(10, 3);
  KernelSet kers = discrete_kernels();
  RieszQuery att{RieszKind::att, 1.0, 0.0, 1.0};
  KernelSet gauss_d = kers;
  gauss_d.d = KernelSpec::gaussian1d(1.0);
  EXPECT_THROW(RieszBlocks::build(data, gauss_d, att), ksel::ConfigError);
  RieszQuery cate{RieszKind::cate, 1.0, 0.0, 1.0};
  KernelSet gauss_v = kers;
  gauss_v.v = KernelSpec::gaussian1d(1.0);
  EXPECT_THROW(RieszBlocks::build(data, gauss_v, cate), ksel::ConfigError);
  const Dataset no_v = Dataset::make(data.s, data.sy, data.d, data.x);
  EXPECT_THROW(RieszBlocks::build(no_v, kers, cate), ksel::InputError);
  const RieszBlocks ate_b = RieszBlocks::build(data, kers, {RieszKind::ate, 1.0, 0.0, 1.0});
  EXPECT_THROW(RieszEstimator(ate_b, fixed_lambda(1e-3), -1.0), ksel::ConfigError);
  const VectorXd xq = VectorXd::Constant(1, 0.0);
  EXPECT_THROW(ate_b.query_vector(1.0, 1.0, VectorXd::Constant(1, 1.0), xq), ksel::ConfigError);
  const RieszBlocks cate_b = RieszBlocks::build(data, kers, cate);
  EXPECT_THROW(cate_b.query_vector(1.0, 1.0, xq), ksel::ConfigError);
}

TEST(RieszDgp, RecoversInversePropensityAtAtom) {
  const Dataset data = ksel::simulate(ksel::DgpSpec::s1(), 4000, 1234);
  const KernelSet kers = KernelSet::defaults(data, /*treat_indicator=*/true);
  RieszQuery q;
  q.kind = RieszKind::ate;
  q.d = 1.0;
  const RieszEstimator est(RieszBlocks::build(data, kers, q));
  const VectorXd x_pos = VectorXd::Constant(1, 1.0);
  // True balancing weight at (S=1, D=1, X=1): 1 / (P(S=1|1,1) P(D=1|1)).
  const double truth = 1.0 / (0.9 * 0.7);
  EXPECT_NEAR(est.value(1.0, 1.0, x_pos), truth, 0.25);
  EXPECT_EQ(est.censored_count(), 0);
}

TEST(RieszDgp, RepresentsMomentOnTestDictionary) {
  const Dataset data = ksel::simulate(ksel::DgpSpec::s1(), 2000, 77);
  const KernelSet kers = KernelSet::defaults(data, /*treat_indicator=*/true);
  RieszQuery q;
  q.kind = RieszKind::ate;
  q.d = 1.0;
  const RieszEstimator est(RieszBlocks::build(data, kers, q));
  using TestFn = std::function<double(double, double, double)>;
  const std::vector<TestFn> dict = {
      [](double, double dd, double xx) { return dd + 0.5 * xx; },
      [](double, double, double xx) { return 2.0 + xx; },
      [](double ss, double dd, double) { return ss * (dd + 1.0); },
  };
  for (const auto& f : dict) {
    double lhs = 0.0, rhs = 0.0;
    for (Index i = 0; i < data.n(); ++i) {
      const VectorXd xi = data.x.row(i);
      rhs += est.value(data.s[i], data.d[i], xi) * f(data.s[i], data.d[i], data.x(i, 0));
      lhs += f(1.0, q.d, data.x(i, 0));
    }
    lhs /= static_cast<double>(data.n());
    rhs /= static_cast<double>(data.n());
    EXPECT_NEAR(rhs, lhs, 0.15 * std::abs(lhs));
  }
}

}  // namespace
