#include "gme/oracle/fock.hpp"
#include "gme/replica.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace gme {
namespace {

FDConfig quiet() {
  FDConfig fd;
  fd.on_warning = nullptr;
  return fd;
}

TEST(Dlm, Examples) {
  EXPECT_EQ(dlm_coefficient(0, 0), 2);
  EXPECT_EQ(dlm_coefficient(1, 0), 1);
  EXPECT_EQ(dlm_coefficient(1, 1), 1);
  EXPECT_EQ(dlm_coefficient(2, 1), 2);
  EXPECT_EQ(dlm_coefficient(2, 0), 0);
  EXPECT_EQ(dlm_coefficient(3, -1), -1);  // out-of-range l: only C(m, 0) survives
}

TEST(Dlm, RowsSumToTwo) {
  for (int m = 0; m <= 6; ++m) {
    std::int64_t sum = 0;
    for (int l = 0; l <= m; ++l) sum += dlm_coefficient(m, l);
    EXPECT_EQ(sum, 2) << "m=" << m;
  }
}

TEST(Binomial, Values) {
  EXPECT_EQ(binomial(5, 2), 10);
  EXPECT_EQ(binomial(21, 10), 352716);
  EXPECT_EQ(binomial(4, -1), 0);
  EXPECT_EQ(binomial(4, 5), 0);
  EXPECT_EQ(binomial(0, 0), 1);
}

TEST(Bargmann, TrivialAtTimeZero) {
  const auto model = opo_model(0.0, 0.2, 1.0, 0.5);
  EXPECT_NEAR(std::abs(bargmann_invariant(model, {0.3, -0.1, 0.7}, 0.0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(lambda_purity(model, 0.0, 0.0), 2.0, 1e-15);
}

TEST(Bargmann, PurityIsRealAndBounded) {
  for (double eta : {1.0, 0.5}) {
    const auto model = opo_model(0.0, 0.2, 1.0, eta);
    for (int copies : {2, 3, 5}) {
      const cplx b = bargmann_invariant(model, std::vector<double>(copies, 0.1), 1.5);
      EXPECT_LT(std::abs(b.imag()), 1e-9);
      EXPECT_GT(b.real(), 0.0);
      EXPECT_LE(b.real(), 1.0);
    }
    EXPECT_LT(lambda_purity(model, 0.0, 1.0), 2.0);
  }
}

TEST(Bargmann, CyclicInvariance) {
  const auto model = opo_model(0.2, 0.2, 1.0, 0.6);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> th{u(rng), u(rng), u(rng), u(rng)};
    const cplx b = bargmann_invariant(model, th, 1.0);
    std::rotate(th.begin(), th.begin() + 1, th.end());
    EXPECT_LT(std::abs(bargmann_invariant(model, th, 1.0) - b), 1e-9);
  }
}

TEST(Bargmann, ThreeReplicasMatchOracle) {
  const auto model = opo_model(0.0, 0.2, 1.0, 0.5);
  const double th = 0.1, t = 1.0;
  // dim 10 keeps the top-level weight ~5e-8, well inside the leakage monitor
  const int dim = 10;
  oracle::OracleConfig cfg;
  cfg.initial_dt = 0.05;
  const auto r = oracle::build_quadrature_ops(dim, 3);
  std::vector<oracle::ModelOperators> ops;
  for (int al = 0; al < 3; ++al)
    ops.push_back(oracle::model_operators(model.at(th), {r[2 * al], r[2 * al + 1]}));
  const auto mu =
      oracle::evolve_superoperator(oracle::replica_action(ops), oracle::TruncatedOperator::vacuum(dim, 3), t, cfg);
  EXPECT_NEAR(std::abs(bargmann_invariant(model, {th, th, th}, t) - mu.matrix.trace()), 0.0, 1e-5);
}

TEST(Bargmann, PurityMatchesOracle) {
  const auto model = opo_model(0.0, 0.2, 1.0, 0.5);
  const double t = 1.0;
  const int dim = 20;
  const auto r = oracle::build_quadrature_ops(dim, 2);
  std::vector<oracle::ModelOperators> ops;
  for (int al = 0; al < 2; ++al) ops.push_back(oracle::model_operators(model.at(0.0), {r[2 * al], r[2 * al + 1]}));
  const auto mu =
      oracle::evolve_superoperator(oracle::replica_action(ops), oracle::TruncatedOperator::vacuum(dim, 2), t);
  EXPECT_NEAR(lambda_purity(model, 0.0, t), 2.0 * std::sqrt(mu.matrix.trace().real()), 1e-4);
}

TEST(Bargmann, Guards) {
  const auto model = opo_model(0.0, 0.2, 1.0);
  ReplicaConfig cfg;
  cfg.max_replicas = 4;
  auto code = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("none");
  };
  EXPECT_EQ(code([&] { bargmann_invariant(model, {0, 0, 0, 0, 0}, 1.0, cfg); }), "replica_cap_exceeded");
  EXPECT_EQ(code([&] { bargmann_invariant(model, {0}, 1.0, cfg); }), "invalid_replicas");
  EXPECT_EQ(code([&] { replica_qfi_series(model, 0.0, 1.0, 3, quiet(), cfg); }), "replica_cap_exceeded");
  EXPECT_EQ(code([&] { replica_qfi_series(model, 0.0, 1.0, -1, quiet(), cfg); }), "invalid_parameter");
}

// Exact finite-dimensional family rho(theta) = U rho0 U^dag, U = exp(-i theta G).
// The approximant must equal the spectral sum
// sum_ij 2|d rho_ij|^2/(p_i+p_j) [1 - (1 - (p_i+p_j)/Lambda)^{N+1}].
TEST(ReplicaSeries, MatchesSpectralSumOnExactFamily) {
  CMat gen(3, 3);
  gen << 0.3, 0.5, kI * 0.2, 0.5, -0.1, 0.7, -kI * 0.2, 0.7, 0.4;
  CMat basis(3, 3);
  basis << 1, 0.2, 0, 0.2, 1, 0.1, 0, 0.1, 1;
  const CMat q = Eigen::HouseholderQR<CMat>(basis).householderQ();
  const CVec p0 = (CVec(3) << 0.9, 0.09, 0.01).finished();
  const CMat rho = q * p0.asDiagonal() * q.adjoint();
  const CMat drho = -kI * (gen * rho - rho * gen);

  // d(rho^a) = sum_r rho^r drho rho^{a-1-r}
  auto power = [&](int a) {
    CMat out = CMat::Identity(3, 3);
    for (int i = 0; i < a; ++i) out = out * rho;
    return out;
  };
  auto dpower = [&](int a) {
    CMat out = CMat::Zero(3, 3);
    for (int r = 0; r < a; ++r) out += power(r) * drho * power(a - 1 - r);
    return out;
  };
  const int order = 20;
  std::vector<double> f;
  for (int m = 0; m <= order; ++m) {
    cplx acc = 0.0;
    for (int l = 0; l <= m; ++l)
      acc += static_cast<double>(dlm_coefficient(m, l)) * (dpower(l + 1) * dpower(m - l + 1)).trace();
    EXPECT_LT(std::abs(acc.imag()), 1e-12);
    f.push_back(acc.real());
  }
  const double lam = 2.0 * std::sqrt((rho * rho).trace().real());

  Eigen::SelfAdjointEigenSolver<CMat> es(rho);
  const CMat dm = es.eigenvectors().adjoint() * drho * es.eigenvectors();
  const RVec p = es.eigenvalues();
  double previous = 0.0;
  for (int n = 0; n <= order; ++n) {
    double spectral = 0.0, full = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double s = p(i) + p(j);
        const double w = 2.0 * std::norm(dm(i, j)) / s;
        full += w;
        spectral += w * (1.0 - std::pow(1.0 - s / lam, n + 1));
      }
    const double approx = replica_series(n, lam, f);
    EXPECT_NEAR(approx, spectral, 1e-9 * full) << "N=" << n;
    EXPECT_LE(approx, full);
    EXPECT_GE(approx, previous);
    previous = approx;
  }
}

TEST(ReplicaQfi, VanishesAtShortTime) {
  const auto res = replica_qfi_series(opo_model(0.0, 0.2, 1.0, 0.5), 0.0, 1e-4, 10, quiet());
  for (double q : res.approximants) EXPECT_LE(q, 1e-4);
}

TEST(ReplicaQfi, IncreasesInOrderAndStaysBelowJointBound) {
  const auto model = opo_model(0.0, 0.2, 1.0, 0.5);
  const double t = 1.0;
  const auto res = replica_qfi_series(model, 0.0, t, 10, quiet());
  for (std::size_t n = 1; n < res.approximants.size(); ++n)
    EXPECT_GE(res.approximants[n], res.approximants[n - 1] - 1e-10) << n;
  for (double fi : res.f_imag) EXPECT_LT(std::abs(fi), 1e-6);
  const double joint = joint_qfi(opo_model(0.0, 0.2, 1.0, 1.0), 0.0, t, quiet());
  EXPECT_LE(res.approximants.back(), joint);
}

TEST(ReplicaQfi, PerfectDetectionApproachesEnvironmentQfi) {
  const auto model = opo_model(0.0, 0.2, 1.0, 1.0);
  const double t = 1.0;
  const double q10 = replica_qfi_approximant(model, 0.0, t, 10, quiet());
  const double env = env_qfi(model, 0.0, t, quiet());
  EXPECT_LE(q10, env);
  EXPECT_GT(q10 / env, 0.95);
}

}  // namespace
}  // namespace gme
