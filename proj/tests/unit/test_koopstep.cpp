// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/error.hpp"
#include "koopdmd/koopstep.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace koopdmd;

namespace {

const FitResult& strip() {
  static const FitResult f = ktest::strip_fit();
  return f;
}

Eigen::VectorXd strip_state(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ktest::random_vector(strip().model.dim(), rng, 1e-3);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Usage;
}

}  // namespace

TEST(KoopStep, StepMatchesDensePseudoInverseOracle) {
  const KoopmanModel& m = strip().model;
  const Eigen::VectorXd x = strip_state(1);
  const Eigen::MatrixXcd& phi = m.modes();
  const Eigen::VectorXcd z = phi.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(x.cast<std::complex<double>>());
  const Eigen::VectorXd oracle = (phi * m.eigenvalues().asDiagonal() * z).real();
  EXPECT_LT((step(m, x) - oracle).norm(), 1e-10 * oracle.norm());
}

TEST(KoopStep, MultiStepEqualsRepeatedSteps) {
  const KoopmanModel& m = strip().model;
  const Eigen::VectorXd x = strip_state(2);
  Eigen::VectorXd seq = x;
  for (int n = 1; n <= 20; ++n) {
    seq = step(m, seq);
    EXPECT_LT((multi_step(m, x, n) - seq).norm(), 1e-9 * x.norm()) << n;
  }
}

TEST(KoopStep, ZeroStepsReconstructsAndHalfStepsCompose) {
  const KoopmanModel& m = strip().model;
  const Eigen::VectorXd x = step(m, strip_state(3));
  EXPECT_LT((multi_step(m, x, 0.0) - reconstruct(m, LiftedState(x)).values()).norm(), 1e-12 * x.norm());
  const Eigen::VectorXd half = multi_step(m, x, 0.5);
  const Eigen::VectorXd full = multi_step(m, x, 1.0);
  EXPECT_LT((multi_step(m, half, 0.5) - full).norm(), 1e-8 * x.norm());
}

TEST(KoopStep, RescaleComposesWithStepping) {
  const KoopmanModel& m = strip().model;
  const Eigen::VectorXd x = strip_state(4);
  const KoopmanModel doubled = rescale_timestep(m, 2.0 * m.h());
  EXPECT_DOUBLE_EQ(doubled.h(), 2.0 * m.h());
  EXPECT_LT((step(doubled, x) - step(m, step(m, x))).norm(), 1e-9 * x.norm());
  const KoopmanModel back = rescale_timestep(doubled, m.h());
  EXPECT_LT((back.eigenvalues() - m.eigenvalues()).norm(), 1e-12);
  const KoopmanModel tenth = rescale_timestep(m, 0.1 * m.h());
  EXPECT_LT((multi_step(tenth, x, 10.0) - step(m, x)).norm(), 1e-9 * x.norm());
}

TEST(KoopStep, RescaleKeepsConjugatePairs) {
  const Eigen::VectorXcd l = rescale_timestep(strip().model, 0.037).eigenvalues();
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (l[i].imag() > 0.0) {
      ASSERT_LT(i + 1, l.size());
      EXPECT_LT(std::abs(l[i + 1] - std::conj(l[i])), 1e-13);
      ++i;
    }
  }
}

TEST(KoopStep, RescaleErrors) {
  const KoopmanModel& m = strip().model;
  EXPECT_EQ(code_of([&] { rescale_timestep(m, 0.0); }), ErrorCode::Domain);
  Eigen::VectorXcd l = m.eigenvalues();
  l[l.size() - 1] = 0.0;
  const KoopmanModel singular = m.with_eigenvalues(l, m.h());
  EXPECT_EQ(code_of([&] { rescale_timestep(singular, 0.01); }), ErrorCode::SingularLog);
}

TEST(KoopStep, RealifiedPowersMatchLoopAndComplexPath) {
  const KoopmanModel& m = strip().model;
  const RealOperator op = realify(m);
  EXPECT_EQ(op.rank(), m.rank());
  Eigen::MatrixXd loop = Eigen::MatrixXd::Identity(op.k_real().rows(), op.k_real().cols());
  for (std::uint64_t n = 1; n <= 37; ++n) {
    loop = op.k_real() * loop;
    if (n == 1 || n == 8 || n == 37) EXPECT_LT((op.power(n) - loop).norm(), 1e-11 * (1.0 + loop.norm())) << n;
  }
  const Eigen::VectorXd x = strip_state(5);
  for (std::uint64_t n : {1u, 5u, 64u, 1000u}) {
    const RealStepResult r = real_multi_step_detail(op, m, x, n);
    EXPECT_LT((r.state - multi_step(m, x, static_cast<double>(n))).norm(), 1e-9 * x.norm()) << n;
    EXPECT_LT(r.imaginary_residue, 1e-9 * x.norm());
  }
  EXPECT_EQ(op.power(0), Eigen::MatrixXd::Identity(op.k_real().rows(), op.k_real().cols()));
}

TEST(KoopStep, RealifiedStepDropsAsymmetricImaginaryDrift) {
  const KoopmanModel& m = strip().model;
  Eigen::VectorXcd l = m.eigenvalues();
  for (Eigen::Index i = 0; i < l.size(); ++i) l[i] += std::complex<double>(0.0, 1e-2);
  const KoopmanModel drifted = m.with_eigenvalues(l, m.h());
  const Eigen::VectorXd x = strip_state(6);
  const auto op = drifted.real_operator();
  const Eigen::VectorXd reference = multi_step(m, x, 200.0);
  const double real_err = (real_multi_step(*op, drifted, x, 200) - reference).norm();
  const double complex_err = (multi_step(drifted, x, 200.0) - reference).norm();
  EXPECT_LT(real_err, complex_err);
}

TEST(KoopStep, CachedRealOperatorIsSharedPerModelValue) {
  const KoopmanModel& m = strip().model;
  EXPECT_EQ(m.real_operator().get(), m.real_operator().get());
  const KoopmanModel other = apply_damping(m, 0.1);
  EXPECT_NE(other.real_operator().get(), m.real_operator().get());
  const RealOperator before = realify(m, ProjectionOrder::BeforePropagation);
  EXPECT_EQ(before.order(), ProjectionOrder::BeforePropagation);
  EXPECT_EQ(code_of([&] { real_multi_step(realify(ktest::oscillator_fit().model), m, strip_state(1), 1); }),
            ErrorCode::Dimension);
}

TEST(KoopStep, DampingScalesEigenvalues) {
  const KoopmanModel& m = strip().model;
  const KoopmanModel d = apply_damping(m, 0.25);
  EXPECT_LT((d.eigenvalues() - 0.75 * m.eigenvalues()).norm(), 1e-15);
  EXPECT_EQ(apply_damping(m, 0.0).eigenvalues(), m.eigenvalues());
  EXPECT_EQ(code_of([&] { apply_damping(m, 1.0); }), ErrorCode::Domain);
  EXPECT_EQ(code_of([&] { apply_damping(m, -0.1); }), ErrorCode::Domain);
}

TEST(KoopStep, ForcedStepChecksStepSizeAndShape) {
  const FitResult f = ktest::oscillator_fit(0.1);
  const LiftedState x(2);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(6);
  acc[3] = 1.0;
  const LiftedState y = step_forced(f.model, x, lift_force(acc, 0.1));
  EXPECT_LT((y.values() - step(f.model, lift_force(acc, 0.1).values())).norm(), 1e-15);
  EXPECT_EQ(code_of([&] { step_forced(f.model, x, lift_force(acc, 0.2)); }), ErrorCode::StepSize);
  EXPECT_EQ(code_of([&] { step_forced(f.model, x, lift_force(Eigen::VectorXd::Zero(3), 0.1)); }), ErrorCode::Dimension);
  EXPECT_EQ(code_of([&] { multi_step(f.model, x.values(), -1.0); }), ErrorCode::Domain);
}

TEST(KoopStep, PropagatorSumSpecialValues) {
  EXPECT_EQ(propagator_sum(std::complex<double>(1.0, 0.0), 7), std::complex<double>(7.0, 0.0));
  EXPECT_EQ(propagator_sum(std::complex<double>(0.0, 0.0), 7), std::complex<double>(0.0, 0.0));
  EXPECT_EQ(propagator_sum(std::complex<double>(0.3, 0.2), 0), std::complex<double>(0.0, 0.0));
  const std::complex<double> l(0.5, 0.0);
  EXPECT_NEAR(std::abs(propagator_sum(l, 3) - (0.5 + 0.25 + 0.125)), 0.0, 1e-16);
  const std::complex<double> i(0.0, 1.0);
  EXPECT_LT(std::abs(propagator_sum(i, 4)), 1e-15);
  EXPECT_EQ(code_of([&] { propagator_sum(strip().model, 0); }), ErrorCode::Domain);
}

TEST(KoopStep, PropagatorSumMatchesLoopNearOne) {
  for (double eps : {1e-14, 1e-11, 1e-8, 1e-5, 1e-3}) {
    for (double angle : {0.0, 1.0, 2.0, 3.0}) {
      const std::complex<double> l = 1.0 + std::polar(eps, angle);
      for (std::uint64_t n : {1u, 2u, 50u, 5000u}) {
        std::complex<long double> p(1.0L, 0.0L);
        std::complex<long double> sum(0.0L, 0.0L);
        for (std::uint64_t t = 0; t < n; ++t) {
          p *= std::complex<long double>(l.real(), l.imag());
          sum += p;
        }
        const std::complex<double> brute(static_cast<double>(sum.real()), static_cast<double>(sum.imag()));
        EXPECT_LT(std::abs(propagator_sum(l, n) - brute), 1e-12 * std::abs(brute)) << eps << " " << n;
      }
    }
  }
}
