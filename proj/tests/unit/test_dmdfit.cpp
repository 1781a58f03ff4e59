// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/error.hpp"
#include "koopdmd/koopstep.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace koopdmd;

namespace {

struct KnownOperator {
  Eigen::MatrixXd K;
  std::vector<std::complex<double>> eigenvalues;
};

// Real operator with prescribed conjugate-pair spectrum, conjugated by a random basis.
KnownOperator known_operator(Eigen::Index pairs, std::uint64_t seed, double max_modulus = 0.99) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mod(0.8, max_modulus);
  std::uniform_real_distribution<double> ang(0.05, 2.5);
  const Eigen::Index d = 2 * pairs;
  Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(d, d);
  KnownOperator out;
  for (Eigen::Index p = 0; p < pairs; ++p) {
    const std::complex<double> l = std::polar(mod(rng), ang(rng));
    blocks.block<2, 2>(2 * p, 2 * p) << l.real(), -l.imag(), l.imag(), l.real();
    out.eigenvalues.push_back(l);
    out.eigenvalues.push_back(std::conj(l));
  }
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(d, d) + 0.3 * Eigen::MatrixXd(ktest::random_vector(d * d, rng).reshaped(d, d));
  out.K = V * blocks * V.inverse();
  return out;
}

double spectrum_distance(const Eigen::VectorXcd& fitted, const std::vector<std::complex<double>>& truth) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < fitted.size(); ++i) {
    double best = 1e300;
    for (const auto& t : truth) best = std::min(best, std::abs(fitted[i] - t));
    worst = std::max(worst, best);
  }
  return worst;
}

SnapshotSet trajectory(const Eigen::MatrixXd& K, const Eigen::VectorXd& x0, std::size_t steps, double h,
                       const std::vector<ForceLift>& forcing = {}) {
  SnapshotSet s;
  s.h = h;
  Eigen::VectorXd x = x0;
  s.states.emplace_back(x);
  for (std::size_t t = 0; t < steps; ++t) {
    x = forcing.empty() ? Eigen::VectorXd(K * x) : Eigen::VectorXd(K * (x + forcing[t].values()));
    s.states.emplace_back(x);
  }
  s.forcing = forcing;
  return s;
}

FitOptions exact() {
  FitOptions o;
  o.rank = RankPolicy::with_energy(1.0);
  o.clamp_unit_disk = false;
  return o;
}

}  // namespace

TEST(DmdFit, OscillatorRecoversBackwardEulerEigenvalues) {
  for (double h : {0.05, 0.1, 0.3}) {
    const FitResult f = ktest::oscillator_fit(h);
    // Isotropic linear spring: the x motion alone is excited.
    ASSERT_EQ(f.model.rank(), 2);
    const std::complex<double> truth(1.0 / (1.0 + h * h), h / (1.0 + h * h));
    EXPECT_LT(spectrum_distance(f.model.eigenvalues(), {truth, std::conj(truth)}), 1e-12);
    EXPECT_LT(f.report.relative_step_residual, 1e-12);
  }
}

TEST(DmdFit, ExplicitMatricesRecoverKnownSpectrum) {
  const KnownOperator op = known_operator(6, 11);
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd X = ktest::random_vector(12 * 40, rng).reshaped(12, 40);
  const FitResult f = fit_matrices(X, op.K * X, 0.1, exact());
  EXPECT_EQ(f.model.rank(), 12);
  EXPECT_LT(spectrum_distance(f.model.eigenvalues(), op.eigenvalues), 1e-10);
  const Eigen::VectorXd x = ktest::random_vector(12, rng);
  EXPECT_LT((step(f.model, x) - op.K * x).norm(), 1e-10 * x.norm());
}

TEST(DmdFit, TrajectoryFitRecoversKnownSpectrum) {
  const KnownOperator op = known_operator(3, 21, 0.97);
  std::mt19937_64 rng(8);
  const SnapshotSet s = trajectory(op.K, ktest::random_vector(6, rng), 30, 0.2);
  const FitResult f = fit(s, exact());
  EXPECT_EQ(f.model.rank(), 6);
  EXPECT_LT(spectrum_distance(f.model.eigenvalues(), op.eigenvalues), 1e-9);
}

TEST(DmdFit, ForcedFitSeparatesOperatorFromInput) {
  const KnownOperator op = known_operator(3, 31, 0.95);
  std::mt19937_64 rng(9);
  std::vector<ForceLift> forcing;
  for (int t = 0; t < 40; ++t) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(6);
    f.tail(3) = ktest::random_vector(3, rng, 0.1);
    forcing.emplace_back(f, 0.2);
  }
  const SnapshotSet s = trajectory(op.K, Eigen::VectorXd::Zero(6), 40, 0.2, forcing);
  const FitResult f = fit(s, exact());
  EXPECT_LT(spectrum_distance(f.model.eigenvalues(), op.eigenvalues), 1e-9);
  EXPECT_LT(f.report.relative_step_residual, 1e-10);

  // Ignoring the forcing column shift leaves a visible residual.
  SnapshotSet unforced = s;
  unforced.forcing.clear();
  EXPECT_GT(fit(unforced, exact()).report.relative_step_residual, 1e-3);
}

TEST(DmdFit, EigenvaluesAreSortedAndPairedPositiveImaginaryFirst) {
  const KnownOperator op = known_operator(5, 41);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = ktest::random_vector(10 * 30, rng).reshaped(10, 30);
  const Eigen::VectorXcd l = fit_matrices(X, op.K * X, 0.1, exact()).model.eigenvalues();
  for (Eigen::Index i = 0; i + 1 < l.size(); ++i) EXPECT_GE(std::abs(l[i]) + 1e-12, std::abs(l[i + 1]));
  for (Eigen::Index i = 0; i + 1 < l.size(); i += 2) {
    EXPECT_GT(l[i].imag(), 0.0);
    EXPECT_NEAR(std::abs(l[i + 1] - std::conj(l[i])), 0.0, 1e-12);
  }
}

TEST(DmdFit, RankPolicies) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = ktest::random_vector(8 * 20, rng).reshaped(8, 20);
  const KnownOperator op = known_operator(4, 51);
  EXPECT_EQ(fit_matrices(X, op.K * X, 0.1, FitOptions{RankPolicy::fixed(3), false}).model.rank(), 3);

  // Energy rank: the smallest r whose cumulative sigma^2 reaches the target.
  const TruncatedSvd full = truncated_svd(X, RankPolicy::with_energy(1.0));
  ASSERT_EQ(full.all_sigma.size(), 8);
  const double total = full.all_sigma.squaredNorm();
  for (double e : {0.5, 0.9, 0.99}) {
    std::size_t expect = 0;
    double acc = 0.0;
    while (acc < e * total) {
      const double s = full.all_sigma[static_cast<Eigen::Index>(expect)];
      acc += s * s;
      ++expect;
    }
    EXPECT_EQ(static_cast<std::size_t>(truncated_svd(X, RankPolicy::with_energy(e)).sigma.size()), expect) << e;
  }

  // Fixed ranks never keep singular values at the noise floor.
  Eigen::MatrixXd low = X;
  low.bottomRows(4).setZero();
  EXPECT_EQ(truncated_svd(low, RankPolicy::fixed(8)).sigma.size(), 4);
}

TEST(DmdFit, ClampingMovesGrowingModesOntoTheUnitCircle) {
  Eigen::MatrixXd K(2, 2);
  K << 1.02, -0.1, 0.1, 1.02;
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd X = ktest::random_vector(2 * 10, rng).reshaped(2, 10);
  FitOptions clamp = exact();
  clamp.clamp_unit_disk = true;
  const FitResult f = fit_matrices(X, K * X, 0.1, clamp);
  EXPECT_EQ(f.report.clamped_count, 2u);
  EXPECT_NEAR(f.report.max_abs_eigenvalue_raw, std::abs(std::complex<double>(1.02, 0.1)), 1e-12);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(f.model.eigenvalues()[i]), 1.0, 1e-14);
  EXPECT_NEAR(std::arg(f.model.eigenvalues()[0]), std::atan2(0.1, 1.02), 1e-12);
  EXPECT_GT(std::abs(fit_matrices(X, K * X, 0.1, exact()).model.eigenvalues()[0]), 1.0);
}

TEST(DmdFit, ReconstructionIsExactInsideTheModeSpan) {
  const FitResult f = ktest::oscillator_fit();
  const SnapshotSet s = ktest::oscillator_data();
  for (std::size_t t : {1u, 17u, 60u}) {
    EXPECT_LT(reconstruction_error(f.model, s.states[t].values()), 1e-12);
  }
  EXPECT_EQ(reconstruction_error(f.model, Eigen::VectorXd::Zero(12)), 0.0);
}

TEST(DmdFit, DataErrors) {
  const auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Usage;
  };
  SnapshotSet one;
  one.h = 0.1;
  one.states.emplace_back(Eigen::VectorXd::Ones(6));
  EXPECT_EQ(code_of([&] { fit(one); }), ErrorCode::InsufficientData);

  SnapshotSet zeros = one;
  zeros.states = {LiftedState(1), LiftedState(1), LiftedState(1)};
  EXPECT_EQ(code_of([&] { fit(zeros); }), ErrorCode::DegenerateData);

  SnapshotSet mixed = one;
  mixed.states.emplace_back(Eigen::VectorXd::Ones(12));
  EXPECT_EQ(code_of([&] { fit(mixed); }), ErrorCode::Dimension);

  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(6, 6);
  EXPECT_EQ(code_of([&] { fit_matrices(X, X, 0.0); }), ErrorCode::Domain);
  EXPECT_EQ(code_of([&] { fit_matrices(X, X, 0.1, FitOptions{RankPolicy::fixed(0), true}); }), ErrorCode::Domain);
  EXPECT_EQ(code_of([&] { fit_matrices(X, X, 0.1, FitOptions{RankPolicy::with_energy(1.5), true}); }), ErrorCode::Domain);
  EXPECT_EQ(code_of([&] { fit_matrices(X, Eigen::MatrixXd::Identity(6, 5), 0.1); }), ErrorCode::Dimension);
}

TEST(DmdFit, ModelRejectsInconsistentParts) {
  const FitResult f = ktest::oscillator_fit();
  EXPECT_THROW(f.model.with_eigenvalues(Eigen::VectorXcd::Ones(5), 0.1), Error);
  EXPECT_THROW(f.model.with_eigenvalues(f.model.eigenvalues(), -1.0), Error);
}
