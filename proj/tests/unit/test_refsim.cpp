// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/error.hpp"
#include "koopdmd/refsim.hpp"
#include "koopdmd/scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace koopdmd;

namespace {

// Backward Euler on x'' = -w^2 x: x1 = (x + h v) / (1 + h^2 w^2), v1 = (x1 - x) / h.
std::pair<double, double> oscillator_oracle(double x, double v, double w2, double h) {
  const double x1 = (x + h * v) / (1.0 + h * h * w2);
  return {x1, (x1 - x) / h};
}

}  // namespace

TEST(Refsim, LinearOscillatorMatchesClosedFormBackwardEuler) {
  for (double k : {1.0, 4.0, 25.0}) {
    for (double h : {0.01, 0.1, 0.5}) {
      const Mesh mesh = make_oscillator(k, 2.0);
      FullState s = rest_state(mesh.model);
      s.positions(1, 0) += 0.3;
      s.velocities(1, 0) = -0.7;
      double x = 0.3;
      double v = -0.7;
      for (int t = 0; t < 20; ++t) {
        s = implicit_euler_step(mesh.model, s, h, Eigen::MatrixX3d::Zero(2, 3));
        std::tie(x, v) = oscillator_oracle(x, v, k / 2.0, h);
        ASSERT_NEAR(s.positions(1, 0) - mesh.model.rest_positions(1, 0), x, 1e-12);
        ASSERT_NEAR(s.velocities(1, 0), v, 1e-11);
      }
    }
  }
}

TEST(Refsim, FixedVerticesNeverMove) {
  const Mesh mesh = make_chain();
  FullState s = rest_state(mesh.model);
  s.velocities.setConstant(0.5);
  for (int t = 0; t < 10; ++t) s = implicit_euler_step(mesh.model, s, 0.1, Eigen::MatrixX3d::Zero(10, 3));
  EXPECT_EQ(Eigen::RowVector3d(s.positions.row(0)), Eigen::RowVector3d(mesh.model.rest_positions.row(0)));
  EXPECT_TRUE(s.velocities.row(0).isZero(0.0));
}

TEST(Refsim, RestIsAnEquilibriumWithoutLoad) {
  const Mesh mesh = make_strip();
  const FullState s = implicit_euler_step(mesh.model, rest_state(mesh.model), 0.01,
                                          Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(mesh.model.n_vertices()), 3));
  EXPECT_TRUE(s.positions.isApprox(mesh.model.rest_positions, 1e-14));
}

TEST(Refsim, LinearizedHangingOscillatorSettlesAtStaticSag) {
  Mesh mesh = make_oscillator(4.0, 1.0);
  mesh.model.gravity = Eigen::Vector3d(-9.81, 0.0, 0.0);
  FullState s = rest_state(mesh.model);
  for (int t = 0; t < 400; ++t) s = implicit_euler_step(mesh.model, s, 0.2, Eigen::MatrixX3d::Zero(2, 3));
  EXPECT_NEAR(s.positions(1, 0) - mesh.model.rest_positions(1, 0), -9.81 / 4.0, 1e-9);
}

TEST(Refsim, NonlinearSpringEnergyDecaysUnderBackwardEuler) {
  const Mesh mesh = make_strip();
  FullState s = impulse_state(mesh.model, tip_vertices(mesh.model), Eigen::Vector3d(0.0, 2.0, 0.0));
  const auto ke = [&](const FullState& f) {
    double e = 0.0;
    for (Eigen::Index v = 0; v < f.velocities.rows(); ++v) e += 0.5 * mesh.model.vertex_masses[v] * f.velocities.row(v).squaredNorm();
    return e;
  };
  const double e0 = ke(s);
  double pot_and_kin_late = 0.0;
  for (int t = 0; t < 300; ++t) s = implicit_euler_step(mesh.model, s, 0.01, Eigen::MatrixX3d::Zero(s.positions.rows(), 3));
  pot_and_kin_late = ke(s);
  EXPECT_LT(pot_and_kin_late, e0);
  EXPECT_TRUE(s.positions.allFinite());
}

TEST(Refsim, SimulateTrajectoryRecordsLiftedFramesRelativeToRest) {
  const Mesh mesh = make_oscillator();
  FullState s0 = rest_state(mesh.model);
  s0.velocities(1, 0) = 1.0;
  const double h = 0.1;
  const SnapshotSet data = simulate_trajectory(mesh.model, s0, h, 5);
  ASSERT_EQ(data.num_frames(), 6u);
  EXPECT_EQ(data.h, h);
  EXPECT_TRUE(data.states[0].displacement().isZero(0.0));
  EXPECT_NEAR(data.states[0].momentum()[3], h * 1.0, 1e-15);
  double x = 0.0;
  double v = 1.0;
  for (std::size_t t = 1; t < data.num_frames(); ++t) {
    const double x_prev = x;
    std::tie(x, v) = oscillator_oracle(x, v, 1.0, h);
    EXPECT_NEAR(data.states[t].displacement()[3], x, 1e-13);
    EXPECT_NEAR(data.states[t].momentum()[3], x - x_prev, 1e-13);
  }
}

TEST(Refsim, ToFullStateDividesMomentumByStep) {
  const Mesh mesh = make_oscillator();
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(12);
  raw[3] = 0.2;
  raw[9] = 0.05;
  const FullState s = to_full_state(mesh.model, LiftedState(raw), 0.1);
  EXPECT_NEAR(s.positions(1, 0), mesh.model.rest_positions(1, 0) + 0.2, 1e-15);
  EXPECT_NEAR(s.velocities(1, 0), 0.5, 1e-15);
}

TEST(Refsim, LiftedStepForceIsPerUnitMassAndSkipsFixedVertices) {
  Mesh mesh = make_oscillator(1.0, 2.0);
  mesh.model.gravity = Eigen::Vector3d(0.0, -1.0, 0.0);
  Eigen::MatrixX3d f = Eigen::MatrixX3d::Zero(2, 3);
  f(1, 0) = 4.0;
  f(0, 0) = 100.0;
  const ForceLift F = lifted_step_force(mesh.model, f, 0.5);
  ASSERT_EQ(F.values().size(), 12);
  EXPECT_TRUE(F.values().head(6).isZero(0.0));
  EXPECT_TRUE(F.values().segment<3>(6).isZero(0.0));
  EXPECT_DOUBLE_EQ(F.values()[9], 0.25 * 2.0);
  EXPECT_DOUBLE_EQ(F.values()[10], -0.25);
}

TEST(Refsim, RejectsBadStepAndShapes) {
  const Mesh mesh = make_oscillator();
  const FullState s = rest_state(mesh.model);
  EXPECT_THROW(implicit_euler_step(mesh.model, s, 0.0, Eigen::MatrixX3d::Zero(2, 3)), Error);
  try {
    implicit_euler_step(mesh.model, s, 0.1, Eigen::MatrixX3d::Zero(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Dimension);
  }
}

TEST(Refsim, NewtonIterationCapRaisesConvergenceError) {
  const Mesh mesh = make_strip();
  const FullState s = impulse_state(mesh.model, tip_vertices(mesh.model), Eigen::Vector3d(0.0, 50.0, 0.0));
  NewtonOptions opts;
  opts.max_iterations = 0;
  opts.tolerance = 1e-30;
  try {
    implicit_euler_step(mesh.model, s, 0.05, Eigen::MatrixX3d::Zero(s.positions.rows(), 3), opts);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Convergence);
    EXPECT_GT(e.residual(), 0.0);
  }
}
