// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_REFSIM_HPP
#define KOOPDMD_REFSIM_HPP

#include "koopdmd/snapshot.hpp"
#include "koopdmd/statespace.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace koopdmd {

struct Spring {
  std::size_t i = 0;
  std::size_t j = 0;
  double rest_length = 0.0;
  double stiffness = 0.0;
};

enum class SpringLaw {
  /// f = -k (|d| - L) d / |d|
  Nonlinear,
  /// f = -k (d - d_rest); the one-step map is exactly linear.
  Linearized,
};

/// Full-space mass-spring body.
struct ElasticModel {
  Eigen::MatrixX3d rest_positions;
  std::vector<Spring> springs;
  Eigen::VectorXd vertex_masses;
  std::vector<std::size_t> fixed_vertices;
  Eigen::Vector3d gravity = Eigen::Vector3d::Zero();
  SpringLaw law = SpringLaw::Nonlinear;

  std::size_t n_vertices() const noexcept { return static_cast<std::size_t>(rest_positions.rows()); }
  bool is_fixed(std::size_t v) const;

  /// Sorts the fixed set and checks every invariant; throws Error(Domain) on violation.
  void validate();

  /// Adds a spring whose rest length is taken from the rest positions.
  void add_spring(std::size_t i, std::size_t j, double stiffness);
};

struct FullState {
  Eigen::MatrixX3d positions;
  Eigen::MatrixX3d velocities;
  double time = 0.0;
};

struct NewtonOptions {
  double tolerance = 1e-9;
  int max_iterations = 50;
};

FullState rest_state(const ElasticModel& model);

/// Positions rest + u and velocities momentum / h.
FullState to_full_state(const ElasticModel& model, const LiftedState& x, double h);

/// Internal spring forces at `positions`, flattened to 3n.
Eigen::VectorXd internal_forces(const ElasticModel& model, const Eigen::MatrixX3d& positions);

/// One backward-Euler step solved by Newton on the incremental potential.
/// `f_ext` holds external forces in newtons (n x 3); gravity is added from the model.
FullState implicit_euler_step(const ElasticModel& model, const FullState& s, double h,
                              const Eigen::MatrixX3d& f_ext, const NewtonOptions& opts = {});

/// External force schedule: forces (n x 3, newtons) applied on step `step` -> `step + 1`.
using ForceSchedule = std::function<Eigen::MatrixX3d(std::size_t step, const FullState& state)>;

/// Runs `steps` implicit-Euler steps from `s0` and records steps+1 lifted
/// frames (displacements relative to rest) plus the lifted force of every step.
SnapshotSet simulate_trajectory(const ElasticModel& model, const FullState& s0, double h,
                                std::size_t steps, const ForceSchedule& forcing = {},
                                const NewtonOptions& opts = {});

/// Per-unit-mass lifted force of a step: [0; (g + f_ext / m) h^2], zero on fixed vertices.
ForceLift lifted_step_force(const ElasticModel& model, const Eigen::MatrixX3d& f_ext, double h);

double kinetic_energy(const LiftedState& x, const Eigen::Ref<const Eigen::VectorXd>& masses, double h);

}  // namespace koopdmd

#endif
