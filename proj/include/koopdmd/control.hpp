// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_CONTROL_HPP
#define KOOPDMD_CONTROL_HPP

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/mesh_io.hpp"
#include "koopdmd/nnls.hpp"
#include "koopdmd/refsim.hpp"
#include "koopdmd/statespace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace koopdmd {

/// A goal displacement for one vertex; expands to three selected DOFs.
struct VertexGoal {
  std::size_t vertex = 0;
  Eigen::Vector3d displacement = Eigen::Vector3d::Zero();
};

/// Quasi-static goal: S X_final = X_goal after `horizon` steps of constant pressure.
struct ControlProblem {
  std::vector<Chamber> chambers;
  /// Row i of S picks lifted-state DOF selected_dofs[i].
  std::vector<Eigen::Index> selected_dofs;
  Eigen::VectorXd goal;
  std::uint64_t horizon = 1;
  int iterations = 5;
  double momentum_weight = 1.0;

  /// Throws Error(Domain) unless k >= 1, horizon >= 1 and S matches the goal.
  void validate(Eigen::Index state_dim) const;

  static ControlProblem for_vertex_goals(std::vector<Chamber> chambers, const std::vector<VertexGoal>& goals,
                                         std::uint64_t horizon, int iterations = 5, double momentum_weight = 1.0);
};

/// Lifted force per unit chamber pressure: 6n x k, zero displacement block.
struct PressureForceMap {
  Eigen::MatrixXd A;
};

/// Newton forces (n x 3) of chamber pressures on the deformed surface `positions`.
Eigen::MatrixX3d pressure_forces(const Eigen::MatrixX3d& positions, const std::vector<Chamber>& chambers,
                                 const Eigen::Ref<const Eigen::VectorXd>& pressures);

PressureForceMap pressure_force_map(const ElasticModel& body, const LiftedState& x,
                                    const std::vector<Chamber>& chambers, double h);

/// Re(Phi diag(sum_{t=1}^N Lambda^t) Phi^+ A C).
LiftedState predict_final(const KoopmanModel& model, const PressureForceMap& map,
                          const Eigen::Ref<const Eigen::VectorXd>& pressures, std::uint64_t horizon);

struct ControlIterate {
  Eigen::VectorXd pressures;
  LiftedState predicted;
  /// |S X_pred - X_goal|
  double goal_error = 0.0;
  /// Residual of the stacked NNLS system.
  double residual = 0.0;
};

struct ControlSolution {
  Eigen::VectorXd pressures;
  std::vector<ControlIterate> trace;
  double goal_error = 0.0;
  double residual = 0.0;
};

/// Pressure-to-force map evaluated at a state.
using ForceMapFn = std::function<PressureForceMap(const LiftedState&)>;

ControlSolution solve_pressures(const KoopmanModel& model, const ForceMapFn& force_map, const ControlProblem& problem,
                                const LiftedState& x0, const NnlsOptions& nnls_opts = {});

ControlSolution solve_pressures(const KoopmanModel& model, const ElasticModel& body, const ControlProblem& problem,
                                const LiftedState& x0, const NnlsOptions& nnls_opts = {});

/// The same constant pressures driven through the reduced model and the
/// full-space simulator from rest, with the force map refreshed every step.
struct ControlReplay {
  std::vector<LiftedState> reduced;
  std::vector<LiftedState> full;
  /// Percentage MSE of frames 1..N.
  std::vector<double> frame_pmse;
};

ControlReplay replay_pressures(const KoopmanModel& model, const ElasticModel& body,
                               const std::vector<Chamber>& chambers, const Eigen::Ref<const Eigen::VectorXd>& pressures,
                               std::uint64_t steps, const NewtonOptions& newton = {});

}  // namespace koopdmd

#endif
