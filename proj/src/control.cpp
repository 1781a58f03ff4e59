// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/control.hpp"

#include "koopdmd/error.hpp"
#include "koopdmd/koopstep.hpp"
#include "koopdmd/metrics.hpp"

#include <cmath>
#include <string>

namespace koopdmd {

namespace {

constexpr double kDegenerateArea = 1e-14;

Eigen::MatrixX3d deformed_positions(const ElasticModel& body, const LiftedState& x) {
  if (x.n_vertices() != body.n_vertices()) throw Error(ErrorCode::Dimension, "state does not match the mesh");
  Eigen::MatrixX3d p = body.rest_positions;
  const auto u = x.displacement();
  for (Eigen::Index v = 0; v < p.rows(); ++v) p.row(v) += u.segment<3>(3 * v).transpose();
  return p;
}

// Adds the per-vertex force of unit pressure on one chamber's faces.
void accumulate_chamber(const Eigen::MatrixX3d& positions, const Chamber& chamber, double pressure,
                        Eigen::MatrixX3d& forces) {
  for (const auto& f : chamber.faces) {
    const Eigen::Vector3d a = positions.row(static_cast<Eigen::Index>(f[0])).transpose();
    const Eigen::Vector3d b = positions.row(static_cast<Eigen::Index>(f[1])).transpose();
    const Eigen::Vector3d c = positions.row(static_cast<Eigen::Index>(f[2])).transpose();
    // |cross| / 2 is the area; cross / 2 is area times unit normal.
    const Eigen::Vector3d area_normal = 0.5 * (b - a).cross(c - a);
    if (area_normal.norm() < kDegenerateArea) continue;
    const Eigen::RowVector3d share = (pressure / 3.0) * area_normal.transpose();
    for (std::size_t v : f) forces.row(static_cast<Eigen::Index>(v)) += share;
  }
}

}  // namespace

void ControlProblem::validate(Eigen::Index state_dim) const {
  if (chambers.empty()) throw Error(ErrorCode::Domain, "control problem needs at least one chamber");
  if (horizon < 1) throw Error(ErrorCode::Domain, "control horizon must be >= 1");
  if (iterations < 1) throw Error(ErrorCode::Domain, "control needs at least one iteration");
  if (!(momentum_weight >= 0.0)) throw Error(ErrorCode::Domain, "momentum weight must be >= 0");
  if (selected_dofs.empty() || static_cast<Eigen::Index>(selected_dofs.size()) != goal.size()) {
    throw Error(ErrorCode::Dimension, "selection and goal sizes differ");
  }
  for (Eigen::Index d : selected_dofs) {
    if (d < 0 || d >= state_dim) throw Error(ErrorCode::Dimension, "selected DOF out of range");
  }
}

ControlProblem ControlProblem::for_vertex_goals(std::vector<Chamber> chambers, const std::vector<VertexGoal>& goals,
                                                std::uint64_t horizon, int iterations, double momentum_weight) {
  ControlProblem p;
  p.chambers = std::move(chambers);
  p.horizon = horizon;
  p.iterations = iterations;
  p.momentum_weight = momentum_weight;
  p.goal.resize(static_cast<Eigen::Index>(3 * goals.size()));
  for (std::size_t g = 0; g < goals.size(); ++g) {
    for (int c = 0; c < 3; ++c) {
      p.selected_dofs.push_back(static_cast<Eigen::Index>(3 * goals[g].vertex) + c);
      p.goal[static_cast<Eigen::Index>(3 * g) + c] = goals[g].displacement[c];
    }
  }
  return p;
}

Eigen::MatrixX3d pressure_forces(const Eigen::MatrixX3d& positions, const std::vector<Chamber>& chambers,
                                 const Eigen::Ref<const Eigen::VectorXd>& pressures) {
  if (pressures.size() != static_cast<Eigen::Index>(chambers.size())) {
    throw Error(ErrorCode::Dimension, "one pressure per chamber expected");
  }
  Eigen::MatrixX3d forces = Eigen::MatrixX3d::Zero(positions.rows(), 3);
  for (std::size_t j = 0; j < chambers.size(); ++j) {
    accumulate_chamber(positions, chambers[j], pressures[static_cast<Eigen::Index>(j)], forces);
  }
  return forces;
}

PressureForceMap pressure_force_map(const ElasticModel& body, const LiftedState& x,
                                    const std::vector<Chamber>& chambers, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "pressure_force_map needs h > 0");
  const Eigen::MatrixX3d positions = deformed_positions(body, x);
  const Eigen::Index n = positions.rows();
  PressureForceMap map{Eigen::MatrixXd::Zero(6 * n, static_cast<Eigen::Index>(chambers.size()))};
  for (std::size_t j = 0; j < chambers.size(); ++j) {
    Eigen::MatrixX3d forces = Eigen::MatrixX3d::Zero(n, 3);
    accumulate_chamber(positions, chambers[j], 1.0, forces);
    Eigen::VectorXd accel = Eigen::VectorXd::Zero(3 * n);
    for (Eigen::Index v = 0; v < n; ++v) {
      if (body.is_fixed(static_cast<std::size_t>(v))) continue;
      accel.segment<3>(3 * v) = forces.row(v).transpose() / body.vertex_masses[v];
    }
    map.A.col(static_cast<Eigen::Index>(j)) = lift_force(accel, h).values();
  }
  return map;
}

LiftedState predict_final(const KoopmanModel& model, const PressureForceMap& map,
                          const Eigen::Ref<const Eigen::VectorXd>& pressures, std::uint64_t horizon) {
  if (map.A.cols() != pressures.size()) throw Error(ErrorCode::Dimension, "pressure count does not match the map");
  const Eigen::VectorXd force = map.A * pressures;
  const Eigen::VectorXcd z = model.project(force);
  return LiftedState(model.lift_coordinates(propagator_sum(model, horizon).cwiseProduct(z)));
}

ControlSolution solve_pressures(const KoopmanModel& model, const ForceMapFn& force_map, const ControlProblem& problem,
                                const LiftedState& x0, const NnlsOptions& nnls_opts) {
  const Eigen::Index d = model.dim();
  problem.validate(d);
  if (x0.values().size() != d) throw Error(ErrorCode::Dimension, "initial state does not match the model");

  const Eigen::Index k = static_cast<Eigen::Index>(problem.chambers.size());
  const Eigen::Index dof = d / 2;
  const Eigen::Index n_sel = static_cast<Eigen::Index>(problem.selected_dofs.size());
  const bool penalize = problem.momentum_weight > 0.0;
  const Eigen::Index rows = n_sel + (penalize ? dof : 0);
  const double w = std::sqrt(problem.momentum_weight);
  const Eigen::VectorXcd sums = propagator_sum(model, problem.horizon);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  rhs.head(n_sel) = problem.goal;

  ControlSolution out;
  LiftedState current = x0;
  for (int it = 0; it < problem.iterations; ++it) {
    const PressureForceMap map = force_map(current);
    if (map.A.rows() != d || map.A.cols() != k) throw Error(ErrorCode::Dimension, "force map has the wrong shape");

    // M = Re(Phi diag(sum) Phi^+ A), one column per chamber.
    Eigen::MatrixXd M(d, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      M.col(j) = model.lift_coordinates(sums.cwiseProduct(model.project(map.A.col(j))));
    }

    Eigen::MatrixXd stacked(rows, k);
    for (Eigen::Index i = 0; i < n_sel; ++i) stacked.row(i) = M.row(problem.selected_dofs[static_cast<std::size_t>(i)]);
    if (penalize) stacked.bottomRows(dof) = w * M.bottomRows(dof);

    const NnlsResult sol = nnls(stacked, rhs, nnls_opts);
    ControlIterate iterate{sol.x, LiftedState(Eigen::VectorXd(M * sol.x)), 0.0, sol.residual_norm};
    Eigen::VectorXd selected(n_sel);
    for (Eigen::Index i = 0; i < n_sel; ++i) {
      selected[i] = iterate.predicted.values()[problem.selected_dofs[static_cast<std::size_t>(i)]];
    }
    iterate.goal_error = (selected - problem.goal).norm();
    current = iterate.predicted;
    out.trace.push_back(std::move(iterate));
  }
  const ControlIterate& last = out.trace.back();
  out.pressures = last.pressures;
  out.goal_error = last.goal_error;
  out.residual = last.residual;
  return out;
}

ControlSolution solve_pressures(const KoopmanModel& model, const ElasticModel& body, const ControlProblem& problem,
                                const LiftedState& x0, const NnlsOptions& nnls_opts) {
  const double h = model.h();
  ForceMapFn map = [&](const LiftedState& x) { return pressure_force_map(body, x, problem.chambers, h); };
  return solve_pressures(model, map, problem, x0, nnls_opts);
}

ControlReplay replay_pressures(const KoopmanModel& model, const ElasticModel& body,
                               const std::vector<Chamber>& chambers, const Eigen::Ref<const Eigen::VectorXd>& pressures,
                               std::uint64_t steps, const NewtonOptions& newton) {
  if (static_cast<Eigen::Index>(6 * body.n_vertices()) != model.dim()) {
    throw Error(ErrorCode::Dimension, "model and mesh sizes differ");
  }
  const double h = model.h();
  const Eigen::VectorXd c = pressures;

  ControlReplay out;
  const Eigen::VectorXd gravity = lifted_step_force(body, Eigen::MatrixX3d(), h).values();
  LiftedState reduced(body.n_vertices());
  out.reduced.push_back(reduced);
  for (std::uint64_t t = 0; t < steps; ++t) {
    const PressureForceMap map = pressure_force_map(body, reduced, chambers, h);
    reduced = LiftedState(step(model, Eigen::VectorXd(reduced.values() + map.A * c + gravity)));
    out.reduced.push_back(reduced);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(body.n_vertices());
  auto displacement = [&](const FullState& s) {
    Eigen::VectorXd u(3 * n);
    for (Eigen::Index v = 0; v < n; ++v) u.segment<3>(3 * v) = (s.positions.row(v) - body.rest_positions.row(v)).transpose();
    return u;
  };
  FullState s = rest_state(body);
  Eigen::VectorXd u_prev = displacement(s);
  out.full.push_back(lift(u_prev, u_prev));
  for (std::uint64_t t = 0; t < steps; ++t) {
    s = implicit_euler_step(body, s, h, pressure_forces(s.positions, chambers, c), newton);
    const Eigen::VectorXd u = displacement(s);
    out.full.push_back(lift(u, u_prev));
    u_prev = u;
  }
  for (std::size_t t = 1; t < out.full.size(); ++t) {
    out.frame_pmse.push_back(percentage_mse(out.reduced[t].values(), out.full[t].values()));
  }
  return out;
}

}  // namespace koopdmd
