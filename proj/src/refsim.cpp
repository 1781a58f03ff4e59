// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/refsim.hpp"

#include "koopdmd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace koopdmd {

namespace {

constexpr double kDegenerateLength = 1e-12;

Eigen::VectorXd flatten(const Eigen::MatrixX3d& m) {
  Eigen::VectorXd out(3 * m.rows());
  for (Eigen::Index v = 0; v < m.rows(); ++v) {
    out.segment<3>(3 * v) = m.row(v).transpose();
  }
  return out;
}

Eigen::MatrixX3d unflatten(const Eigen::VectorXd& x) {
  Eigen::MatrixX3d out(x.size() / 3, 3);
  for (Eigen::Index v = 0; v < out.rows(); ++v) {
    out.row(v) = x.segment<3>(3 * v).transpose();
  }
  return out;
}

// Maps free vertices to a compact DOF range; fixed vertices get -1.
std::vector<Eigen::Index> free_dof_map(const ElasticModel& model, Eigen::Index& n_free) {
  std::vector<Eigen::Index> map(model.n_vertices(), -1);
  n_free = 0;
  for (std::size_t v = 0; v < model.n_vertices(); ++v) {
    if (!model.is_fixed(v)) {
      map[v] = n_free;
      n_free += 3;
    }
  }
  return map;
}

double spring_energy(const ElasticModel& model, const Eigen::VectorXd& x) {
  double e = 0.0;
  for (const Spring& s : model.springs) {
    const Eigen::Vector3d d = x.segment<3>(3 * s.i) - x.segment<3>(3 * s.j);
    if (model.law == SpringLaw::Linearized) {
      const Eigen::Vector3d d0 = (model.rest_positions.row(s.i) - model.rest_positions.row(s.j)).transpose();
      e += 0.5 * s.stiffness * (d - d0).squaredNorm();
    } else {
      const double len = d.norm();
      e += 0.5 * s.stiffness * (len - s.rest_length) * (len - s.rest_length);
    }
  }
  return e;
}

// Spring force on vertex i and the SPD-projected stiffness block -dF_i/dx_i.
void spring_force_and_stiffness(const ElasticModel& model, const Spring& s, const Eigen::VectorXd& x,
                                Eigen::Vector3d& force_i, Eigen::Matrix3d& stiffness) {
  const Eigen::Vector3d d = x.segment<3>(3 * s.i) - x.segment<3>(3 * s.j);
  if (model.law == SpringLaw::Linearized) {
    const Eigen::Vector3d d0 = (model.rest_positions.row(s.i) - model.rest_positions.row(s.j)).transpose();
    force_i = -s.stiffness * (d - d0);
    stiffness = s.stiffness * Eigen::Matrix3d::Identity();
    return;
  }
  const double len = d.norm();
  if (len < kDegenerateLength) {
    force_i.setZero();
    stiffness.setZero();
    return;
  }
  const Eigen::Vector3d dir = d / len;
  force_i = -s.stiffness * (len - s.rest_length) * dir;
  const Eigen::Matrix3d outer = dir * dir.transpose();
  const double transverse = std::max(0.0, 1.0 - s.rest_length / len);
  stiffness = s.stiffness * (outer + transverse * (Eigen::Matrix3d::Identity() - outer));
}

}  // namespace

bool ElasticModel::is_fixed(std::size_t v) const {
  return std::binary_search(fixed_vertices.begin(), fixed_vertices.end(), v);
}

void ElasticModel::validate() {
  const std::size_t n = n_vertices();
  if (n == 0) throw Error(ErrorCode::Domain, "elastic model has no vertices");
  if (static_cast<std::size_t>(vertex_masses.size()) != n) {
    throw Error(ErrorCode::Dimension, "vertex mass count does not match vertex count");
  }
  if (!rest_positions.allFinite()) throw Error(ErrorCode::Domain, "rest positions are not finite");
  for (Eigen::Index v = 0; v < vertex_masses.size(); ++v) {
    if (!(vertex_masses[v] > 0.0)) {
      throw Error(ErrorCode::Domain, "vertex " + std::to_string(v) + " has non-positive mass");
    }
  }
  std::sort(fixed_vertices.begin(), fixed_vertices.end());
  fixed_vertices.erase(std::unique(fixed_vertices.begin(), fixed_vertices.end()), fixed_vertices.end());
  if (!fixed_vertices.empty() && fixed_vertices.back() >= n) {
    throw Error(ErrorCode::Domain, "fixed vertex index out of range");
  }
  for (std::size_t k = 0; k < springs.size(); ++k) {
    const Spring& s = springs[k];
    if (s.i >= n || s.j >= n || s.i == s.j) {
      throw Error(ErrorCode::Domain, "spring " + std::to_string(k) + " has invalid endpoints");
    }
    if (!(s.rest_length > 0.0) || !(s.stiffness > 0.0)) {
      throw Error(ErrorCode::Domain, "spring " + std::to_string(k) + " needs positive rest length and stiffness");
    }
  }
}

void ElasticModel::add_spring(std::size_t i, std::size_t j, double stiffness) {
  const double len = (rest_positions.row(i) - rest_positions.row(j)).norm();
  springs.push_back(Spring{i, j, len, stiffness});
}

FullState rest_state(const ElasticModel& model) {
  FullState s;
  s.positions = model.rest_positions;
  s.velocities = Eigen::MatrixX3d::Zero(model.rest_positions.rows(), 3);
  return s;
}

FullState to_full_state(const ElasticModel& model, const LiftedState& x, double h) {
  if (x.n_vertices() != model.n_vertices()) {
    throw Error(ErrorCode::Dimension, "lifted state does not match the model vertex count");
  }
  FullState s;
  s.positions = model.rest_positions + unflatten(x.displacement());
  s.velocities = unflatten(Eigen::VectorXd(x.momentum() / h));
  return s;
}

Eigen::VectorXd internal_forces(const ElasticModel& model, const Eigen::MatrixX3d& positions) {
  const Eigen::VectorXd x = flatten(positions);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(x.size());
  Eigen::Vector3d fi;
  Eigen::Matrix3d kb;
  for (const Spring& s : model.springs) {
    spring_force_and_stiffness(model, s, x, fi, kb);
    f.segment<3>(3 * s.i) += fi;
    f.segment<3>(3 * s.j) -= fi;
  }
  return f;
}

FullState implicit_euler_step(const ElasticModel& model, const FullState& s, double h,
                              const Eigen::MatrixX3d& f_ext, const NewtonOptions& opts) {
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "implicit_euler_step: h must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(model.n_vertices());
  if (s.positions.rows() != n || s.velocities.rows() != n || f_ext.rows() != n) {
    throw Error(ErrorCode::Dimension, "implicit_euler_step: state or force size mismatch");
  }

  Eigen::Index n_free = 0;
  const std::vector<Eigen::Index> dof = free_dof_map(model, n_free);

  const Eigen::VectorXd x0 = flatten(s.positions);
  const Eigen::VectorXd v0 = flatten(s.velocities);
  Eigen::VectorXd f = flatten(f_ext);
  Eigen::VectorXd mass(3 * n);
  for (Eigen::Index v = 0; v < n; ++v) {
    mass.segment<3>(3 * v).setConstant(model.vertex_masses[v]);
    f.segment<3>(3 * v) += model.vertex_masses[v] * model.gravity;
  }

  // Inertial target; fixed vertices stay where they are.
  Eigen::VectorXd x_pred = x0 + h * v0;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (dof[v] < 0) x_pred.segment<3>(3 * v) = x0.segment<3>(3 * v);
  }

  // E(x) = 1/2 |x - x_pred|_M^2 + h^2 (V(x) - f.x); gradient g = h * residual.
  auto energy = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd dx = x - x_pred;
    return 0.5 * dx.dot(mass.cwiseProduct(dx)) + h * h * (spring_energy(model, x) - f.dot(x));
  };

  auto finish = [&](const Eigen::VectorXd& x) {
    FullState out;
    out.positions = unflatten(x);
    out.velocities = unflatten(Eigen::VectorXd((x - x0) / h));
    for (Eigen::Index v = 0; v < n; ++v) {
      if (dof[v] < 0) {
        out.positions.row(v) = s.positions.row(v);
        out.velocities.row(v).setZero();
      }
    }
    out.time = s.time + h;
    return out;
  };

  Eigen::VectorXd x = x_pred;
  Eigen::VectorXd grad(n_free);
  Eigen::MatrixXd jac(n_free, n_free);
  double residual = 0.0;
  Eigen::Vector3d fi;
  Eigen::Matrix3d kb;

  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    // Assemble gradient and SPD-projected Jacobian over free DOFs.
    Eigen::VectorXd g_full = mass.cwiseProduct(x - x_pred) - h * h * f;
    jac.setZero();
    for (const Spring& sp : model.springs) {
      spring_force_and_stiffness(model, sp, x, fi, kb);
      g_full.segment<3>(3 * sp.i) -= h * h * fi;
      g_full.segment<3>(3 * sp.j) += h * h * fi;
      const Eigen::Index a = dof[sp.i];
      const Eigen::Index b = dof[sp.j];
      const Eigen::Matrix3d hk = h * h * kb;
      if (a >= 0) jac.block<3, 3>(a, a) += hk;
      if (b >= 0) jac.block<3, 3>(b, b) += hk;
      if (a >= 0 && b >= 0) {
        jac.block<3, 3>(a, b) -= hk;
        jac.block<3, 3>(b, a) -= hk;
      }
    }
    for (Eigen::Index v = 0; v < n; ++v) {
      if (dof[v] >= 0) {
        grad.segment<3>(dof[v]) = g_full.segment<3>(3 * v);
        jac.block<3, 3>(dof[v], dof[v]).diagonal().array() += model.vertex_masses[v];
      }
    }

    residual = grad.norm() / h;
    if (residual <= opts.tolerance) return finish(x);
    if (iter == opts.max_iterations) break;

    Eigen::LLT<Eigen::MatrixXd> llt(jac);
    if (llt.info() != Eigen::Success) {
      const double shift = 1e-10 * jac.diagonal().cwiseAbs().maxCoeff();
      llt.compute(jac + shift * Eigen::MatrixXd::Identity(n_free, n_free));
    }
    const Eigen::VectorXd step_free = -llt.solve(grad);
    // Increment below round-off: the residual is as small as this precision allows.
    if (step_free.norm() <= 1e-14 * (x.norm() + 1.0)) return finish(x);

    Eigen::VectorXd step = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index v = 0; v < n; ++v) {
      if (dof[v] >= 0) step.segment<3>(3 * v) = step_free.segment<3>(dof[v]);
    }

    // Backtracking on the incremental potential; a full step is accepted for quadratic energies.
    const double e0 = energy(x);
    const double slope = grad.dot(step_free);
    double alpha = 1.0;
    Eigen::VectorXd trial = x + step;
    while (alpha > 1e-8 && energy(trial) > e0 + 1e-4 * alpha * slope + 1e-14 * std::abs(e0)) {
      alpha *= 0.5;
      trial = x + alpha * step;
    }
    x = trial;
  }
  throw ConvergenceError("implicit_euler_step: Newton did not converge (residual " +
                             std::to_string(residual) + ")",
                         residual);
}

ForceLift lifted_step_force(const ElasticModel& model, const Eigen::MatrixX3d& f_ext, double h) {
  const std::size_t n = model.n_vertices();
  Eigen::VectorXd accel = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(n));
  for (std::size_t v = 0; v < n; ++v) {
    if (model.is_fixed(v)) continue;
    const Eigen::Index i = static_cast<Eigen::Index>(v);
    Eigen::Vector3d a = model.gravity;
    if (f_ext.rows() > 0) a += f_ext.row(i).transpose() / model.vertex_masses[i];
    accel.segment<3>(3 * i) = a;
  }
  return lift_force(accel, h);
}

SnapshotSet simulate_trajectory(const ElasticModel& model, const FullState& s0, double h,
                                std::size_t steps, const ForceSchedule& forcing,
                                const NewtonOptions& opts) {
  if (steps < 2) throw Error(ErrorCode::InsufficientData, "simulate_trajectory needs at least 2 steps");
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "simulate_trajectory: h must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(model.n_vertices());

  SnapshotSet out;
  out.h = h;
  out.rest_positions = model.rest_positions;
  out.states.reserve(steps + 1);
  out.forcing.reserve(steps);

  const Eigen::VectorXd rest = flatten(model.rest_positions);
  Eigen::VectorXd u = flatten(s0.positions) - rest;
  Eigen::VectorXd u_prev = u - h * flatten(s0.velocities);
  out.states.push_back(lift(u, u_prev));

  const bool forced = static_cast<bool>(forcing);
  const bool any_gravity = !model.gravity.isZero(0.0);
  FullState s = s0;
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::MatrixX3d f = forced ? forcing(t, s) : Eigen::MatrixX3d::Zero(n, 3);
    try {
      s = implicit_euler_step(model, s, h, f, opts);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("step " + std::to_string(t) + ": " + e.what(), e.residual());
    }
    u_prev = u;
    u = flatten(s.positions) - rest;
    out.states.push_back(lift(u, u_prev));
    if (forced || any_gravity) out.forcing.push_back(lifted_step_force(model, f, h));
  }
  return out;
}

double kinetic_energy(const LiftedState& x, const Eigen::Ref<const Eigen::VectorXd>& masses, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "kinetic_energy: h must be positive");
  if (static_cast<std::size_t>(masses.size()) != x.n_vertices()) {
    throw Error(ErrorCode::Dimension, "kinetic_energy: mass count does not match state");
  }
  const auto p = x.momentum();
  double ke = 0.0;
  for (Eigen::Index v = 0; v < masses.size(); ++v) {
    ke += masses[v] * p.segment<3>(3 * v).squaredNorm();
  }
  return 0.5 * ke / (h * h);
}

void SnapshotSet::validate() const {
  if (states.size() < 2) throw Error(ErrorCode::InsufficientData, "snapshot set needs at least 2 states");
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "snapshot set needs h > 0");
  const Eigen::Index d = states.front().values().size();
  for (const LiftedState& s : states) {
    if (s.values().size() != d) throw Error(ErrorCode::Dimension, "snapshot states have mixed dimensions");
  }
  if (!forcing.empty()) {
    if (forcing.size() != states.size() - 1) {
      throw Error(ErrorCode::Dimension, "forcing list must hold one entry per step");
    }
    for (const ForceLift& f : forcing) {
      if (f.values().size() != d) throw Error(ErrorCode::Dimension, "forcing dimension mismatch");
    }
  }
  if (rest_positions.size() != 0 && 6 * rest_positions.rows() != d) {
    throw Error(ErrorCode::Dimension, "rest positions do not match state dimension");
  }
}

}  // namespace koopdmd
