// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/scenarios.hpp"

#include "koopdmd/control.hpp"
#include "koopdmd/error.hpp"

#include <cmath>
#include <random>

namespace koopdmd {

namespace {

ElasticModel lattice_base(Eigen::MatrixX3d rest, double mass) {
  ElasticModel m;
  m.vertex_masses = Eigen::VectorXd::Constant(rest.rows(), mass);
  m.rest_positions = std::move(rest);
  return m;
}

// Quad wall split into two triangles whose summed area normal points along `outward_x`.
void add_wall(Chamber& c, std::size_t a, std::size_t b, std::size_t cc, std::size_t d, bool outward_x) {
  if (outward_x) {
    c.faces.push_back({a, b, cc});
    c.faces.push_back({a, cc, d});
  } else {
    c.faces.push_back({a, cc, b});
    c.faces.push_back({a, d, cc});
  }
}

}  // namespace

Mesh make_chain(const ChainOptions& opts) {
  if (opts.vertices < 2) throw Error(ErrorCode::Domain, "chain needs at least 2 vertices");
  Eigen::MatrixX3d rest = Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(opts.vertices), 3);
  for (std::size_t v = 0; v < opts.vertices; ++v) rest(static_cast<Eigen::Index>(v), 0) = opts.spacing * static_cast<double>(v);
  Mesh mesh;
  mesh.model = lattice_base(std::move(rest), opts.mass);
  mesh.model.law = SpringLaw::Linearized;
  for (std::size_t v = 0; v + 1 < opts.vertices; ++v) mesh.model.add_spring(v, v + 1, opts.stiffness);
  if (opts.fix_first) mesh.model.fixed_vertices.push_back(0);
  mesh.model.validate();
  return mesh;
}

std::size_t strip_vertex(const StripOptions& opts, std::size_t i, std::size_t j) { return i * opts.ny + j; }

Mesh make_strip(const StripOptions& opts) {
  if (opts.nx < 2 || opts.ny < 2) throw Error(ErrorCode::Domain, "strip needs at least 2 x 2 vertices");
  Eigen::MatrixX3d rest = Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(opts.nx * opts.ny), 3);
  for (std::size_t i = 0; i < opts.nx; ++i) {
    for (std::size_t j = 0; j < opts.ny; ++j) {
      const auto v = static_cast<Eigen::Index>(strip_vertex(opts, i, j));
      rest(v, 0) = opts.spacing * static_cast<double>(i);
      rest(v, 1) = opts.spacing * static_cast<double>(j);
    }
  }
  Mesh mesh;
  mesh.model = lattice_base(std::move(rest), opts.mass);
  ElasticModel& m = mesh.model;
  for (std::size_t i = 0; i < opts.nx; ++i) {
    for (std::size_t j = 0; j < opts.ny; ++j) {
      const std::size_t v = strip_vertex(opts, i, j);
      if (i + 1 < opts.nx) m.add_spring(v, strip_vertex(opts, i + 1, j), opts.stiffness);
      if (j + 1 < opts.ny) m.add_spring(v, strip_vertex(opts, i, j + 1), opts.stiffness);
      if (i + 1 < opts.nx && j + 1 < opts.ny) {
        m.add_spring(v, strip_vertex(opts, i + 1, j + 1), opts.stiffness);
        m.add_spring(strip_vertex(opts, i, j + 1), strip_vertex(opts, i + 1, j), opts.stiffness);
      }
    }
    if (i == 0) {
      for (std::size_t j = 0; j < opts.ny; ++j) m.fixed_vertices.push_back(strip_vertex(opts, 0, j));
    }
  }
  m.validate();
  return mesh;
}

std::size_t slab_vertex(std::size_t i, std::size_t j, std::size_t k) { return (i * 3 + j) * 2 + k; }

Mesh make_control_slab(const SlabOptions& opts) {
  if (opts.nx < 5) throw Error(ErrorCode::Domain, "control slab needs nx >= 5");
  const std::size_t nx = opts.nx;
  Eigen::MatrixX3d rest(static_cast<Eigen::Index>(nx * 6), 3);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 2; ++k) {
        rest.row(static_cast<Eigen::Index>(slab_vertex(i, j, k))) =
            opts.spacing * Eigen::RowVector3d(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
      }
    }
  }
  Mesh mesh;
  mesh.model = lattice_base(std::move(rest), opts.mass);
  ElasticModel& m = mesh.model;

  const double reach = std::sqrt(3.0) * opts.spacing * 1.001;
  const Eigen::Index n = m.rest_positions.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      if ((m.rest_positions.row(a) - m.rest_positions.row(b)).norm() <= reach) {
        m.add_spring(static_cast<std::size_t>(a), static_cast<std::size_t>(b), opts.stiffness);
      }
    }
  }
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t k = 0; k < 2; ++k) m.fixed_vertices.push_back(slab_vertex(0, j, k));
  }
  m.validate();

  const double span = static_cast<double>(nx - 2) / 3.0;
  for (int c = 0; c < 3; ++c) {
    const auto lo = static_cast<std::size_t>(std::lround(1.0 + span * c));
    const auto hi = static_cast<std::size_t>(std::lround(1.0 + span * (c + 1)));
    const std::size_t j0 = (c == 1) ? 0 : 1;
    Chamber chamber;
    chamber.id = c;
    auto wall = [&](std::size_t i, bool outward) {
      add_wall(chamber, slab_vertex(i, j0, 0), slab_vertex(i, j0 + 1, 0), slab_vertex(i, j0 + 1, 1),
               slab_vertex(i, j0, 1), outward);
    };
    wall(lo, false);
    wall(hi, true);
    mesh.chambers.push_back(std::move(chamber));
  }
  return mesh;
}

Mesh make_oscillator(double stiffness, double mass) {
  Eigen::MatrixX3d rest = Eigen::MatrixX3d::Zero(2, 3);
  rest(1, 0) = 1.0;
  Mesh mesh;
  mesh.model = lattice_base(std::move(rest), mass);
  mesh.model.law = SpringLaw::Linearized;
  mesh.model.add_spring(0, 1, stiffness);
  mesh.model.fixed_vertices.push_back(0);
  mesh.model.validate();
  return mesh;
}

std::vector<std::size_t> tip_vertices(const ElasticModel& model) {
  const double x_max = model.rest_positions.col(0).maxCoeff();
  const double tol = 1e-9 * (std::abs(x_max) + 1.0);
  std::vector<std::size_t> out;
  for (Eigen::Index v = 0; v < model.rest_positions.rows(); ++v) {
    if (model.rest_positions(v, 0) >= x_max - tol) out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<Eigen::VectorXd> random_pressure_schedule(std::size_t chambers, std::size_t steps, std::size_t hold,
                                                      double max_pressure, std::uint64_t seed) {
  if (hold == 0) throw Error(ErrorCode::Domain, "pressure hold length must be >= 1");
  if (!(max_pressure >= 0.0)) throw Error(ErrorCode::Domain, "max pressure must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, max_pressure);
  std::vector<Eigen::VectorXd> out;
  out.reserve(steps);
  Eigen::VectorXd current(static_cast<Eigen::Index>(chambers));
  for (std::size_t t = 0; t < steps; ++t) {
    if (t % hold == 0) {
      for (Eigen::Index c = 0; c < current.size(); ++c) current[c] = dist(rng);
    }
    out.push_back(current);
  }
  return out;
}

ForceSchedule pressure_schedule_forces(const std::vector<Chamber>& chambers, std::vector<Eigen::VectorXd> schedule) {
  return [chambers, schedule = std::move(schedule)](std::size_t t, const FullState& s) -> Eigen::MatrixX3d {
    if (t >= schedule.size()) return Eigen::MatrixX3d::Zero(s.positions.rows(), 3);
    return pressure_forces(s.positions, chambers, schedule[t]);
  };
}

FullState impulse_state(const ElasticModel& model, const std::vector<std::size_t>& vertices,
                        const Eigen::Vector3d& velocity) {
  FullState s = rest_state(model);
  for (std::size_t v : vertices) {
    if (v >= model.n_vertices()) throw Error(ErrorCode::Domain, "impulse vertex out of range");
    if (!model.is_fixed(v)) s.velocities.row(static_cast<Eigen::Index>(v)) = velocity.transpose();
  }
  return s;
}

}  // namespace koopdmd
