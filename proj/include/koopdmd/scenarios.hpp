// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_SCENARIOS_HPP
#define KOOPDMD_SCENARIOS_HPP

#include "koopdmd/mesh_io.hpp"
#include "koopdmd/refsim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace koopdmd {

struct ChainOptions {
  std::size_t vertices = 10;
  double spacing = 1.0;
  double stiffness = 1.0;
  double mass = 1.0;
  bool fix_first = true;
};

/// Straight chain along +x with nearest-neighbour springs.
Mesh make_chain(const ChainOptions& opts = {});

struct StripOptions {
  std::size_t nx = 11;
  std::size_t ny = 3;
  double spacing = 0.1;
  double stiffness = 3000.0;
  double mass = 0.01;
};

/// Planar cantilever lattice in the x-y plane, left column clamped.
/// Springs join horizontal, vertical and both diagonal neighbours.
Mesh make_strip(const StripOptions& opts = {});

struct SlabOptions {
  std::size_t nx = 10;
  double spacing = 0.1;
  double stiffness = 100.0;
  double mass = 0.01;
};

/// nx x 3 x 2 cantilever lattice clamped at x = 0 with three pressure chambers.
///
/// Each chamber is a pair of facing cross-section walls in the upper or lower
/// half of the slab. Pressure pushes the walls apart along x, so an upper
/// chamber bends the free end down and a lower chamber bends it up.
Mesh make_control_slab(const SlabOptions& opts = {});

/// Two vertices joined by one spring along x; vertex 0 is clamped.
Mesh make_oscillator(double stiffness = 1.0, double mass = 1.0);

/// Index of the vertex at lattice coordinate (i, j) in make_strip.
std::size_t strip_vertex(const StripOptions& opts, std::size_t i, std::size_t j);

/// Index of the vertex at lattice coordinate (i, j, k) in make_control_slab.
std::size_t slab_vertex(std::size_t i, std::size_t j, std::size_t k);

/// Vertices on the free end of a lattice: those with the largest rest x.
std::vector<std::size_t> tip_vertices(const ElasticModel& model);

/// Piecewise-constant random pressures in [0, max_pressure], held for `hold` steps.
std::vector<Eigen::VectorXd> random_pressure_schedule(std::size_t chambers, std::size_t steps, std::size_t hold,
                                                      double max_pressure, std::uint64_t seed);

/// Force schedule that applies `schedule[t]` to the mesh chambers at their deformed positions.
ForceSchedule pressure_schedule_forces(const std::vector<Chamber>& chambers, std::vector<Eigen::VectorXd> schedule);

/// Initial state with the given velocity on selected vertices.
FullState impulse_state(const ElasticModel& model, const std::vector<std::size_t>& vertices,
                        const Eigen::Vector3d& velocity);

}  // namespace koopdmd

#endif
