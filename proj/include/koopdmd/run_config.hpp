// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_RUN_CONFIG_HPP
#define KOOPDMD_RUN_CONFIG_HPP

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/mesh_io.hpp"
#include "koopdmd/refsim.hpp"
#include "koopdmd/snapshot.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace koopdmd {

struct Impulse {
  std::size_t vertex = 0;
  std::size_t step = 0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct ForcingSpec {
  enum class Kind { None, Gravity, Impulse, Pressure };
  Kind kind = Kind::None;
  Eigen::Vector3d gravity = Eigen::Vector3d::Zero();
  std::vector<Impulse> impulses;
  std::size_t hold = 20;
  double max_pressure = 1.0;
};

/// Data-generation and fitting settings, read from JSON such as
///
///   {
///     "mesh": "strip.mesh",
///     "h": 0.004,
///     "steps": 400,
///     "linear_springs": false,
///     "forcing": {"type": "impulse",
///                 "impulses": [{"vertex": 32, "step": 0, "velocity": [0, 1, 0]}]},
///     "fit": {"rank": "energy", "energy": 0.9999, "clamp": true},
///     "seed": 7
///   }
///
/// Forcing types: "none", "gravity" ({"g": [x, y, z]}), "impulse" and
/// "pressure" ({"hold": steps, "max": value}, drawn from the seed).
/// Fit rank is "energy" (with "energy") or "fixed" (with "value").
/// A relative mesh path resolves against the config file's directory.
struct RunConfig {
  std::filesystem::path mesh;
  double h = 0.0;
  std::size_t steps = 0;
  bool linear_springs = false;
  ForcingSpec forcing;
  FitOptions fit;
  std::uint64_t seed = 0;
  NewtonOptions newton;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Loads the mesh and applies the spring-law and gravity settings.
Mesh load_config_mesh(const RunConfig& config);

/// Runs the reference simulator from rest with the configured forcing.
SnapshotSet generate_snapshots(const RunConfig& config, const Mesh& mesh);

}  // namespace koopdmd

#endif
