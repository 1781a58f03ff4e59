// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_TEST_SUPPORT_HPP
#define KOOPDMD_TEST_SUPPORT_HPP

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/refsim.hpp"
#include "koopdmd/scenarios.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace koopdmd::ktest {

/// Scratch directory removed when the object goes out of scope.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("koopdmd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

/// Linear 2-vertex oscillator trajectory started with a unit velocity.
inline SnapshotSet oscillator_data(double h = 0.1, std::size_t steps = 100) {
  const Mesh mesh = make_oscillator();
  FullState s0 = rest_state(mesh.model);
  s0.velocities(1, 0) = 1.0;
  return simulate_trajectory(mesh.model, s0, h, steps);
}

inline FitResult oscillator_fit(double h = 0.1) {
  FitOptions opts;
  opts.clamp_unit_disk = false;
  opts.rank = RankPolicy::with_energy(1.0);
  return fit(oscillator_data(h), opts);
}

/// Small nonlinear strip excited at the tip; a few oscillatory modes.
inline FitResult strip_fit(std::size_t steps = 300) {
  StripOptions so;
  so.nx = 6;
  const Mesh mesh = make_strip(so);
  const FullState s0 = impulse_state(mesh.model, tip_vertices(mesh.model), Eigen::Vector3d(0.0, 0.3, 0.0));
  return fit(simulate_trajectory(mesh.model, s0, 0.004, steps));
}

}  // namespace koopdmd::ktest

#endif
