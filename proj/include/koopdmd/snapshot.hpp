// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_SNAPSHOT_HPP
#define KOOPDMD_SNAPSHOT_HPP

#include "koopdmd/statespace.hpp"

#include <Eigen/Dense>

#include <vector>

namespace koopdmd {

/// One trajectory of lifted states X_0..X_T sampled every `h` seconds.
///
/// `forcing` is either empty (unforced) or holds T lifted forces, where
/// forcing[t] was applied on the step X_t -> X_{t+1}.
struct SnapshotSet {
  std::vector<LiftedState> states;
  std::vector<ForceLift> forcing;
  double h = 0.0;
  Eigen::MatrixX3d rest_positions;

  std::size_t num_frames() const noexcept { return states.size(); }
  Eigen::Index dim() const noexcept { return states.empty() ? 0 : states.front().values().size(); }
  bool has_forcing() const noexcept { return !forcing.empty(); }

  /// Throws on mixed dimensions, T < 1, h <= 0 or a forcing list of the wrong length.
  void validate() const;
};

}  // namespace koopdmd

#endif
