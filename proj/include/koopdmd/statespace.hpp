// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_STATESPACE_HPP
#define KOOPDMD_STATESPACE_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <utility>

namespace koopdmd {

/// Koopman observable of an elastic body: [U_t; U_t - U_{t-1}].
///
/// One contiguous vector of length 6n. The first 3n entries are vertex
/// displacements from rest (x0 y0 z0 x1 ...), the second 3n the per-step
/// displacement difference. The momentum block is not divided by h.
class LiftedState {
public:
  LiftedState() = default;

  /// Zero state for n vertices.
  explicit LiftedState(std::size_t n_vertices);

  /// Adopts a raw 6n vector. Throws on bad length or non-finite entries.
  explicit LiftedState(Eigen::VectorXd values);

  std::size_t n_vertices() const noexcept { return static_cast<std::size_t>(values_.size()) / 6; }
  Eigen::Index dof() const noexcept { return values_.size() / 2; }

  const Eigen::VectorXd& values() const noexcept { return values_; }

  auto displacement() const { return values_.head(dof()); }
  auto momentum() const { return values_.tail(dof()); }

  friend bool operator==(const LiftedState& a, const LiftedState& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

private:
  Eigen::VectorXd values_;
};

/// External force in lifted coordinates: [0; f h^2].
class ForceLift {
public:
  ForceLift() = default;
  ForceLift(Eigen::VectorXd values, double h);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  double h() const noexcept { return h_; }
  std::size_t n_vertices() const noexcept { return static_cast<std::size_t>(values_.size()) / 6; }

private:
  Eigen::VectorXd values_;
  double h_ = 0.0;
};

LiftedState lift(const Eigen::Ref<const Eigen::VectorXd>& u_curr,
                 const Eigen::Ref<const Eigen::VectorXd>& u_prev);

std::pair<Eigen::VectorXd, Eigen::VectorXd> unlift(const LiftedState& x);

/// `f` is a per-vertex acceleration (force per unit mass), length 3n.
ForceLift lift_force(const Eigen::Ref<const Eigen::VectorXd>& f, double h);

}  // namespace koopdmd

#endif
