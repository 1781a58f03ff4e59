// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/statespace.hpp"

#include "koopdmd/error.hpp"

#include <string>

namespace koopdmd {

LiftedState::LiftedState(std::size_t n_vertices)
    : values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * n_vertices))) {}

LiftedState::LiftedState(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() == 0 || values_.size() % 6 != 0) {
    throw Error(ErrorCode::Dimension,
                "lifted state length " + std::to_string(values_.size()) + " is not a positive multiple of 6");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::Domain, "lifted state has non-finite entries");
  }
}

ForceLift::ForceLift(Eigen::VectorXd values, double h) : values_(std::move(values)), h_(h) {
  if (!(h > 0.0)) {
    throw Error(ErrorCode::Domain, "force lift needs h > 0");
  }
  if (values_.size() % 6 != 0) {
    throw Error(ErrorCode::Dimension, "force lift length is not a multiple of 6");
  }
}

LiftedState lift(const Eigen::Ref<const Eigen::VectorXd>& u_curr,
                 const Eigen::Ref<const Eigen::VectorXd>& u_prev) {
  if (u_curr.size() != u_prev.size()) {
    throw Error(ErrorCode::Dimension, "lift: u_curr and u_prev lengths differ");
  }
  if (u_curr.size() == 0 || u_curr.size() % 3 != 0) {
    throw Error(ErrorCode::Dimension, "lift: displacement length must be a positive multiple of 3");
  }
  const Eigen::Index dof = u_curr.size();
  Eigen::VectorXd x(2 * dof);
  x.head(dof) = u_curr;
  x.tail(dof) = u_curr - u_prev;
  return LiftedState(std::move(x));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unlift(const LiftedState& x) {
  Eigen::VectorXd u_curr = x.displacement();
  Eigen::VectorXd u_prev = u_curr - x.momentum();
  return {std::move(u_curr), std::move(u_prev)};
}

ForceLift lift_force(const Eigen::Ref<const Eigen::VectorXd>& f, double h) {
  if (!(h > 0.0)) {
    throw Error(ErrorCode::Domain, "lift_force: h must be positive");
  }
  if (f.size() % 3 != 0) {
    throw Error(ErrorCode::Dimension, "lift_force: force length must be a multiple of 3");
  }
  const Eigen::Index dof = f.size();
  Eigen::VectorXd values = Eigen::VectorXd::Zero(2 * dof);
  values.tail(dof) = f * (h * h);
  return ForceLift(std::move(values), h);
}

}  // namespace koopdmd
