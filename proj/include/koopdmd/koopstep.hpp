// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_KOOPSTEP_HPP
#define KOOPDMD_KOOPSTEP_HPP

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/statespace.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace koopdmd {

/// Where the imaginary-part projection sits relative to the eigenvalue multiply.
enum class ProjectionOrder {
  /// K_real = Phi_R^+ P Phi_R Lambda_R
  AfterPropagation,
  /// Lambda_R Phi_R^+ P Phi_R (diagnostic)
  BeforePropagation,
};

/// Realified 2r x 2r propagator. Coordinates are [Re z; Im z].
class RealOperator {
public:
  RealOperator(Eigen::MatrixXd k_real, Eigen::MatrixXd modes_realified, ProjectionOrder order);

  const Eigen::MatrixXd& k_real() const noexcept { return k_real_; }
  /// [A -B; B A] with Phi = A + iB.
  const Eigen::MatrixXd& modes_realified() const noexcept { return modes_realified_; }
  Eigen::Index rank() const noexcept { return k_real_.rows() / 2; }
  ProjectionOrder order() const noexcept { return order_; }

  /// K_real^N by repeated squaring.
  Eigen::MatrixXd power(std::uint64_t n) const;

  /// K_real^N z without touching the full-space dimension.
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& z_real, std::uint64_t n) const;

  static Eigen::VectorXd realify_coordinates(const Eigen::Ref<const Eigen::VectorXcd>& z);
  static Eigen::VectorXcd complexify_coordinates(const Eigen::Ref<const Eigen::VectorXd>& z_real);

private:
  Eigen::MatrixXd k_real_;
  Eigen::MatrixXd modes_realified_;
  ProjectionOrder order_;
};

/// Real part of Phi Lambda Phi^+ x.
Eigen::VectorXd step(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
LiftedState step(const KoopmanModel& model, const LiftedState& x);

/// step(x + F). Throws Error(StepSize) when F was lifted with another h.
LiftedState step_forced(const KoopmanModel& model, const LiftedState& x, const ForceLift& force);

/// Real part of Phi Lambda^N Phi^+ x, with lambda^N = |lambda|^N e^{i N arg lambda}.
/// Non-integer N follows the principal branch.
Eigen::VectorXd multi_step(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double n);
LiftedState multi_step(const KoopmanModel& model, const LiftedState& x, double n);

/// Lambda(h') = exp((h'/h) log Lambda(h)) on the principal branch.
KoopmanModel rescale_timestep(const KoopmanModel& model, double h_new);

RealOperator realify(const KoopmanModel& model, ProjectionOrder order = ProjectionOrder::AfterPropagation);

struct RealStepResult {
  Eigen::VectorXd state;
  /// |Im(Phi z_N)| before the final real part is taken.
  double imaginary_residue = 0.0;
};

RealStepResult real_multi_step_detail(const RealOperator& op, const KoopmanModel& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& x, std::uint64_t n);
Eigen::VectorXd real_multi_step(const RealOperator& op, const KoopmanModel& model,
                                const Eigen::Ref<const Eigen::VectorXd>& x, std::uint64_t n);
LiftedState real_multi_step(const RealOperator& op, const KoopmanModel& model, const LiftedState& x,
                            std::uint64_t n);

/// Lambda~ = (1 - mu) Lambda, 0 <= mu < 1.
KoopmanModel apply_damping(const KoopmanModel& model, double mu);

/// sum_{t=1}^N lambda^t for one eigenvalue.
std::complex<double> propagator_sum(std::complex<double> lambda, std::uint64_t n);

/// Per-eigenvalue propagator sums of a model.
Eigen::VectorXcd propagator_sum(const KoopmanModel& model, std::uint64_t n);

}  // namespace koopdmd

#endif
