// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/koopstep.hpp"

#include "koopdmd/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace koopdmd {

namespace {

using cd = std::complex<double>;

constexpr double kSingularLog = 1e-14;
constexpr double kAliasMargin = 0.1;
constexpr double kNearOne = 1e-8;

cd eigen_power(cd lambda, double n) {
  if (n == 0.0) return cd(1.0, 0.0);
  const double mag = std::abs(lambda);
  if (mag == 0.0) return cd(0.0, 0.0);
  return std::polar(std::pow(mag, n), n * std::arg(lambda));
}

// log(lambda) for lambda near 1 without cancellation in the real part.
cd log_near_one(cd lambda) {
  const double dr = lambda.real() - 1.0;
  const double im = lambda.imag();
  const double mag2_minus_1 = dr * (lambda.real() + 1.0) + im * im;
  return cd(0.5 * std::log1p(mag2_minus_1), std::atan2(im, lambda.real()));
}

// e^w - 1 without cancellation for small |w|.
cd expm1_complex(cd w) {
  const double a = w.real();
  const double b = w.imag();
  const double s = std::sin(0.5 * b);
  return cd(std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b));
}

}  // namespace

RealOperator::RealOperator(Eigen::MatrixXd k_real, Eigen::MatrixXd modes_realified, ProjectionOrder order)
    : k_real_(std::move(k_real)), modes_realified_(std::move(modes_realified)), order_(order) {
  if (k_real_.rows() != k_real_.cols() || k_real_.rows() % 2 != 0 || modes_realified_.cols() != k_real_.cols()) {
    throw Error(ErrorCode::Dimension, "real operator parts have inconsistent shapes");
  }
}

Eigen::MatrixXd RealOperator::power(std::uint64_t n) const {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(k_real_.rows(), k_real_.cols());
  Eigen::MatrixXd base = k_real_;
  bool first = true;
  while (n > 0) {
    if (n & 1U) {
      if (first) {
        result = base;
        first = false;
      } else {
        result = result * base;
      }
    }
    n >>= 1U;
    if (n > 0) base = base * base;
  }
  return result;
}

Eigen::VectorXd RealOperator::apply(const Eigen::Ref<const Eigen::VectorXd>& z_real, std::uint64_t n) const {
  if (z_real.size() != k_real_.rows()) throw Error(ErrorCode::Dimension, "realified coordinate length mismatch");
  if (n == 0) return z_real;
  if (n == 1) return k_real_ * z_real;
  return power(n) * z_real;
}

Eigen::VectorXd RealOperator::realify_coordinates(const Eigen::Ref<const Eigen::VectorXcd>& z) {
  Eigen::VectorXd out(2 * z.size());
  out.head(z.size()) = z.real();
  out.tail(z.size()) = z.imag();
  return out;
}

Eigen::VectorXcd RealOperator::complexify_coordinates(const Eigen::Ref<const Eigen::VectorXd>& z_real) {
  const Eigen::Index r = z_real.size() / 2;
  Eigen::VectorXcd z(r);
  z.real() = z_real.head(r);
  z.imag() = z_real.tail(r);
  return z;
}

Eigen::VectorXd step(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::VectorXcd z = model.project(x);
  return model.lift_coordinates(model.eigenvalues().cwiseProduct(z));
}

LiftedState step(const KoopmanModel& model, const LiftedState& x) {
  return LiftedState(step(model, x.values()));
}

LiftedState step_forced(const KoopmanModel& model, const LiftedState& x, const ForceLift& force) {
  if (std::abs(force.h() - model.h()) > 1e-12 * model.h()) {
    throw Error(ErrorCode::StepSize, "force was lifted with h=" + std::to_string(force.h()) +
                                         " but the model steps with h=" + std::to_string(model.h()));
  }
  if (force.values().size() != x.values().size()) {
    throw Error(ErrorCode::Dimension, "force and state lengths differ");
  }
  return LiftedState(step(model, Eigen::VectorXd(x.values() + force.values())));
}

Eigen::VectorXd multi_step(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) throw Error(ErrorCode::Domain, "multi_step needs a finite N >= 0");
  if (n == 1.0) return step(model, x);
  const Eigen::VectorXcd z = model.project(x);
  Eigen::VectorXcd zn(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) zn[i] = eigen_power(model.eigenvalues()[i], n) * z[i];
  return model.lift_coordinates(zn);
}

LiftedState multi_step(const KoopmanModel& model, const LiftedState& x, double n) {
  return LiftedState(multi_step(model, x.values(), n));
}

KoopmanModel rescale_timestep(const KoopmanModel& model, double h_new) {
  if (!(h_new > 0.0) || !std::isfinite(h_new)) throw Error(ErrorCode::Domain, "rescale_timestep needs h' > 0");
  const Eigen::VectorXcd& lambda = model.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda[i]) < kSingularLog) {
      throw Error(ErrorCode::SingularLog, "eigenvalue " + std::to_string(i) + " is numerically zero; log undefined");
    }
  }
  if (h_new == model.h()) return model.with_eigenvalues(lambda, h_new);

  const double ratio = h_new / model.h();
  Eigen::VectorXcd out(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (ratio > 1.0 && std::abs(std::arg(lambda[i])) > std::numbers::pi - kAliasMargin) {
      warn("eigenvalue " + std::to_string(i) + " lies near the negative real axis; rescaling to a larger step aliases");
    }
    out[i] = std::exp(ratio * std::log(lambda[i]));
  }
  return model.with_eigenvalues(std::move(out), h_new);
}

RealOperator realify(const KoopmanModel& model, ProjectionOrder order) {
  const Eigen::Index d = model.dim();
  const Eigen::Index r = model.rank();
  const Eigen::MatrixXd A = model.modes().real();
  const Eigen::MatrixXd B = model.modes().imag();

  Eigen::MatrixXd phi_r(2 * d, 2 * r);
  phi_r << A, -B, B, A;

  Eigen::MatrixXd lambda_r = Eigen::MatrixXd::Zero(2 * r, 2 * r);
  const Eigen::VectorXd C = model.eigenvalues().real();
  const Eigen::VectorXd D = model.eigenvalues().imag();
  lambda_r.topLeftCorner(r, r) = C.asDiagonal();
  lambda_r.topRightCorner(r, r) = Eigen::VectorXd(-D).asDiagonal();
  lambda_r.bottomLeftCorner(r, r) = D.asDiagonal();
  lambda_r.bottomRightCorner(r, r) = C.asDiagonal();

  // P Phi_R keeps the real physical block and zeroes the imaginary one.
  Eigen::MatrixXd p_phi = Eigen::MatrixXd::Zero(2 * d, 2 * r);
  p_phi.topRows(d) = phi_r.topRows(d);

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi_r);
  if (cod.rank() < 2 * r) {
    warn("realified mode matrix is rank deficient (rank " + std::to_string(cod.rank()) + " of " +
         std::to_string(2 * r) + ")");
  }
  Eigen::MatrixXd k_real;
  if (order == ProjectionOrder::AfterPropagation) {
    k_real = cod.solve(Eigen::MatrixXd(p_phi * lambda_r));
  } else {
    k_real = lambda_r * cod.solve(p_phi);
  }
  return RealOperator(std::move(k_real), std::move(phi_r), order);
}

RealStepResult real_multi_step_detail(const RealOperator& op, const KoopmanModel& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& x, std::uint64_t n) {
  if (op.rank() != model.rank() || op.modes_realified().rows() != 2 * model.dim()) {
    throw Error(ErrorCode::Dimension, "real operator was not built from this model");
  }
  const Eigen::VectorXd z_real = RealOperator::realify_coordinates(model.project(x));
  const Eigen::VectorXd zn = op.apply(z_real, n);
  const Eigen::Index d = model.dim();
  const Eigen::MatrixXd& phi_r = op.modes_realified();
  RealStepResult out;
  out.state = phi_r.topRows(d) * zn;
  out.imaginary_residue = (phi_r.bottomRows(d) * zn).norm();
  return out;
}

Eigen::VectorXd real_multi_step(const RealOperator& op, const KoopmanModel& model,
                                const Eigen::Ref<const Eigen::VectorXd>& x, std::uint64_t n) {
  return real_multi_step_detail(op, model, x, n).state;
}

LiftedState real_multi_step(const RealOperator& op, const KoopmanModel& model, const LiftedState& x,
                            std::uint64_t n) {
  return LiftedState(real_multi_step(op, model, x.values(), n));
}

KoopmanModel apply_damping(const KoopmanModel& model, double mu) {
  if (!(mu >= 0.0 && mu < 1.0)) throw Error(ErrorCode::Domain, "damping fraction must lie in [0, 1)");
  return model.with_eigenvalues(model.eigenvalues() * (1.0 - mu), model.h());
}

std::complex<double> propagator_sum(std::complex<double> lambda, std::uint64_t n) {
  if (n == 0) return cd(0.0, 0.0);
  const cd delta = lambda - 1.0;
  const double nd = static_cast<double>(n);
  const double dist = std::abs(delta);
  if (dist == 0.0) return cd(nd, 0.0);
  if (dist <= kNearOne && nd * dist <= 0.5) {
    // N + C(N+1,2) d + C(N+1,3) d^2 + ...
    cd sum(nd, 0.0);
    double binom = nd + 1.0;
    cd dpow(1.0, 0.0);
    for (int k = 2; k < 64; ++k) {
      binom *= (nd + 2.0 - k) / k;
      dpow *= delta;
      const cd term = binom * dpow;
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  if (std::abs(lambda) == 0.0) return cd(0.0, 0.0);
  const cd log_lambda = dist < 0.5 ? log_near_one(lambda) : std::log(lambda);
  return lambda * expm1_complex(nd * log_lambda) / delta;
}

Eigen::VectorXcd propagator_sum(const KoopmanModel& model, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::Domain, "propagator_sum needs N >= 1");
  Eigen::VectorXcd out(model.rank());
  for (Eigen::Index i = 0; i < model.rank(); ++i) out[i] = propagator_sum(model.eigenvalues()[i], n);
  return out;
}

}  // namespace koopdmd
