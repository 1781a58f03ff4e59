// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_DMDFIT_HPP
#define KOOPDMD_DMDFIT_HPP

#include "koopdmd/snapshot.hpp"
#include "koopdmd/statespace.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace koopdmd {

/// How many singular values to keep.
///
/// Energy: smallest r whose cumulative sigma^2 reaches `energy` of the total.
/// Fixed: exactly `rank`. Both never keep sigma_i <= floor * sigma_1.
struct RankPolicy {
  enum class Kind { Energy, Fixed };
  Kind kind = Kind::Energy;
  double energy = 0.9999;
  double floor = 1e-10;
  std::size_t rank = 0;

  static RankPolicy with_energy(double e) { return RankPolicy{Kind::Energy, e, 1e-10, 0}; }
  static RankPolicy fixed(std::size_t r) { return RankPolicy{Kind::Fixed, 1.0, 1e-10, r}; }
};

struct FitOptions {
  RankPolicy rank;
  /// Rescale eigenvalues with |lambda| > 1 onto the unit circle.
  bool clamp_unit_disk = true;
};

struct TruncatedSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;
  /// All singular values of the input, before truncation.
  Eigen::VectorXd all_sigma;
};

struct ShiftPairs {
  Eigen::MatrixXd X;
  Eigen::MatrixXd X_next;
};

class RealOperator;

/// Low-rank Koopman approximation K ~ Phi Lambda Phi^+.
///
/// Immutable. Copies are cheap and share the mode factorization; edits
/// (damping, step rescaling) produce new models that reuse the modes.
class KoopmanModel {
public:
  KoopmanModel() = default;

  /// Checks the basis/mode invariants; throws Error(Dimension) on shape mismatch.
  KoopmanModel(Eigen::MatrixXcd modes, Eigen::VectorXcd eigenvalues, Eigen::MatrixXd left_basis,
               Eigen::MatrixXcd reduced_eigvecs, double h);

  bool valid() const noexcept { return static_cast<bool>(basis_); }
  Eigen::Index dim() const noexcept;
  Eigen::Index rank() const noexcept { return eigenvalues_.size(); }
  double h() const noexcept { return h_; }

  const Eigen::MatrixXcd& modes() const;
  const Eigen::VectorXcd& eigenvalues() const noexcept { return eigenvalues_; }
  const Eigen::MatrixXd& left_basis() const;
  const Eigen::MatrixXcd& reduced_eigvecs() const;

  /// Same modes, new eigenvalues and step size.
  KoopmanModel with_eigenvalues(Eigen::VectorXcd eigenvalues, double h) const;

  /// Least-squares coordinates z = argmin |Phi z - x| (minimum norm if Phi is rank deficient).
  Eigen::VectorXcd project(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Real part of Phi z.
  Eigen::VectorXd lift_coordinates(const Eigen::Ref<const Eigen::VectorXcd>& z) const;

  /// Numerical rank of Phi as seen by the least-squares solver.
  Eigen::Index mode_rank() const;

  /// Realified operator, built on first use and cached for this model value.
  std::shared_ptr<const RealOperator> real_operator() const;

private:
  struct Basis;
  struct RealCache;

  std::shared_ptr<const Basis> basis_;
  std::shared_ptr<RealCache> real_cache_;
  Eigen::VectorXcd eigenvalues_;
  double h_ = 0.0;
};

struct FitReport {
  std::size_t rank = 0;
  Eigen::VectorXd singular_values;
  /// Cumulative sigma^2 fraction for every singular value of the input matrix.
  Eigen::VectorXd energy_profile;
  /// |X'_t - K(X_t + F_t)| per training column.
  std::vector<double> step_residuals;
  /// |X' - K(X + F)|_F / |X'|_F.
  double relative_step_residual = 0.0;
  /// Mean |x - reconstruct(x)| / |x| over the nonzero training inputs.
  double mean_reconstruction_error = 0.0;
  double max_abs_eigenvalue = 0.0;
  double max_abs_eigenvalue_raw = 0.0;
  std::size_t clamped_count = 0;
};

struct FitResult {
  KoopmanModel model;
  FitReport report;
};

ShiftPairs build_shift_pairs(const SnapshotSet& snaps);

TruncatedSvd truncated_svd(const Eigen::Ref<const Eigen::MatrixXd>& X, const RankPolicy& policy);

Eigen::MatrixXd reduced_operator(const Eigen::Ref<const Eigen::MatrixXd>& X_next, const TruncatedSvd& svd);

/// Eigenpairs sorted by descending |lambda|, then descending imaginary part;
/// conjugate pairs stay adjacent with the positive imaginary member first.
std::pair<Eigen::MatrixXcd, Eigen::VectorXcd> eigendecompose(const Eigen::Ref<const Eigen::MatrixXd>& K_reduced);

/// DMD on explicit data matrices: X_next ~ K X.
FitResult fit_matrices(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& X_next,
                       double h, const FitOptions& opts = {});

/// DMD on a trajectory. Forced snapshot sets are fitted as X_{t+1} ~ K (X_t + F_t).
FitResult fit(const SnapshotSet& snaps, const FitOptions& opts = {});

Eigen::VectorXcd project(const KoopmanModel& model, const LiftedState& x);

LiftedState reconstruct(const KoopmanModel& model, const LiftedState& x);

/// |x - reconstruct(x)| / |x|, 0 for the zero vector.
double reconstruction_error(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Receives non-fatal numerical warnings (ill-conditioned modes, aliasing).
/// The default handler writes to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace koopdmd

#endif
