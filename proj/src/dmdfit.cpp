// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/dmdfit.hpp"

#include "koopdmd/error.hpp"
#include "koopdmd/koopstep.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>

namespace koopdmd {

namespace {

std::mutex g_warning_mutex;
WarningHandler g_warning_handler;

constexpr double kMaxEigvecCondition = 1e12;

}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(g_warning_mutex);
  g_warning_handler = std::move(handler);
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_warning_mutex);
  if (g_warning_handler) {
    g_warning_handler(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

struct KoopmanModel::Basis {
  Eigen::MatrixXcd modes;
  Eigen::MatrixXd left_basis;
  Eigen::MatrixXcd reduced_eigvecs;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> solver;
};

struct KoopmanModel::RealCache {
  std::mutex mutex;
  std::shared_ptr<const RealOperator> op;
};

KoopmanModel::KoopmanModel(Eigen::MatrixXcd modes, Eigen::VectorXcd eigenvalues, Eigen::MatrixXd left_basis,
                           Eigen::MatrixXcd reduced_eigvecs, double h)
    : real_cache_(std::make_shared<RealCache>()), eigenvalues_(std::move(eigenvalues)), h_(h) {
  const Eigen::Index r = eigenvalues_.size();
  if (r == 0) throw Error(ErrorCode::Dimension, "Koopman model needs rank >= 1");
  if (modes.cols() != r || left_basis.cols() != r || reduced_eigvecs.rows() != r || reduced_eigvecs.cols() != r ||
      left_basis.rows() != modes.rows()) {
    throw Error(ErrorCode::Dimension, "Koopman model parts have inconsistent shapes");
  }
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "Koopman model needs h > 0");
  if (!eigenvalues_.allFinite() || !modes.allFinite()) {
    throw Error(ErrorCode::Domain, "Koopman model has non-finite entries");
  }

  auto basis = std::make_shared<Basis>();
  basis->modes = std::move(modes);
  basis->left_basis = std::move(left_basis);
  basis->reduced_eigvecs = std::move(reduced_eigvecs);
  basis->solver.compute(basis->modes);
  if (basis->solver.rank() < r) {
    warn("mode matrix is rank deficient (rank " + std::to_string(basis->solver.rank()) + " of " +
         std::to_string(r) + "); projections use the minimum-norm solution");
  }
  basis_ = std::move(basis);
}

Eigen::Index KoopmanModel::dim() const noexcept { return basis_ ? basis_->modes.rows() : 0; }

const Eigen::MatrixXcd& KoopmanModel::modes() const { return basis_->modes; }
const Eigen::MatrixXd& KoopmanModel::left_basis() const { return basis_->left_basis; }
const Eigen::MatrixXcd& KoopmanModel::reduced_eigvecs() const { return basis_->reduced_eigvecs; }

KoopmanModel KoopmanModel::with_eigenvalues(Eigen::VectorXcd eigenvalues, double h) const {
  if (eigenvalues.size() != rank()) throw Error(ErrorCode::Dimension, "eigenvalue count does not match rank");
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "Koopman model needs h > 0");
  KoopmanModel out;
  out.basis_ = basis_;
  out.real_cache_ = std::make_shared<RealCache>();
  out.eigenvalues_ = std::move(eigenvalues);
  out.h_ = h;
  return out;
}

Eigen::VectorXcd KoopmanModel::project(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) {
    throw Error(ErrorCode::Dimension,
                "state length " + std::to_string(x.size()) + " does not match model dimension " + std::to_string(dim()));
  }
  return basis_->solver.solve(x.cast<std::complex<double>>());
}

Eigen::VectorXd KoopmanModel::lift_coordinates(const Eigen::Ref<const Eigen::VectorXcd>& z) const {
  if (z.size() != rank()) throw Error(ErrorCode::Dimension, "coordinate length does not match rank");
  return (basis_->modes * z).real();
}

Eigen::Index KoopmanModel::mode_rank() const { return basis_->solver.rank(); }

std::shared_ptr<const RealOperator> KoopmanModel::real_operator() const {
  std::lock_guard<std::mutex> lock(real_cache_->mutex);
  if (!real_cache_->op) {
    real_cache_->op = std::make_shared<const RealOperator>(realify(*this));
  }
  return real_cache_->op;
}

ShiftPairs build_shift_pairs(const SnapshotSet& snaps) {
  if (snaps.states.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least 2 snapshots to build shift pairs");
  }
  const Eigen::Index d = snaps.dim();
  const auto T = static_cast<Eigen::Index>(snaps.states.size()) - 1;
  ShiftPairs out{Eigen::MatrixXd(d, T), Eigen::MatrixXd(d, T)};
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& a = snaps.states[static_cast<std::size_t>(t)].values();
    const auto& b = snaps.states[static_cast<std::size_t>(t) + 1].values();
    if (a.size() != d || b.size() != d) throw Error(ErrorCode::Dimension, "snapshot states have mixed dimensions");
    out.X.col(t) = a;
    out.X_next.col(t) = b;
  }
  return out;
}

TruncatedSvd truncated_svd(const Eigen::Ref<const Eigen::MatrixXd>& X, const RankPolicy& policy) {
  if (X.size() == 0 || X.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::DegenerateData, "snapshot matrix is all zeros");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();

  Eigen::Index above_floor = 0;
  while (above_floor < s.size() && s[above_floor] > policy.floor * s[0]) ++above_floor;

  Eigen::Index r = 0;
  if (policy.kind == RankPolicy::Kind::Fixed) {
    if (policy.rank == 0) throw Error(ErrorCode::Domain, "fixed rank must be >= 1");
    r = std::min<Eigen::Index>(static_cast<Eigen::Index>(policy.rank), above_floor);
  } else {
    if (!(policy.energy > 0.0 && policy.energy <= 1.0)) {
      throw Error(ErrorCode::Domain, "energy target must lie in (0, 1]");
    }
    const double total = s.squaredNorm();
    double acc = 0.0;
    while (r < above_floor) {
      acc += s[r] * s[r];
      ++r;
      if (acc >= policy.energy * total) break;
    }
  }

  TruncatedSvd out;
  out.U = svd.matrixU().leftCols(r);
  out.sigma = s.head(r);
  out.V = svd.matrixV().leftCols(r);
  out.all_sigma = s;
  return out;
}

Eigen::MatrixXd reduced_operator(const Eigen::Ref<const Eigen::MatrixXd>& X_next, const TruncatedSvd& svd) {
  if (X_next.rows() != svd.U.rows() || X_next.cols() != svd.V.rows()) {
    throw Error(ErrorCode::Dimension, "reduced_operator: shapes of X' and the SVD factors disagree");
  }
  return (svd.U.transpose() * X_next * svd.V) * svd.sigma.cwiseInverse().asDiagonal();
}

std::pair<Eigen::MatrixXcd, Eigen::VectorXcd> eigendecompose(const Eigen::Ref<const Eigen::MatrixXd>& K_reduced) {
  const Eigen::Index r = K_reduced.rows();
  if (r == 0 || K_reduced.cols() != r) throw Error(ErrorCode::Dimension, "eigendecompose needs a square matrix");

  Eigen::EigenSolver<Eigen::MatrixXd> es(K_reduced, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::IllConditioned, "eigenvalue iteration failed");
  const Eigen::VectorXcd vals = es.eigenvalues();
  const Eigen::MatrixXcd vecs = es.eigenvectors();

  // Group conjugate pairs so they move together; positive imaginary member first.
  struct Cluster {
    Eigen::Index first;
    Eigen::Index second;  // -1 for real eigenvalues
  };
  std::vector<Cluster> clusters;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (vals[i].imag() != 0.0 && i + 1 < r && vals[i + 1] == std::conj(vals[i])) {
      clusters.push_back(vals[i].imag() > 0.0 ? Cluster{i, i + 1} : Cluster{i + 1, i});
      ++i;
    } else {
      clusters.push_back(Cluster{i, -1});
    }
  }
  std::stable_sort(clusters.begin(), clusters.end(), [&](const Cluster& a, const Cluster& b) {
    const double ma = std::abs(vals[a.first]);
    const double mb = std::abs(vals[b.first]);
    if (ma != mb) return ma > mb;
    return vals[a.first].imag() > vals[b.first].imag();
  });

  Eigen::MatrixXcd phi(r, r);
  Eigen::VectorXcd lambda(r);
  Eigen::Index k = 0;
  for (const Cluster& c : clusters) {
    lambda[k] = vals[c.first];
    phi.col(k++) = vecs.col(c.first);
    if (c.second >= 0) {
      lambda[k] = vals[c.second];
      phi.col(k++) = vecs.col(c.second);
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXcd> cond_svd(phi);
  const Eigen::VectorXd sv = cond_svd.singularValues();
  const double smin = sv[sv.size() - 1];
  if (!(smin > 0.0) || sv[0] / smin > kMaxEigvecCondition) {
    throw Error(ErrorCode::IllConditioned, "reduced operator is defective: eigenvector basis condition exceeds 1e12");
  }
  return {std::move(phi), std::move(lambda)};
}

FitResult fit_matrices(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& X_next,
                       double h, const FitOptions& opts) {
  if (X.rows() != X_next.rows() || X.cols() != X_next.cols()) {
    throw Error(ErrorCode::Dimension, "X and X' shapes differ");
  }
  if (X.cols() < 1) throw Error(ErrorCode::InsufficientData, "need at least one shift pair");
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "fit needs h > 0");

  const TruncatedSvd svd = truncated_svd(X, opts.rank);
  const Eigen::MatrixXd K_reduced = reduced_operator(X_next, svd);
  auto [phi, lambda] = eigendecompose(K_reduced);

  FitReport report;
  report.rank = static_cast<std::size_t>(svd.sigma.size());
  report.singular_values = svd.all_sigma;
  report.energy_profile.resize(svd.all_sigma.size());
  {
    const double total = svd.all_sigma.squaredNorm();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < svd.all_sigma.size(); ++i) {
      acc += svd.all_sigma[i] * svd.all_sigma[i];
      report.energy_profile[i] = acc / total;
    }
  }
  report.max_abs_eigenvalue_raw = lambda.cwiseAbs().maxCoeff();
  if (opts.clamp_unit_disk) {
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      const double mag = std::abs(lambda[i]);
      if (mag > 1.0) {
        lambda[i] /= mag;
        ++report.clamped_count;
      }
    }
  }
  report.max_abs_eigenvalue = lambda.cwiseAbs().maxCoeff();

  Eigen::MatrixXcd modes = svd.U.cast<std::complex<double>>() * phi;
  KoopmanModel model(std::move(modes), std::move(lambda), svd.U, std::move(phi), h);

  // One-step residuals through the same stepping path the engine uses.
  report.step_residuals.resize(static_cast<std::size_t>(X.cols()));
  double err2 = 0.0;
  double recon_sum = 0.0;
  std::size_t recon_count = 0;
  for (Eigen::Index t = 0; t < X.cols(); ++t) {
    const Eigen::VectorXcd z = model.project(X.col(t));
    const Eigen::VectorXd pred = model.lift_coordinates(model.eigenvalues().cwiseProduct(z));
    const double e = (X_next.col(t) - pred).norm();
    report.step_residuals[static_cast<std::size_t>(t)] = e;
    err2 += e * e;
    const double nx = X.col(t).norm();
    if (nx > 0.0) {
      recon_sum += (X.col(t) - model.lift_coordinates(z)).norm() / nx;
      ++recon_count;
    }
  }
  const double denom = X_next.norm();
  report.relative_step_residual = denom > 0.0 ? std::sqrt(err2) / denom : std::sqrt(err2);
  report.mean_reconstruction_error = recon_count ? recon_sum / static_cast<double>(recon_count) : 0.0;

  return FitResult{std::move(model), std::move(report)};
}

FitResult fit(const SnapshotSet& snaps, const FitOptions& opts) {
  snaps.validate();
  ShiftPairs pairs = build_shift_pairs(snaps);
  if (snaps.has_forcing()) {
    for (Eigen::Index t = 0; t < pairs.X.cols(); ++t) {
      pairs.X.col(t) += snaps.forcing[static_cast<std::size_t>(t)].values();
    }
  }
  return fit_matrices(pairs.X, pairs.X_next, snaps.h, opts);
}

Eigen::VectorXcd project(const KoopmanModel& model, const LiftedState& x) { return model.project(x.values()); }

LiftedState reconstruct(const KoopmanModel& model, const LiftedState& x) {
  return LiftedState(model.lift_coordinates(model.project(x.values())));
}

double reconstruction_error(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double nx = x.norm();
  if (nx == 0.0) return 0.0;
  return (x - model.lift_coordinates(model.project(x))).norm() / nx;
}

}  // namespace koopdmd
