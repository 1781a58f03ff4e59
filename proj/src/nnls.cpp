// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/nnls.hpp"

#include "koopdmd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace koopdmd {

namespace {

// Unconstrained least squares restricted to the passive columns.
Eigen::VectorXd passive_solve(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& b,
                              const std::vector<bool>& passive) {
  const Eigen::Index k = M.cols();
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
  if (cols.empty()) return s;
  Eigen::MatrixXd sub(M.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = M.col(cols[c]);
  const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(b);
  for (std::size_t c = 0; c < cols.size(); ++c) s[cols[c]] = sol[static_cast<Eigen::Index>(c)];
  return s;
}

}  // namespace

NnlsResult nnls(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& b,
                const NnlsOptions& opts) {
  const Eigen::Index m = M.rows();
  const Eigen::Index k = M.cols();
  if (m < 1 || k < 1) throw Error(ErrorCode::Dimension, "nnls needs a non-empty matrix");
  if (b.size() != m) throw Error(ErrorCode::Dimension, "nnls: right-hand side length mismatch");

  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  std::vector<bool> blocked(static_cast<std::size_t>(k), false);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd w = M.transpose() * (b - M * x);

  int iterations = 0;
  while (true) {
    // Most promising inactive variable.
    Eigen::Index t = -1;
    double best = opts.tolerance;
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (!passive[ju] && !blocked[ju] && w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) break;
    if (++iterations > opts.max_iterations) {
      const double res = (M * x - b).norm();
      throw Error(ErrorCode::Convergence,
                  "nnls: iteration cap exceeded (residual " + std::to_string(res) + ")");
    }

    passive[static_cast<std::size_t>(t)] = true;
    Eigen::VectorXd s = passive_solve(M, b, passive);
    if (s[t] <= 0.0) {
      // Round-off: the gradient says t should enter but the subproblem disagrees.
      passive[static_cast<std::size_t>(t)] = false;
      blocked[static_cast<std::size_t>(t)] = true;
      continue;
    }

    // Step back toward feasibility while some passive variable went non-positive.
    int inner = 0;
    while (true) {
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
          alpha = std::min(alpha, x[j] / (x[j] - s[j]));
        }
      }
      if (!std::isfinite(alpha)) break;
      if (++inner > opts.max_iterations) {
        throw Error(ErrorCode::Convergence, "nnls: inner loop did not terminate");
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < k; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (passive[ju] && x[j] <= 1e-15 * (1.0 + x.cwiseAbs().maxCoeff())) {
          passive[ju] = false;
          x[j] = 0.0;
        }
      }
      s = passive_solve(M, b, passive);
    }
    x = s;
    w = M.transpose() * (b - M * x);
    std::fill(blocked.begin(), blocked.end(), false);
  }

  NnlsResult out;
  out.x = x;
  out.residual_norm = (M * x - b).norm();
  out.iterations = iterations;
  return out;
}

}  // namespace koopdmd
