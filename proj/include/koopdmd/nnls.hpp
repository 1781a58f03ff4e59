// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_NNLS_HPP
#define KOOPDMD_NNLS_HPP

#include <Eigen/Dense>

namespace koopdmd {

struct NnlsOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// min |M x - b|^2 subject to x >= 0, Lawson-Hanson active set.
/// Throws Error(Convergence) when the iteration cap is hit.
NnlsResult nnls(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& b,
                const NnlsOptions& opts = {});

}  // namespace koopdmd

#endif
