// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_METRICS_HPP
#define KOOPDMD_METRICS_HPP

#include <Eigen/Dense>

#include <vector>

namespace koopdmd {

/// 100 |pred - ref|^2 / |ref - rest|^2 for one frame. Lifted states are
/// already relative to rest, so `rest` defaults to the zero state.
/// Returns 0 when both errors vanish and +inf for error against a rest reference.
double percentage_mse(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& ref);
double percentage_mse(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& ref,
                      const Eigen::Ref<const Eigen::VectorXd>& rest);

double mean(const std::vector<double>& values);
double max_value(const std::vector<double>& values);

/// |a - b| / |b|, or |a - b| when b is zero.
double relative_error(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// First index from which every later value stays at or below half the peak.
/// Returns values.size() when the sequence never settles below half.
std::size_t half_life(const std::vector<double>& values);

}  // namespace koopdmd

#endif
