// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/metrics.hpp"

#include "koopdmd/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace koopdmd {

double percentage_mse(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& ref) {
  if (pred.size() != ref.size()) throw Error(ErrorCode::Dimension, "percentage_mse: length mismatch");
  const double num = (pred - ref).squaredNorm();
  const double den = ref.squaredNorm();
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return 100.0 * num / den;
}

double percentage_mse(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& ref,
                      const Eigen::Ref<const Eigen::VectorXd>& rest) {
  if (rest.size() != ref.size()) throw Error(ErrorCode::Dimension, "percentage_mse: rest length mismatch");
  return percentage_mse(Eigen::VectorXd(pred - rest), Eigen::VectorXd(ref - rest));
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double max_value(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return *std::max_element(values.begin(), values.end());
}

double relative_error(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::Dimension, "relative_error: length mismatch");
  const double nb = b.norm();
  const double diff = (a - b).norm();
  return nb > 0.0 ? diff / nb : diff;
}

std::size_t half_life(const std::vector<double>& values) {
  if (values.empty()) return 0;
  const double peak = *std::max_element(values.begin(), values.end());
  const double half = 0.5 * peak;
  std::size_t settle = values.size();
  for (std::size_t i = values.size(); i-- > 0;) {
    if (values[i] > half) break;
    settle = i;
  }
  return settle;
}

}  // namespace koopdmd
