// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace koopdmd;

TEST(Metrics, PercentageMseDefinition) {
  Eigen::VectorXd ref(2);
  ref << 3.0, 4.0;
  Eigen::VectorXd pred(2);
  pred << 3.0, 3.0;
  EXPECT_DOUBLE_EQ(percentage_mse(pred, ref), 100.0 * 1.0 / 25.0);
  Eigen::VectorXd rest(2);
  rest << 3.0, 0.0;
  EXPECT_DOUBLE_EQ(percentage_mse(pred, ref, rest), 100.0 * 1.0 / 16.0);
  EXPECT_EQ(percentage_mse(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)), 0.0);
  EXPECT_TRUE(std::isinf(percentage_mse(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2))));
}

TEST(Metrics, MeanMaxAndRelativeError) {
  EXPECT_DOUBLE_EQ(mean({1.0, 2.0, 6.0}), 3.0);
  EXPECT_DOUBLE_EQ(max_value({1.0, 7.0, 6.0}), 7.0);
  Eigen::VectorXd a(2);
  a << 1.0, 1.0;
  Eigen::VectorXd b(2);
  b << 1.0, 0.0;
  EXPECT_DOUBLE_EQ(relative_error(a, b), 1.0);
  EXPECT_DOUBLE_EQ(relative_error(a, Eigen::VectorXd::Zero(2)), std::sqrt(2.0));
}

TEST(Metrics, HalfLifeIsTheSettlingIndex) {
  EXPECT_EQ(half_life({}), 0u);
  EXPECT_EQ(half_life({4.0, 3.0, 2.0, 1.0}), 2u);
  // An oscillating signal settles only after its last excursion above half the peak.
  EXPECT_EQ(half_life({4.0, 0.5, 3.0, 0.5, 2.5, 1.0, 0.1}), 5u);
  EXPECT_EQ(half_life({1.0, 1.0, 1.0}), 3u);
  std::vector<double> decay;
  for (int t = 0; t < 100; ++t) decay.push_back(std::pow(0.9, t));
  // 0.9^t <= 0.5 first at t = 7.
  EXPECT_EQ(half_life(decay), 7u);
}
