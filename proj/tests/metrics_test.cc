/*
 * Copyright 2026 The SMMD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "smmd/metrics.h"

#include <gtest/gtest.h>

#include <random>

#include "smmd/error.h"

namespace smmd::metrics {
namespace {

TEST(AucTest, Examples) {
  EXPECT_DOUBLE_EQ(Auc(Eigen::Vector4d(2, 1, -1, -2), Eigen::Vector4d(1, 1, -1, -1)), 1.0);
  EXPECT_DOUBLE_EQ(Auc(Eigen::Vector4d::Constant(0.3), Eigen::Vector4d(1, -1, 1, -1)), 0.5);
  EXPECT_DOUBLE_EQ(Auc(Eigen::Vector3d(0.9, 0.8, 0.3), Eigen::Vector3d(1, -1, 1)), 0.5);
  EXPECT_DOUBLE_EQ(Auc(Eigen::Vector4d(-2, -1, 1, 2), Eigen::Vector4d(1, 1, -1, -1)), 0.0);
}

TEST(AucTest, SingleClassIsUndefined) {
  EXPECT_THROW(Auc(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1)), Error);
  EXPECT_THROW(AucBruteForce(Eigen::Vector2d(1, 2), Eigen::Vector2d(-1, -1)), Error);
}

TEST(AucTest, MatchesPairCounting) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 499);
    VectorXd s(n), y(n);
    for (int i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      s(i) = static_cast<double>(gen() % 7) - 3.0;
      y(i) = i == 0 ? 1.0 : i == 1 ? -1.0 : (gen() % 3 == 0 ? 1.0 : -1.0);
    }
    ASSERT_NEAR(Auc(s, y), AucBruteForce(s, y), 1e-12) << "n=" << n;
  }
}

TEST(ThresholdMetricsTest, PerfectSeparation) {
  const Metrics m = Score(Eigen::Vector4d(2, 1, -1, -2), Eigen::Vector4d(1, 1, -1, -1));
  EXPECT_DOUBLE_EQ(m.auc, 1.0);
  EXPECT_DOUBLE_EQ(m.fscore, 1.0);
  EXPECT_DOUBLE_EQ(m.precision, 1.0);
}

TEST(ThresholdMetricsTest, HandComputed) {
  // Predictions at 0: + + - + ; truth: + - + +.
  const Confusion c = Confuse(Eigen::Vector4d(1, 2, -1, 3), Eigen::Vector4d(1, -1, 1, 1));
  EXPECT_EQ(c.tp, 2);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_EQ(c.tn, 0);
  EXPECT_DOUBLE_EQ(Precision(c), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(FScore(c), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(Precision(Confuse(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, -1))), 0.0);
}

TEST(ThresholdMetricsTest, RangeProperty) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd s(40), y(40);
    for (int i = 0; i < 40; ++i) {
      s(i) = normal(gen);
      y(i) = i % 2 ? 1.0 : -1.0;
    }
    const Metrics m = Score(s, y, normal(gen));
    for (double v : {m.auc, m.fscore, m.precision}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

}  // namespace
}  // namespace smmd::metrics
