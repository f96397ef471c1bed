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

#include "smmd/model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "smmd/error.h"

namespace smmd::model {
namespace {

NetworkArch SmallArch(int input = 3) {
  NetworkArch arch;
  arch.input_dim = input;
  arch.l1_layers = {5};
  arch.l2_layers = {4};
  return arch;
}

TEST(InitTest, DeterministicZeroBiases) {
  const auto a = InitNetwork(SmallArch(), 3);
  const auto b = InitNetwork(SmallArch(), 3);
  EXPECT_EQ(Flatten(a), Flatten(b));
  EXPECT_NE(Flatten(a), Flatten(InitNetwork(SmallArch(), 4)));
  for (const Layer& l : a.layers) EXPECT_TRUE(l.b.isZero(0.0));
  EXPECT_EQ(a.head_b, 0.0);
}

TEST(InitTest, WeightVarianceMatchesFanIn) {
  NetworkArch arch;
  arch.input_dim = 50;
  arch.l1_layers = {200};
  arch.l2_layers = {8};
  const auto p = InitNetwork(arch, 1);
  const auto& w = p.layers[0].w;  // 10,000 entries, fan_in 50
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / (w.size() - 1);
  EXPECT_NEAR(var, 1.0 / 50.0, 0.2 / 50.0);
}

TEST(ForwardTest, ZeroWeights) {
  auto p = InitNetwork(SmallArch(), 1);
  for (Layer& l : p.layers) l.w.setZero();
  p.head_w.setZero();
  const auto acts = Forward(p, MatrixXd::Random(6, 3));
  EXPECT_TRUE(acts.top().isZero(0.0));
  EXPECT_TRUE(acts.score.isZero(0.0));
  p.arch.activation = Activation::kTanh;
  EXPECT_TRUE(Forward(p, MatrixXd::Random(2, 3)).top().isZero(0.0));
}

TEST(ForwardTest, IdentityReluToy) {
  NetworkArch arch;
  arch.input_dim = 2;
  arch.l1_layers = {};
  arch.l2_layers = {2};
  auto p = InitNetwork(arch, 1);
  p.layers[0].w = Eigen::Matrix2d::Identity();
  MatrixXd x(1, 2);
  x << 1, -1;
  const auto acts = Forward(p, x);
  EXPECT_EQ(acts.top()(0, 0), 1.0);
  EXPECT_EQ(acts.top()(0, 1), 0.0);
}

TEST(ForwardTest, PureAndShapeChecked) {
  const auto p = InitNetwork(SmallArch(), 2);
  const MatrixXd x = MatrixXd::Random(4, 3);
  EXPECT_EQ(Forward(p, x).top(), Forward(p, x).top());
  EXPECT_THROW(Forward(p, MatrixXd::Random(4, 2)), Error);
}

TEST(TranslatorTest, WorkedValues) {
  MatrixXd hs(1, 2);
  hs << 1, 0;
  VectorXd y(1);
  y << 1;
  EXPECT_EQ(TranslatorScore(hs, y, Eigen::Vector2d(2, 0)), 2.0);
  EXPECT_EQ(TranslatorScore(MatrixXd::Zero(3, 2), VectorXd::Ones(3), Eigen::Vector2d(5, 1)), 0.0);
  MatrixXd pair(2, 2);
  pair << 1, 0, 1, 0;
  VectorXd ys(2);
  ys << 1, -1;
  EXPECT_EQ(TranslatorScore(pair, ys, Eigen::Vector2d(3, 7)), 0.0);
  EXPECT_THROW(TranslatorWeights(MatrixXd(0, 2), VectorXd(0)), Error);
}

TEST(TranslatorTest, LabelFlipNegates) {
  const MatrixXd hs = MatrixXd::Random(7, 3);
  VectorXd y = VectorXd::Ones(7);
  y(2) = y(5) = -1;
  const Eigen::Vector3d t(0.2, -1, 0.5);
  EXPECT_DOUBLE_EQ(TranslatorScore(hs, -y, t), -TranslatorScore(hs, y, t));
}

TEST(TaylorLossTest, WorkedValues) {
  EXPECT_NEAR(TaylorLogisticLoss(1, 0), 0.693147, 1e-6);
  EXPECT_NEAR(TaylorLogisticLoss(-1, 0), 0.693147, 1e-6);
  EXPECT_NEAR(TaylorLogisticLoss(1, 1), 0.318147, 1e-6);
  EXPECT_NEAR(ExactLogisticLoss(1, 1), 0.313262, 1e-6);
  EXPECT_LT(std::abs(TaylorLogisticLoss(1, 1) - ExactLogisticLoss(1, 1)), 0.005);
  EXPECT_DOUBLE_EQ(TaylorLogisticGrad(1, 0), -0.5);
  EXPECT_DOUBLE_EQ(TaylorLogisticGrad(-1, 2), 1.0);
}

TEST(TaylorLossTest, SymmetryBandAndDerivative) {
  for (double f = -1.0; f <= 1.0; f += 0.01) {
    for (double y : {-1.0, 1.0}) {
      EXPECT_DOUBLE_EQ(TaylorLogisticLoss(y, f), TaylorLogisticLoss(-y, -f));
      EXPECT_LE(std::abs(TaylorLogisticLoss(y, f) - ExactLogisticLoss(y, f)), 0.01);
      const double h = 1e-5;
      const double fd = (TaylorLogisticLoss(y, f + h) - TaylorLogisticLoss(y, f - h)) / (2 * h);
      const double g = TaylorLogisticGrad(y, f);
      EXPECT_LE(std::abs(fd - g), 1e-8 * std::max(1.0, std::abs(g)));
    }
  }
  EXPECT_EQ(ClipScore(12.0), 8.0);
  EXPECT_EQ(ClipScore(-9.0), -8.0);
}

TEST(L2RegTest, Values) {
  auto p = InitNetwork(SmallArch(), 1);
  auto zero = p;
  for (Layer& l : zero.layers) l.w.setZero();
  zero.head_w.setZero();
  ParamGrads g;
  EXPECT_EQ(L2Reg(zero, &g), 0.0);
  for (double v : Flatten(g)) EXPECT_EQ(v, 0.0);

  NetworkArch one;
  one.input_dim = 1;
  one.l1_layers = {};
  one.l2_layers = {1};
  auto q = InitNetwork(one, 1);
  q.layers[0].w(0, 0) = 3.0;
  q.head_w(0) = 0.0;
  EXPECT_DOUBLE_EQ(L2Reg(q, &g), 4.5);
  EXPECT_DOUBLE_EQ(g.layers[0].w(0, 0), 3.0);

  const double base = L2Reg(p);
  for (Layer& l : p.layers) l.w *= 2.0;
  p.head_w *= 2.0;
  EXPECT_NEAR(L2Reg(p), 4.0 * base, 1e-12);
}

TEST(BackwardTest, ZeroInputsGiveZeroGrads) {
  const auto p = InitNetwork(SmallArch(), 5);
  const auto acts = Forward(p, MatrixXd::Random(3, 3));
  const auto g = Backward(p, acts, VectorXd::Zero(3), {{1, MatrixXd::Zero(3, 4)}});
  for (double v : Flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(BackwardTest, HiddenOnlyLeavesHeadAlone) {
  const auto p = InitNetwork(SmallArch(), 5);
  const auto acts = Forward(p, MatrixXd::Random(3, 3));
  const auto g = Backward(p, acts, VectorXd(), {{1, MatrixXd::Ones(3, 4)}});
  EXPECT_TRUE(g.head_w.isZero(0.0));
  EXPECT_EQ(g.head_b, 0.0);
  EXPECT_GT(g.layers[0].w.norm(), 0.0);
}

// Scalar: sum(dscore .* score) + sum(G .* h_layer) for fixed random weights.
TEST(BackwardTest, MatchesFiniteDifferences) {
  for (Activation a : {Activation::kTanh, Activation::kRelu}) {
    NetworkArch arch = SmallArch();
    arch.activation = a;
    auto p = InitNetwork(arch, 9);
    for (Layer& l : p.layers) l.b.setRandom();
    const MatrixXd x = MatrixXd::Random(4, 3);
    const VectorXd ds = VectorXd::Random(4);
    const MatrixXd g0 = MatrixXd::Random(4, 5), g1 = MatrixXd::Random(4, 4);
    auto scalar = [&](const NetworkParams& q) {
      const auto acts = Forward(q, x);
      return ds.dot(acts.score) + g0.cwiseProduct(acts.hidden(0)).sum() +
             g1.cwiseProduct(acts.hidden(1)).sum();
    };
    const auto grads = Backward(p, Forward(p, x), ds, {{0, g0}, {1, g1}});
    const auto flat_g = Flatten(grads);
    auto flat = Flatten(p);
    const double h = 1e-6;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      NetworkParams q = p;
      auto up = flat, down = flat;
      up[i] += h;
      down[i] -= h;
      Unflatten(up, q);
      const double fu = scalar(q);
      Unflatten(down, q);
      const double fd = (fu - scalar(q)) / (2 * h);
      ASSERT_LE(std::abs(fd - flat_g[i]), 1e-4 * std::max(1e-2, std::abs(fd)))
          << "param " << i << " activation " << ActivationName(a);
    }
  }
}

TEST(SgdTest, UpdateRules) {
  auto p = InitNetwork(SmallArch(), 1);
  EXPECT_EQ(Flatten(SgdStep(p, ZeroGrads(p), 0.1)), Flatten(p));
  auto g = ZeroGrads(p);
  p.layers[0].w(0, 0) = 1.0;
  g.layers[0].w(0, 0) = 0.5;
  EXPECT_DOUBLE_EQ(SgdStep(p, g, 0.1).layers[0].w(0, 0), 0.95);

  auto rg = ZeroGrads(p);
  Unflatten(std::vector<double>(Flatten(p).size(), 0.3), rg);
  const auto base = Flatten(p);
  const auto s1 = Flatten(SgdStep(p, rg, 0.1));
  const auto s2 = Flatten(SgdStep(p, rg, 0.2));
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(s2[i] - base[i], 2.0 * (s1[i] - base[i]), 1e-15);
  }
  g.layers[1].b(0) = std::nan("");
  try {
    SgdStep(p, g, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTraining);
  }
  EXPECT_THROW(SgdStep(p, ZeroGrads(p), 0.0), Error);
}

TEST(CheckpointTest, Roundtrip) {
  auto p = InitNetwork(SmallArch(7), 11);
  p.arch.activation = Activation::kTanh;
  const std::string path = ::testing::TempDir() + "/ckpt.json";
  SaveCheckpoint(p, path);
  const auto q = LoadCheckpoint(path);
  EXPECT_EQ(q.arch, p.arch);
  EXPECT_EQ(q.seed, 11u);
  EXPECT_EQ(Flatten(q), Flatten(p));
  std::remove(path.c_str());
  EXPECT_THROW(ParamsFromCheckpoint({{"format", "other"}}), Error);
}

}  // namespace
}  // namespace smmd::model
