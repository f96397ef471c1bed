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

#include "smmd/objective.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "smmd/mmd.h"

namespace smmd::objective {
namespace {

using kernels::KernelSpec;
using kernels::Mode;
using model::NetworkArch;
using model::NetworkParams;

struct Toy {
  NetworkParams source, target;
  MatrixXd xs, xt;
  VectorXd y;
};

// Under 200 parameters per net: 3->6->4 and 2->5->4 (+ heads).
Toy MakeToy(model::Activation act, std::uint64_t seed) {
  NetworkArch as, at;
  as.input_dim = 3;
  as.l1_layers = {6};
  as.l2_layers = {4};
  as.activation = act;
  at = as;
  at.input_dim = 2;
  at.l1_layers = {5};
  Toy toy{model::InitNetwork(as, seed), model::InitNetwork(at, seed + 1), {}, {}, {}};
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  toy.xs.resize(10, 3);
  toy.xt.resize(10, 2);
  toy.y.resize(10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 3; ++j) toy.xs(i, j) = nd(gen);
    for (int j = 0; j < 2; ++j) toy.xt(i, j) = nd(gen);
    toy.y(i) = i % 3 == 0 ? -1.0 : 1.0;
  }
  for (auto* p : {&toy.source, &toy.target})
    for (auto& l : p->layers) l.b.setConstant(0.1);
  return toy;
}

TEST(ClassificationTermTest, ZeroInputsGiveLog2) {
  const auto r = ClassificationTerm(MatrixXd::Zero(1, 3), MatrixXd::Zero(1, 3),
                                    VectorXd::Ones(1), true);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(r.dl_dscore(0), -0.5);
}

TEST(ObjectiveTest, CompositeMatchesFiniteDifferences) {
  for (const auto& spec :
       {KernelSpec::Linear(), KernelSpec::Polynomial(2),
        KernelSpec::Gaussian(1.0), KernelSpec::Gaussian(1.0, Mode::kTaylor2)}) {
    for (auto act : {model::Activation::kTanh, model::Activation::kRelu}) {
      Toy toy = MakeToy(act, 3);
      const ObjectiveConfig config{spec, 0.7, 0.05, false};
      const auto full = ObjectiveGradient(toy.source, toy.target, toy.xs, toy.xt, toy.y, config);
      auto loss = [&](const NetworkParams& s, const NetworkParams& t) {
        return ObjectiveGradient(s, t, toy.xs, toy.xt, toy.y, config).terms.total;
      };
      const double h = 1e-6;
      for (int side = 0; side < 2; ++side) {
        NetworkParams& p = side == 0 ? toy.source : toy.target;
        const auto flat = model::Flatten(p);
        const auto grad = model::Flatten(side == 0 ? full.source : full.target);
        ASSERT_LE(flat.size(), 200u);
        for (std::size_t i = 0; i < flat.size(); ++i) {
          auto up = flat, down = flat;
          up[i] += h;
          down[i] -= h;
          model::Unflatten(up, p);
          const double fu = loss(toy.source, toy.target);
          model::Unflatten(down, p);
          const double fdn = loss(toy.source, toy.target);
          model::Unflatten(flat, p);
          const double fd = (fu - fdn) / (2 * h);
          ASSERT_LE(std::abs(fd - grad[i]), 1e-4 * std::max(1e-2, std::abs(fd)))
              << spec.ToString() << " side " << side << " param " << i;
        }
      }
    }
  }
}

TEST(ObjectiveTest, TermsAddUp) {
  const Toy toy = MakeToy(model::Activation::kRelu, 5);
  const ObjectiveConfig config{KernelSpec::Gaussian(1.0), 2.0, 0.1, true};
  const auto r = ObjectiveGradient(toy.source, toy.target, toy.xs, toy.xt, toy.y, config);
  EXPECT_NEAR(r.terms.total,
              r.terms.cls + 2.0 * r.terms.mmd + 0.05 * (r.terms.reg_source + r.terms.reg_target),
              1e-12);
  const auto hs = model::Forward(toy.source, toy.xs).top();
  const auto ht = model::Forward(toy.target, toy.xt).top();
  EXPECT_NEAR(r.terms.mmd, mmd::Mmd2Plain({hs}, {ht}, config.kernel), 1e-12);
}

TEST(ObjectiveTest, AlphaZeroDropsMmdPath) {
  const Toy toy = MakeToy(model::Activation::kRelu, 7);
  ObjectiveConfig with{KernelSpec::Gaussian(1.0), 0.0, 0.01, true};
  ObjectiveConfig other = with;
  other.kernel = KernelSpec::Polynomial(3);
  const auto a = ObjectiveGradient(toy.source, toy.target, toy.xs, toy.xt, toy.y, with);
  const auto b = ObjectiveGradient(toy.source, toy.target, toy.xs, toy.xt, toy.y, other);
  // With alpha = 0 the kernel choice cannot matter.
  EXPECT_EQ(model::Flatten(a.source), model::Flatten(b.source));
  EXPECT_EQ(model::Flatten(a.target), model::Flatten(b.target));
  EXPECT_EQ(a.terms.total, b.terms.total);
}

TEST(SourceOnlyTest, MatchesFiniteDifferences) {
  Toy toy = MakeToy(model::Activation::kTanh, 9);
  const auto r = SourceOnlyObjective(toy.source, toy.xs, toy.y, 0.1);
  const auto flat = model::Flatten(toy.source);
  const auto grad = model::Flatten(r.grads);
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto up = flat, down = flat;
    up[i] += h;
    down[i] -= h;
    model::Unflatten(up, toy.source);
    const double fu = SourceOnlyObjective(toy.source, toy.xs, toy.y, 0.1).loss;
    model::Unflatten(down, toy.source);
    const double fdn = SourceOnlyObjective(toy.source, toy.xs, toy.y, 0.1).loss;
    const double fd = (fu - fdn) / (2 * h);
    ASSERT_LE(std::abs(fd - grad[i]), 1e-4 * std::max(1e-2, std::abs(fd))) << i;
  }
}

}  // namespace
}  // namespace smmd::objective
