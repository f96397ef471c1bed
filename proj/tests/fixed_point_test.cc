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

#include "smmd/fixed_point.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "smmd/error.h"

namespace smmd::he {
namespace {

class FixedPointTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { key_ = new KeyPair(Keygen(512, 21)); }
  static void TearDownTestSuite() { delete key_; }
  static KeyPair* key_;
  static FixedPointParams Params(int f = 40) {
    return FixedPointParams::ForKey(key_->public_key, f, f == 8 ? 64 : 128);
  }
};
KeyPair* FixedPointTest::key_ = nullptr;

TEST_F(FixedPointTest, ExactSmallValues) {
  const auto p8 = Params(8);
  EXPECT_EQ(EncodeFixed(0.0, p8), 0);
  EXPECT_EQ(EncodeFixed(1.5, p8), 384);
  EXPECT_EQ(DecodeFixed(384, p8), 1.5);
  EXPECT_EQ(EncodeFixed(-0.25, p8), p8.modulus - 64);
  EXPECT_EQ(DecodeFixed(p8.modulus - 64, p8), -0.25);
}

TEST_F(FixedPointTest, RoundsHalfAwayFromZero) {
  const auto p8 = Params(8);
  EXPECT_EQ(EncodeFixed(0.5 / 256.0, p8), 1);
  EXPECT_EQ(EncodeFixed(-0.5 / 256.0, p8), p8.modulus - 1);
  EXPECT_EQ(EncodeFixed(1.5 / 256.0, p8), 2);
}

TEST_F(FixedPointTest, RoundtripWithinResolution) {
  const auto params = Params();
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = dist(gen);
    ASSERT_LE(std::abs(DecodeFixed(EncodeFixed(x, params), params) - x),
              std::ldexp(1.0, -40));
  }
}

TEST_F(FixedPointTest, DepthOneProduct) {
  const auto params = Params();
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double a = dist(gen), b = dist(gen);
    const BigInt prod =
        ToRing(EncodeFixed(a, params) * EncodeFixed(b, params), params.modulus);
    ASSERT_NEAR(DecodeFixed(prod, params, 2), a * b, std::ldexp(1.0, -38));
  }
}

TEST_F(FixedPointTest, ScaleTwoEncodingMatchesProduct) {
  const auto params = Params();
  EXPECT_EQ(DecodeFixed(EncodeFixed(-3.25, params, 2), params, 2), -3.25);
}

TEST_F(FixedPointTest, RangeAndOverflowErrors) {
  const auto params = Params();
  EXPECT_THROW(EncodeFixed(std::ldexp(1.0, 90), params), Error);
  EXPECT_THROW(EncodeFixed(std::nan(""), params), Error);
  EXPECT_THROW(EncodeFixed(INFINITY, params), Error);
  try {
    DecodeFixed(BigInt(1) << 200, params);
    FAIL() << "expected overflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOverflow);
  }
  EXPECT_THROW(DecodeFixed(params.modulus, params), Error);
  EXPECT_THROW(DecodeFixed(-1, params), Error);
}

TEST_F(FixedPointTest, BudgetMustFitKey) {
  EXPECT_THROW(FixedPointParams::ForKey(key_->public_key, 40, 600), Error);
  EXPECT_THROW(FixedPointParams::ForKey(key_->public_key, 130, 128), Error);
}

TEST_F(FixedPointTest, SignedRepresentative) {
  const BigInt& n = key_->public_key.n;
  EXPECT_EQ(SignedValue(n - 5, n), -5);
  EXPECT_EQ(SignedValue(5, n), 5);
  EXPECT_EQ(ToRing(-5, n), n - 5);
}

}  // namespace
}  // namespace smmd::he
