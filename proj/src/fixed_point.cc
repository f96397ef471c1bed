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

#include <cmath>
#include <string>

#include "smmd/error.h"

namespace smmd::he {

namespace {

BigInt PowerOfTwo(long bits) {
  BigInt v = 1;
  mpz_mul_2exp(v.get_mpz_t(), v.get_mpz_t(), bits);
  return v;
}

}  // namespace

void FixedPointParams::Validate() const {
  if (frac_bits < 0 || int_bits <= 0 || frac_bits >= int_bits) {
    throw Error(ErrorCode::kConfig, "need 0 <= frac_bits < int_bits");
  }
  if (PowerOfTwo(int_bits) >= modulus / 2) {
    throw Error(ErrorCode::kConfig,
                "magnitude budget 2^" + std::to_string(int_bits) +
                    " does not fit below n/2");
  }
}

FixedPointParams FixedPointParams::ForKey(const PublicKey& pk, int frac_bits,
                                          int int_bits) {
  FixedPointParams params{frac_bits, int_bits, pk.n};
  params.Validate();
  return params;
}

BigInt SignedValue(const BigInt& m, const BigInt& modulus) {
  if (m > modulus / 2) return m - modulus;
  return m;
}

BigInt ToRing(const BigInt& v, const BigInt& modulus) {
  BigInt r;
  mpz_mod(r.get_mpz_t(), v.get_mpz_t(), modulus.get_mpz_t());
  return r;
}

BigInt EncodeFixed(double x, const FixedPointParams& params, int scale) {
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::kRange, "cannot encode a non-finite value");
  }
  const double scaled = std::round(std::ldexp(x, params.frac_bits * scale));
  if (!std::isfinite(scaled) ||
      std::fabs(scaled) >= std::ldexp(1.0, params.int_bits - 1)) {
    throw Error(ErrorCode::kRange, "value " + std::to_string(x) +
                                       " exceeds the fixed-point range");
  }
  BigInt v;
  mpz_set_d(v.get_mpz_t(), scaled);
  if (v < 0) v += params.modulus;
  return v;
}

double DecodeFixed(const BigInt& m, const FixedPointParams& params,
                   int scale) {
  if (m < 0 || m >= params.modulus) {
    throw Error(ErrorCode::kDomain, "ring element outside [0, n)");
  }
  const BigInt v = SignedValue(m, params.modulus);
  if (abs(v) > PowerOfTwo(params.int_bits)) {
    throw Error(ErrorCode::kOverflow,
                "decoded magnitude exceeds 2^" + std::to_string(params.int_bits));
  }
  if (v == 0) return 0.0;
  long exp = 0;
  const double mantissa = mpz_get_d_2exp(&exp, v.get_mpz_t());
  return std::ldexp(mantissa, static_cast<int>(exp) - params.frac_bits * scale);
}

}  // namespace smmd::he
