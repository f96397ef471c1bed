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

// Fixed-point codec between doubles and the Paillier plaintext ring Z_n.
//
// A real x is stored as round(x * 2^(f * scale)) with negatives in the upper
// half of the ring (x < 0 maps to n - |round(x * 2^f)|), so homomorphic
// addition of encodings is addition of reals. Multiplying two depth-1
// encodings gives a depth-2 encoding (scale 2^(2f)); callers track the depth
// and decode once with the accumulated scale.
//
// Rounding is half away from zero on both parties so their encodings agree
// bit for bit.

#ifndef SMMD_FIXED_POINT_H_
#define SMMD_FIXED_POINT_H_

#include "smmd/he.h"

namespace smmd::he {

struct FixedPointParams {
  int frac_bits = 40;
  int int_bits = 128;  // magnitude budget b: |encoded integer| < 2^b
  BigInt modulus;

  // Throws kConfig unless 0 <= f < b and 2^b < n / 2.
  void Validate() const;

  static FixedPointParams ForKey(const PublicKey& pk, int frac_bits = 40,
                                 int int_bits = 128);
};

// Ring element for x at the given scale depth. Throws kRange when
// |round(x * 2^(f*scale))| >= 2^(b-1), i.e. |x| >= 2^(b-f-1) at depth 1.
BigInt EncodeFixed(double x, const FixedPointParams& params, int scale = 1);

// Inverse of EncodeFixed for a value carrying `scale` factors of 2^f. Throws
// kOverflow when the signed magnitude exceeds 2^b.
double DecodeFixed(const BigInt& m, const FixedPointParams& params,
                   int scale = 1);

// Signed representative in (-n/2, n/2].
BigInt SignedValue(const BigInt& m, const BigInt& modulus);
// Reduces any integer into [0, n).
BigInt ToRing(const BigInt& v, const BigInt& modulus);

}  // namespace smmd::he

#endif  // SMMD_FIXED_POINT_H_
