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

// Paillier public-key encryption over GMP integers. The scheme is additively
// homomorphic: multiplying ciphertexts adds plaintexts, exponentiating a
// ciphertext by a plaintext scalar multiplies the plaintext by it. Both
// operations work on the public key alone, which is what lets one party fold
// another party's encrypted data into sums it cannot read.

#ifndef SMMD_HE_H_
#define SMMD_HE_H_

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace smmd::he {

using BigInt = mpz_class;

// Deterministic cryptographic bit stream (ChaCha20 keystream keyed by a hash
// of the seed and stream id). Every random choice in key generation,
// encryption and masking is drawn from one of these so a protocol run can be
// replayed exactly.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  void Fill(std::span<std::uint8_t> out);
  std::uint64_t NextU64();
  // Uniform integer with exactly `bits` random low bits.
  BigInt RandomBits(int bits);
  // Uniform in [0, bound). bound must be positive.
  BigInt UniformBelow(const BigInt& bound);
  // Independent child stream; used to hand each worker its own stream.
  RandomStream Fork(std::uint64_t stream_id);

 private:
  void Refill();

  std::array<std::uint8_t, 32> key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = 4096;
};

struct PublicKey {
  BigInt n;
  BigInt g;  // n + 1
  BigInt n_squared;
  std::string key_id;

  static PublicKey FromModulus(const BigInt& n);
};

struct SecretKey {
  BigInt lambda;  // lcm(p - 1, q - 1)
  BigInt mu;      // L(g^lambda mod n^2)^-1 mod n
  BigInt p, q;
  // CRT decryption tables.
  BigInt p_squared, q_squared;
  BigInt hp, hq;     // L_p(g^(p-1) mod p^2)^-1 mod p, and the q analogue
  BigInt q_inv_p;    // q^-1 mod p
  BigInt q_squared_inv_p_squared;  // (q^2)^-1 mod p^2, for CRT encryption
  BigInt p_order, q_order;  // p(p-1), q(q-1): orders of Z*_{p^2}, Z*_{q^2}
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;

  // Builds a key pair from two distinct primes. Used by keygen and by tests
  // that pin tiny primes (p = 3, q = 5).
  static KeyPair FromPrimes(const BigInt& p, const BigInt& q);
};

class Ciphertext;
namespace detail {
Ciphertext MakeCiphertext(BigInt value, std::string key_id);
}  // namespace detail

// An element of Z*_{n^2} bound to the public key that produced it. There is no
// way to get at the plaintext without a SecretKey.
class Ciphertext {
 public:
  Ciphertext() = default;

  const BigInt& value() const { return value_; }
  const std::string& key_id() const { return key_id_; }

  friend bool operator==(const Ciphertext& a, const Ciphertext& b) {
    return a.key_id_ == b.key_id_ && a.value_ == b.value_;
  }

 private:
  friend Ciphertext detail::MakeCiphertext(BigInt value, std::string key_id);
  Ciphertext(BigInt value, std::string key_id)
      : value_(std::move(value)), key_id_(std::move(key_id)) {}

  BigInt value_;
  std::string key_id_;
};

// Generates a key whose modulus has exactly `bits` bits from two primes of
// bits/2 bits each. Deterministic in `seed`.
KeyPair Keygen(int bits, std::uint64_t seed);

// Enc(m) = g^m * r^n mod n^2 with fresh r from `rng`. Requires 0 <= m < n.
Ciphertext Encrypt(const PublicKey& pk, const BigInt& m, RandomStream& rng);
// Same distribution, with r^n computed by CRT. Only the key owner can use it.
Ciphertext Encrypt(const KeyPair& key, const BigInt& m, RandomStream& rng);
// Encryption with a caller-chosen nonce r (0 < r < n, gcd(r, n) = 1).
Ciphertext EncryptWithNonce(const PublicKey& pk, const BigInt& m,
                            const BigInt& r);

BigInt Decrypt(const KeyPair& key, const Ciphertext& c);

// Dec(Add(c1, c2)) = m1 + m2 mod n.
Ciphertext Add(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2);
// Dec(MulPlain(c, s)) = s * m mod n, 0 <= s < n. Scalars in the upper half of
// the ring (encoded negatives) exponentiate the inverse by n - s instead.
Ciphertext MulPlain(const PublicKey& pk, const Ciphertext& c, const BigInt& s);
// Encryption of zero with nonce 1; the neutral element for Add.
Ciphertext Zero(const PublicKey& pk);

// Computes sum_t s_t * c_t for fixed bases c_t and many scalar vectors. It is
// the composition of MulPlain and Add, evaluated as one simultaneous
// exponentiation so squarings are shared across terms. Inverses of the bases
// are cached for the negative (upper-half) scalars.
class LinearCombiner {
 public:
  LinearCombiner(const PublicKey& pk, std::span<const Ciphertext> bases);

  std::size_t size() const { return bases_.size(); }
  Ciphertext Combine(std::span<const BigInt> scalars) const;
  // Sparse form: (base index, scalar) pairs.
  Ciphertext Combine(
      std::span<const std::pair<std::size_t, BigInt>> terms) const;

 private:
  const BigInt& Inverse(std::size_t i) const;

  const PublicKey* pk_;
  std::vector<BigInt> bases_;
  mutable std::vector<BigInt> inverses_;
  mutable std::vector<bool> have_inverse_;
};

// Lowercase big-endian hex, no prefix. "0" for zero.
std::string ToHex(const BigInt& v);
// Throws kMalformed naming the offending character position.
BigInt FromHex(std::string_view hex);
// Validates range [0, n^2) and binds to pk.
Ciphertext CiphertextFromHex(const PublicKey& pk, std::string_view hex);
Ciphertext CiphertextFromValue(const PublicKey& pk, BigInt value);

// Process-wide count of Decrypt calls; lets tests prove a code path never
// decrypts.
std::uint64_t DecryptCount();

void RequireSameKey(const PublicKey& pk, const Ciphertext& c);

}  // namespace smmd::he

#endif  // SMMD_HE_H_
