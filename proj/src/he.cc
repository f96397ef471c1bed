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

#include "smmd/he.h"

#include <sodium.h>

#include <algorithm>
#include <atomic>
#include <cstring>

#include "smmd/error.h"

namespace smmd::he {

namespace {

std::atomic<std::uint64_t> g_decrypt_count{0};

constexpr int kWindowBits = 4;
constexpr int kWindowSize = 1 << kWindowBits;

void EnsureSodium() {
  static const bool ok = [] { return sodium_init() >= 0; }();
  if (!ok) throw Error(ErrorCode::kConfig, "libsodium failed to initialize");
}

std::array<std::uint8_t, 32> DeriveKey(std::span<const std::uint8_t> material) {
  std::array<std::uint8_t, 32> key{};
  crypto_generichash(key.data(), key.size(), material.data(), material.size(),
                     nullptr, 0);
  return key;
}

void PutU64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::string FingerprintModulus(const BigInt& n) {
  // FNV-1a over the hex form; stable across platforms.
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : ToHex(n)) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 1099511628211ULL;
  }
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string id(16, '0');
  for (int i = 15; i >= 0; --i) {
    id[i] = kDigits[h & 0xf];
    h >>= 4;
  }
  return id;
}

BigInt MulMod(const BigInt& a, const BigInt& b, const BigInt& m) {
  BigInt r = a * b;
  mpz_mod(r.get_mpz_t(), r.get_mpz_t(), m.get_mpz_t());
  return r;
}

BigInt PowMod(const BigInt& base, const BigInt& exp, const BigInt& m) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), m.get_mpz_t());
  return r;
}

BigInt InvertMod(const BigInt& a, const BigInt& m) {
  BigInt r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0) {
    throw Error(ErrorCode::kMalformed, "value is not invertible");
  }
  return r;
}

std::size_t BitLength(const BigInt& v) {
  return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

BigInt RandomPrime(RandomStream& rng, int bits) {
  BigInt candidate = rng.RandomBits(bits);
  mpz_setbit(candidate.get_mpz_t(), bits - 1);
  mpz_setbit(candidate.get_mpz_t(), bits - 2);
  mpz_setbit(candidate.get_mpz_t(), 0);
  BigInt prime;
  mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
  return prime;
}

BigInt RandomNonce(const PublicKey& pk, RandomStream& rng) {
  for (;;) {
    BigInt r = rng.UniformBelow(pk.n);
    if (r == 0) continue;
    BigInt g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
    if (g == 1) return r;
  }
}

void RequirePlaintext(const PublicKey& pk, const BigInt& m, const char* what) {
  if (m < 0 || m >= pk.n) {
    throw Error(ErrorCode::kDomain,
                std::string(what) + " must lie in [0, n)");
  }
}

}  // namespace

namespace detail {
Ciphertext MakeCiphertext(BigInt value, std::string key_id) {
  return Ciphertext(std::move(value), std::move(key_id));
}
}  // namespace detail

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) {
  EnsureSodium();
  std::array<std::uint8_t, 24> material{};
  std::memcpy(material.data(), "smmd-rng", 8);
  PutU64(material.data() + 8, seed);
  PutU64(material.data() + 16, stream_id);
  key_ = DeriveKey(material);
}

RandomStream RandomStream::Fork(std::uint64_t stream_id) {
  RandomStream child(0, 0);
  std::array<std::uint8_t, 40> material{};
  std::memcpy(material.data(), key_.data(), key_.size());
  PutU64(material.data() + 32, stream_id);
  child.key_ = DeriveKey(material);
  return child;
}

void RandomStream::Refill() {
  std::array<std::uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
  PutU64(nonce.data(), block_++);
  crypto_stream_chacha20(buffer_.data(), buffer_.size(), nonce.data(),
                         key_.data());
  pos_ = 0;
}

void RandomStream::Fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) Refill();
    const std::size_t take = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, take);
    pos_ += take;
    done += take;
  }
}

std::uint64_t RandomStream::NextU64() {
  std::array<std::uint8_t, 8> b{};
  Fill(b);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

BigInt RandomStream::RandomBits(int bits) {
  if (bits <= 0) return 0;
  std::vector<std::uint8_t> bytes((bits + 7) / 8);
  Fill(bytes);
  BigInt v;
  mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  mpz_fdiv_r_2exp(v.get_mpz_t(), v.get_mpz_t(), bits);
  return v;
}

BigInt RandomStream::UniformBelow(const BigInt& bound) {
  if (bound <= 0) throw Error(ErrorCode::kDomain, "bound must be positive");
  const int bits = static_cast<int>(BitLength(bound));
  for (;;) {
    BigInt v = RandomBits(bits);
    if (v < bound) return v;
  }
}

PublicKey PublicKey::FromModulus(const BigInt& n) {
  if (n < 6) throw Error(ErrorCode::kConfig, "modulus too small");
  PublicKey pk;
  pk.n = n;
  pk.g = n + 1;
  pk.n_squared = n * n;
  pk.key_id = FingerprintModulus(n);
  return pk;
}

KeyPair KeyPair::FromPrimes(const BigInt& p, const BigInt& q) {
  if (p < 2 || q < 2 || p == q) {
    throw Error(ErrorCode::kConfig, "need two distinct primes");
  }
  const BigInt n = p * q;
  BigInt phi = (p - 1) * (q - 1);
  BigInt g;
  mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
  if (g != 1) throw Error(ErrorCode::kConfig, "gcd(n, phi(n)) != 1");

  KeyPair key;
  key.public_key = PublicKey::FromModulus(n);
  const PublicKey& pk = key.public_key;
  SecretKey& sk = key.secret_key;
  sk.p = p;
  sk.q = q;
  const BigInt pm1 = p - 1, qm1 = q - 1;
  mpz_lcm(sk.lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
  const BigInt u = PowMod(pk.g, sk.lambda, pk.n_squared);
  sk.mu = InvertMod(BigInt((u - 1) / n), n);

  sk.p_squared = p * p;
  sk.q_squared = q * q;
  sk.hp = InvertMod(BigInt((PowMod(pk.g, pm1, sk.p_squared) - 1) / p), p);
  sk.hq = InvertMod(BigInt((PowMod(pk.g, qm1, sk.q_squared) - 1) / q), q);
  sk.q_inv_p = InvertMod(q, p);
  sk.q_squared_inv_p_squared = InvertMod(sk.q_squared, sk.p_squared);
  sk.p_order = p * pm1;
  sk.q_order = q * qm1;
  return key;
}

KeyPair Keygen(int bits, std::uint64_t seed) {
  if (bits < 16 || bits % 2 != 0) {
    throw Error(ErrorCode::kConfig, "key size must be an even number >= 16");
  }
  RandomStream rng(seed, 0x6b657967656eULL);
  const int half = bits / 2;
  constexpr int kMaxAttempts = 256;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    BigInt p = RandomPrime(rng, half);
    BigInt q = RandomPrime(rng, half);
    if (BitLength(p) != static_cast<std::size_t>(half) ||
        BitLength(q) != static_cast<std::size_t>(half) || p == q) {
      continue;
    }
    if (BitLength(p * q) != static_cast<std::size_t>(bits)) continue;
    return KeyPair::FromPrimes(p, q);
  }
  throw Error(ErrorCode::kConfig, "prime generation failed after " +
                                      std::to_string(kMaxAttempts) +
                                      " attempts");
}

Ciphertext EncryptWithNonce(const PublicKey& pk, const BigInt& m,
                            const BigInt& r) {
  RequirePlaintext(pk, m, "plaintext");
  if (r <= 0 || r >= pk.n) throw Error(ErrorCode::kDomain, "nonce out of range");
  BigInt c = 1 + m * pk.n;
  c = MulMod(c, PowMod(r, pk.n, pk.n_squared), pk.n_squared);
  return detail::MakeCiphertext(std::move(c), pk.key_id);
}

Ciphertext Encrypt(const PublicKey& pk, const BigInt& m, RandomStream& rng) {
  RequirePlaintext(pk, m, "plaintext");
  return EncryptWithNonce(pk, m, RandomNonce(pk, rng));
}

Ciphertext Encrypt(const KeyPair& key, const BigInt& m, RandomStream& rng) {
  const PublicKey& pk = key.public_key;
  const SecretKey& sk = key.secret_key;
  RequirePlaintext(pk, m, "plaintext");
  const BigInt r = RandomNonce(pk, rng);
  BigInt ep = pk.n, eq = pk.n;
  mpz_mod(ep.get_mpz_t(), ep.get_mpz_t(), sk.p_order.get_mpz_t());
  mpz_mod(eq.get_mpz_t(), eq.get_mpz_t(), sk.q_order.get_mpz_t());
  const BigInt a = PowMod(r, ep, sk.p_squared);
  const BigInt b = PowMod(r, eq, sk.q_squared);
  BigInt diff = a - b;
  mpz_mod(diff.get_mpz_t(), diff.get_mpz_t(), sk.p_squared.get_mpz_t());
  BigInt rn = b + sk.q_squared * MulMod(diff, sk.q_squared_inv_p_squared,
                                        sk.p_squared);
  BigInt c = MulMod(BigInt(1 + m * pk.n), rn, pk.n_squared);
  return detail::MakeCiphertext(std::move(c), pk.key_id);
}

void RequireSameKey(const PublicKey& pk, const Ciphertext& c) {
  if (c.key_id() != pk.key_id) {
    throw Error(ErrorCode::kKey, "ciphertext bound to key " + c.key_id() +
                                     ", expected " + pk.key_id);
  }
}

BigInt Decrypt(const KeyPair& key, const Ciphertext& c) {
  const PublicKey& pk = key.public_key;
  const SecretKey& sk = key.secret_key;
  RequireSameKey(pk, c);
  if (c.value() < 0 || c.value() >= pk.n_squared) {
    throw Error(ErrorCode::kMalformed, "ciphertext outside [0, n^2)");
  }
  g_decrypt_count.fetch_add(1, std::memory_order_relaxed);
  const BigInt up = PowMod(c.value(), BigInt(sk.p - 1), sk.p_squared);
  const BigInt uq = PowMod(c.value(), BigInt(sk.q - 1), sk.q_squared);
  const BigInt mp = MulMod(BigInt((up - 1) / sk.p), sk.hp, sk.p);
  const BigInt mq = MulMod(BigInt((uq - 1) / sk.q), sk.hq, sk.q);
  BigInt diff = mp - mq;
  mpz_mod(diff.get_mpz_t(), diff.get_mpz_t(), sk.p.get_mpz_t());
  return mq + sk.q * MulMod(diff, sk.q_inv_p, sk.p);
}

Ciphertext Add(const PublicKey& pk, const Ciphertext& c1,
               const Ciphertext& c2) {
  RequireSameKey(pk, c1);
  RequireSameKey(pk, c2);
  return detail::MakeCiphertext(MulMod(c1.value(), c2.value(), pk.n_squared),
                                pk.key_id);
}

Ciphertext MulPlain(const PublicKey& pk, const Ciphertext& c, const BigInt& s) {
  RequireSameKey(pk, c);
  RequirePlaintext(pk, s, "scalar");
  const BigInt half = pk.n / 2;
  if (s > half) {
    const BigInt inv = InvertMod(c.value(), pk.n_squared);
    return detail::MakeCiphertext(PowMod(inv, BigInt(pk.n - s), pk.n_squared),
                                  pk.key_id);
  }
  return detail::MakeCiphertext(PowMod(c.value(), s, pk.n_squared), pk.key_id);
}

Ciphertext Zero(const PublicKey& pk) {
  return detail::MakeCiphertext(BigInt(1), pk.key_id);
}

LinearCombiner::LinearCombiner(const PublicKey& pk,
                               std::span<const Ciphertext> bases)
    : pk_(&pk) {
  bases_.reserve(bases.size());
  for (const Ciphertext& c : bases) {
    RequireSameKey(pk, c);
    bases_.push_back(c.value());
  }
  inverses_.resize(bases_.size());
  have_inverse_.assign(bases_.size(), false);
}

const BigInt& LinearCombiner::Inverse(std::size_t i) const {
  if (!have_inverse_[i]) {
    inverses_[i] = InvertMod(bases_[i], pk_->n_squared);
    have_inverse_[i] = true;
  }
  return inverses_[i];
}

Ciphertext LinearCombiner::Combine(std::span<const BigInt> scalars) const {
  if (scalars.size() != bases_.size()) {
    throw Error(ErrorCode::kDomain, "scalar count does not match base count");
  }
  std::vector<std::pair<std::size_t, BigInt>> terms;
  terms.reserve(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i] != 0) terms.emplace_back(i, scalars[i]);
  }
  return Combine(terms);
}

Ciphertext LinearCombiner::Combine(
    std::span<const std::pair<std::size_t, BigInt>> terms) const {
  const BigInt& mod = pk_->n_squared;
  const BigInt half = pk_->n / 2;

  struct Term {
    const BigInt* base;
    BigInt exponent;
  };
  std::vector<Term> work;
  work.reserve(terms.size());
  std::size_t max_bits = 0;
  for (const auto& [index, scalar] : terms) {
    if (index >= bases_.size()) {
      throw Error(ErrorCode::kDomain, "base index out of range");
    }
    RequirePlaintext(*pk_, scalar, "scalar");
    if (scalar == 0) continue;
    if (scalar > half) {
      work.push_back({&Inverse(index), BigInt(pk_->n - scalar)});
    } else {
      work.push_back({&bases_[index], scalar});
    }
    max_bits = std::max(max_bits, BitLength(work.back().exponent));
  }
  if (work.empty()) return Zero(*pk_);
  if (work.size() == 1) {
    return detail::MakeCiphertext(PowMod(*work[0].base, work[0].exponent, mod),
                                  pk_->key_id);
  }

  // Fixed-window simultaneous exponentiation: one shared squaring chain,
  // per-term tables of base^0..base^15.
  const std::size_t windows = (max_bits + kWindowBits - 1) / kWindowBits;
  std::vector<std::array<BigInt, kWindowSize>> tables(work.size());
  std::vector<std::vector<std::uint8_t>> digits(work.size());
  for (std::size_t t = 0; t < work.size(); ++t) {
    auto& digit = digits[t];
    digit.assign(windows, 0);
    std::uint8_t top = 0;
    for (std::size_t w = 0; w < windows; ++w) {
      std::uint8_t d = 0;
      for (int b = 0; b < kWindowBits; ++b) {
        if (mpz_tstbit(work[t].exponent.get_mpz_t(), w * kWindowBits + b)) {
          d |= static_cast<std::uint8_t>(1u << b);
        }
      }
      digit[w] = d;
      top = std::max(top, d);
    }
    auto& table = tables[t];
    table[1] = *work[t].base;
    for (int k = 2; k <= top; ++k) table[k] = MulMod(table[k - 1], table[1], mod);
  }

  BigInt acc = 1;
  bool started = false;
  for (std::size_t w = windows; w-- > 0;) {
    if (started) {
      for (int b = 0; b < kWindowBits; ++b) acc = MulMod(acc, acc, mod);
    }
    for (std::size_t t = 0; t < work.size(); ++t) {
      const std::uint8_t d = digits[t][w];
      if (d == 0) continue;
      acc = started ? MulMod(acc, tables[t][d], mod) : tables[t][d];
      started = true;
    }
  }
  return detail::MakeCiphertext(std::move(acc), pk_->key_id);
}

std::string ToHex(const BigInt& v) {
  if (v < 0) throw Error(ErrorCode::kDomain, "negative integer has no hex form");
  return v.get_str(16);
}

BigInt FromHex(std::string_view hex) {
  if (hex.empty()) throw Error(ErrorCode::kMalformed, "empty hex string");
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const char ch = hex[i];
    const bool ok = (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f');
    if (!ok) {
      throw Error(ErrorCode::kMalformed,
                  "non-hex character at position " + std::to_string(i));
    }
  }
  return BigInt(std::string(hex), 16);
}

Ciphertext CiphertextFromValue(const PublicKey& pk, BigInt value) {
  if (value < 0 || value >= pk.n_squared) {
    throw Error(ErrorCode::kMalformed, "ciphertext outside [0, n^2)");
  }
  return detail::MakeCiphertext(std::move(value), pk.key_id);
}

Ciphertext CiphertextFromHex(const PublicKey& pk, std::string_view hex) {
  return CiphertextFromValue(pk, FromHex(hex));
}

std::uint64_t DecryptCount() {
  return g_decrypt_count.load(std::memory_order_relaxed);
}

}  // namespace smmd::he
