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

// The two-party training protocol. Each party owns a keypair and encrypts
// its outgoing operands under its own key; the peer evaluates its share of
// the cross terms on those ciphertexts, masks the results with uniform ring
// elements, and asks the key owner to decrypt.
//
// Per round, in both directions:
//
//   EncMonomials -> MaskedGradRequest -> EncScalar -> DecryptedMaskedGrad
//   -> LossReport
//
// The source additionally sends the translator operands (rows -y_i w / 2 and
// the products w_d w_e); the target sends its top-layer rows and their Gram
// matrix. Only the source holds labels.

#ifndef SMMD_PARTY_H_
#define SMMD_PARTY_H_

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "smmd/fixed_point.h"
#include "smmd/he.h"
#include "smmd/kernels.h"
#include "smmd/mmd.h"
#include "smmd/model.h"
#include "smmd/transport.h"
#include "smmd/wire.h"

namespace smmd::protocol {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Role { kSource, kTarget };
std::string_view RoleName(Role role);

struct ProtocolConfig {
  kernels::KernelSpec kernel;
  int key_bits = 512;
  int frac_bits = 40;
  int int_bits = 128;
  double alpha = 1.0;
  double beta = 0.01;
  double lr = 0.05;
  int epochs = 50;
  int batch_size = 256;  // 0: whole co-occurrence set per round
  std::uint64_t batch_seed = 0;
  double early_stop_tol = 1e-5;
  int early_stop_patience = 5;
  mmd::RowMode row_mode = mmd::RowMode::kSummed;
  std::chrono::milliseconds timeout = transport::kDefaultTimeout;

  // Fields both parties must agree on, echoed in Hello.
  nlohmann::json Echo(const std::vector<int>& aligned_widths, int n_st) const;
};

// Row batches for one epoch over n co-occurrence rows. Whole set in order
// when batch_size is 0 or >= n, otherwise a seeded shuffle cut into chunks.
std::vector<std::vector<int>> EpochBatches(int n, int batch_size,
                                           std::uint64_t seed, int epoch);

// Stops after `patience` consecutive epochs whose loss moved less than tol.
class EarlyStopper {
 public:
  EarlyStopper(double tol, int patience) : tol_(tol), patience_(patience) {}
  bool Update(double loss);

 private:
  double tol_;
  int patience_;
  std::optional<double> last_;
  int quiet_ = 0;
};

// One-time masks for ciphertexts sent to the peer for decryption.
class MaskBook {
 public:
  struct Masked {
    he::Ciphertext ciphertext;
    std::uint64_t id;
  };
  // c + Enc(r) with r uniform on [0, n).
  Masked Mask(const he::PublicKey& pk_peer, const he::Ciphertext& c,
              he::RandomStream& rng);
  // (decrypted - r) mod n; the record is consumed.
  he::BigInt Unmask(std::uint64_t id, const he::BigInt& decrypted,
                    const he::BigInt& modulus);
  std::size_t pending() const { return masks_.size(); }

 private:
  std::map<std::uint64_t, he::BigInt> masks_;
  std::uint64_t next_id_ = 0;
};

struct RoundMetrics {
  std::uint64_t round = 0;
  int rows = 0;
  double own_loss = 0.0;   // this party's partial of the objective
  double peer_loss = 0.0;
  double total_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainHistory {
  std::vector<double> epoch_loss;
  std::vector<RoundMetrics> rounds;
  bool early_stopped = false;
};

struct PartyData {
  model::NetworkParams params;
  MatrixXd features;  // co-occurrence rows, index-aligned with the peer
  VectorXd labels;    // +-1, source only
};

class Party {
 public:
  Party(Role role, ProtocolConfig config, PartyData data,
        transport::Transport& link, std::uint64_t crypto_seed);

  void Handshake();
  RoundMetrics RunRound(std::span<const int> rows);
  // Full schedule: epochs of rounds, early stopping, then Done.
  TrainHistory Train();
  // Best-effort notification; never throws.
  void SendAbort(const std::string& reason) noexcept;

  Role role() const { return role_; }
  const model::NetworkParams& params() const { return data_.params; }
  const TrainHistory& history() const { return history_; }
  const he::KeyPair& key() const { return key_; }
  const std::optional<he::PublicKey>& peer_key() const { return peer_pk_; }
  std::uint64_t round() const { return round_; }

 private:
  struct Forwarded;

  void Send(wire::MessageKind kind, nlohmann::json payload, int scale = 0);
  wire::Message Expect(wire::MessageKind kind);
  std::vector<wire::Block> ExpectBlocks(wire::MessageKind kind);

  std::vector<wire::Block> OwnOperands(const Forwarded& fw, const MatrixXd& top,
                                       const VectorXd& labels);
  void PeerTerms(const Forwarded& fw, const std::vector<wire::Block>& peer,
                 std::vector<wire::Block>& grads, std::vector<wire::Block>& scalars);
  std::vector<wire::Block> MaskBlocks(const std::vector<wire::Block>& blocks,
                                      std::vector<std::vector<std::uint64_t>>& ids);
  std::vector<wire::Block> DecryptBlocks(const std::vector<wire::Block>& blocks);

  Role role_;
  ProtocolConfig config_;
  PartyData data_;
  transport::Transport& link_;
  he::KeyPair key_;
  he::RandomStream rng_;
  std::optional<he::PublicKey> peer_pk_;
  std::optional<he::FixedPointParams> own_fp_, peer_fp_;
  MaskBook masks_;
  std::uint64_t send_seq_ = 0;
  std::uint64_t recv_seq_ = 0;
  std::uint64_t round_ = 0;
  bool handshaken_ = false;
  TrainHistory history_;
};

// Runs handshake + training for both parties on two threads. If either side
// fails, the first non-abort error is rethrown after both threads finish.
struct TwoPartyResult {
  TrainHistory source;
  TrainHistory target;
};
TwoPartyResult RunTwoParty(Party& source, Party& target);

}  // namespace smmd::protocol

#endif  // SMMD_PARTY_H_
