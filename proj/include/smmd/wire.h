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

// Wire format: each frame is a 4-byte big-endian length followed by a UTF-8
// JSON object
//
//   {"version": "smmd/1", "kind": ..., "seq": ..., "scale": ..., "payload": {...}}
//
// Big integers travel as lowercase hex. Payloads are validated against a
// per-kind field whitelist on the way in, so anything the protocol did not
// declare is rejected rather than ignored.

#ifndef SMMD_WIRE_H_
#define SMMD_WIRE_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "smmd/he.h"

namespace smmd::wire {

inline constexpr std::string_view kVersion = "smmd/1";
inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 30;

enum class MessageKind {
  kHello,
  kPubKey,
  kEncMonomials,
  kEncScalar,
  kMaskedGradRequest,
  kDecryptedMaskedGrad,
  kLossReport,
  kAbort,
  kDone,
};

std::string_view KindName(MessageKind kind);
MessageKind ParseKind(std::string_view name);

struct Message {
  MessageKind kind = MessageKind::kHello;
  std::uint64_t seq = 0;
  int scale = 0;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const Message&, const Message&) = default;
};

// A named matrix of big integers (ciphertext values, or masked plaintexts in
// DecryptedMaskedGrad), row-major.
struct Block {
  std::string name;
  int rows = 0;
  int cols = 0;
  int scale = 0;
  std::vector<he::BigInt> values;
};

nlohmann::json BlockJson(const Block& block);
Block BlockFromJson(const nlohmann::json& j);
nlohmann::json BlocksPayload(std::uint64_t round, const std::vector<Block>& blocks);
std::vector<Block> BlocksFromPayload(const nlohmann::json& payload);

// Frame = length prefix + body.
std::string Serialize(const Message& message);
Message Deserialize(std::string_view frame);
// Body only (no prefix); used by Deserialize and by transports that strip it.
Message ParseBody(std::string_view body);
// Throws kMalformed describing the first field that is not whitelisted for
// the message kind or has the wrong type.
void ValidatePayload(MessageKind kind, const nlohmann::json& payload);

// Structural privacy check over a recorded transcript. Besides the schema
// whitelist, every ciphertext value must exceed the modulus it is bound to
// (a fixed-point plaintext never does), and every value in a
// DecryptedMaskedGrad must sit at least 2^int_bits away from 0 mod n (an
// unmasked fixed-point value never does).
struct ScanPolicy {
  std::vector<he::BigInt> moduli;  // both parties' n
  int int_bits = 128;
};
std::vector<std::string> ScanTranscript(const std::vector<std::string>& frames,
                                        const ScanPolicy& policy);

}  // namespace smmd::wire

#endif  // SMMD_WIRE_H_
