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

#include "smmd/wire.h"

#include <array>
#include <regex>
#include <set>

#include "smmd/error.h"

namespace smmd::wire {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 9> kKinds = {{
    {MessageKind::kHello, "Hello"},
    {MessageKind::kPubKey, "PubKey"},
    {MessageKind::kEncMonomials, "EncMonomials"},
    {MessageKind::kEncScalar, "EncScalar"},
    {MessageKind::kMaskedGradRequest, "MaskedGradRequest"},
    {MessageKind::kDecryptedMaskedGrad, "DecryptedMaskedGrad"},
    {MessageKind::kLossReport, "LossReport"},
    {MessageKind::kAbort, "Abort"},
    {MessageKind::kDone, "Done"},
}};

// Config echo keys accepted in Hello.
const std::set<std::string>& ConfigKeys() {
  static const std::set<std::string> keys = {
      "kernel", "frac_bits", "int_bits", "key_bits", "aligned_widths", "n_st",
      "batch_size", "batch_seed", "epochs", "alpha", "beta", "lr", "row_mode",
      "early_stop_tol", "early_stop_patience"};
  return keys;
}

bool CiphertextKind(MessageKind kind) {
  return kind == MessageKind::kEncMonomials || kind == MessageKind::kEncScalar ||
         kind == MessageKind::kMaskedGradRequest;
}

[[noreturn]] void Malformed(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kMalformed, where + ": " + what);
}

void RequireKeys(const nlohmann::json& obj, const std::string& where,
                 const std::set<std::string>& allowed,
                 const std::set<std::string>& required) {
  if (!obj.is_object()) Malformed(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) Malformed(where, "field '" + key + "' is not allowed");
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) Malformed(where, "missing field '" + key + "'");
  }
}

void RequireUnsigned(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    Malformed(where, "expected a non-negative integer");
  }
}

he::BigInt HexAt(const nlohmann::json& v, const std::string& where) {
  if (!v.is_string()) Malformed(where, "expected a hex string");
  try {
    return he::FromHex(v.get<std::string>());
  } catch (const Error& e) {
    Malformed(where, e.what());
  }
}

void ValidateBlocks(const nlohmann::json& payload) {
  RequireKeys(payload, "payload", {"round", "blocks"}, {"round", "blocks"});
  RequireUnsigned(payload["round"], "payload.round");
  const auto& blocks = payload["blocks"];
  if (!blocks.is_array()) Malformed("payload.blocks", "expected an array");
  static const std::regex name_re("[a-z_]+(/[0-9]+)?");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string where = "payload.blocks[" + std::to_string(b) + "]";
    const auto& block = blocks[b];
    RequireKeys(block, where, {"name", "rows", "cols", "scale", "values"},
                {"name", "rows", "cols", "scale", "values"});
    if (!block["name"].is_string() ||
        !std::regex_match(block["name"].get<std::string>(), name_re)) {
      Malformed(where + ".name", "invalid block name");
    }
    RequireUnsigned(block["rows"], where + ".rows");
    RequireUnsigned(block["cols"], where + ".cols");
    RequireUnsigned(block["scale"], where + ".scale");
    const auto& values = block["values"];
    if (!values.is_array()) Malformed(where + ".values", "expected an array");
    if (values.size() != block["rows"].get<std::size_t>() * block["cols"].get<std::size_t>()) {
      Malformed(where + ".values", "length does not match rows x cols");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      HexAt(values[i], where + ".values[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace

std::string_view KindName(MessageKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "?";
}

MessageKind ParseKind(std::string_view name) {
  for (const auto& [k, n] : kKinds) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::kMalformed, "unknown message kind '" + std::string(name) + "'");
}

nlohmann::json BlockJson(const Block& block) {
  if (block.values.size() != static_cast<std::size_t>(block.rows) * block.cols) {
    throw Error(ErrorCode::kDomain, "block " + block.name + " has wrong value count");
  }
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : block.values) values.push_back(he::ToHex(v));
  return {{"name", block.name},
          {"rows", block.rows},
          {"cols", block.cols},
          {"scale", block.scale},
          {"values", std::move(values)}};
}

Block BlockFromJson(const nlohmann::json& j) {
  Block block;
  block.name = j.at("name").get<std::string>();
  block.rows = j.at("rows").get<int>();
  block.cols = j.at("cols").get<int>();
  block.scale = j.at("scale").get<int>();
  const auto& values = j.at("values");
  block.values.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    block.values.push_back(HexAt(values[i], block.name + ".values[" + std::to_string(i) + "]"));
  }
  return block;
}

nlohmann::json BlocksPayload(std::uint64_t round, const std::vector<Block>& blocks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Block& b : blocks) arr.push_back(BlockJson(b));
  return {{"round", round}, {"blocks", std::move(arr)}};
}

std::vector<Block> BlocksFromPayload(const nlohmann::json& payload) {
  std::vector<Block> out;
  for (const auto& b : payload.at("blocks")) out.push_back(BlockFromJson(b));
  return out;
}

void ValidatePayload(MessageKind kind, const nlohmann::json& payload) {
  switch (kind) {
    case MessageKind::kHello: {
      RequireKeys(payload, "payload", {"role", "config"}, {"role", "config"});
      const auto& role = payload["role"];
      if (!role.is_string() || (role != "source" && role != "target")) {
        Malformed("payload.role", "expected \"source\" or \"target\"");
      }
      RequireKeys(payload["config"], "payload.config", ConfigKeys(), {});
      return;
    }
    case MessageKind::kPubKey:
      RequireKeys(payload, "payload", {"n", "g"}, {"n", "g"});
      HexAt(payload["n"], "payload.n");
      HexAt(payload["g"], "payload.g");
      return;
    case MessageKind::kEncMonomials:
    case MessageKind::kEncScalar:
    case MessageKind::kMaskedGradRequest:
    case MessageKind::kDecryptedMaskedGrad:
      ValidateBlocks(payload);
      return;
    case MessageKind::kLossReport:
      RequireKeys(payload, "payload", {"round", "loss"}, {"round", "loss"});
      RequireUnsigned(payload["round"], "payload.round");
      if (!payload["loss"].is_number()) Malformed("payload.loss", "expected a number");
      return;
    case MessageKind::kAbort:
      RequireKeys(payload, "payload", {"reason"}, {"reason"});
      if (!payload["reason"].is_string()) Malformed("payload.reason", "expected a string");
      return;
    case MessageKind::kDone:
      RequireKeys(payload, "payload", {"rounds"}, {"rounds"});
      RequireUnsigned(payload["rounds"], "payload.rounds");
      return;
  }
}

std::string Serialize(const Message& message) {
  const nlohmann::json body = {{"version", kVersion},
                               {"kind", KindName(message.kind)},
                               {"seq", message.seq},
                               {"scale", message.scale},
                               {"payload", message.payload}};
  const std::string text = body.dump();
  if (text.size() > kMaxFrameBytes) throw Error(ErrorCode::kDomain, "frame too large");
  std::string frame(4, '\0');
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) frame[i] = static_cast<char>((len >> (24 - 8 * i)) & 0xff);
  return frame + text;
}

Message ParseBody(std::string_view body) {
  if (body.empty()) throw Error(ErrorCode::kMalformed, "0-length frame");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformed,
                "frame is not JSON (byte " + std::to_string(e.byte) + ")");
  }
  RequireKeys(j, "frame", {"version", "kind", "seq", "scale", "payload"},
              {"version", "kind", "seq", "scale", "payload"});
  if (!j["version"].is_string()) Malformed("frame.version", "expected a string");
  if (j["version"] != kVersion) {
    throw Error(ErrorCode::kVersion, "unsupported wire version '" +
                                         j["version"].get<std::string>() + "'");
  }
  if (!j["kind"].is_string()) Malformed("frame.kind", "expected a string");
  RequireUnsigned(j["seq"], "frame.seq");
  RequireUnsigned(j["scale"], "frame.scale");
  Message m;
  m.kind = ParseKind(j["kind"].get<std::string>());
  m.seq = j["seq"].get<std::uint64_t>();
  m.scale = j["scale"].get<int>();
  m.payload = std::move(j["payload"]);
  ValidatePayload(m.kind, m.payload);
  return m;
}

Message Deserialize(std::string_view frame) {
  if (frame.size() < 4) throw Error(ErrorCode::kMalformed, "truncated frame header");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<std::uint8_t>(frame[i]);
  if (len == 0) throw Error(ErrorCode::kMalformed, "0-length frame");
  if (frame.size() - 4 != len) {
    throw Error(ErrorCode::kMalformed, "truncated frame: header says " + std::to_string(len) +
                                           " bytes, have " + std::to_string(frame.size() - 4));
  }
  return ParseBody(frame.substr(4));
}

std::vector<std::string> ScanTranscript(const std::vector<std::string>& frames,
                                        const ScanPolicy& policy) {
  std::vector<std::string> findings;
  const he::BigInt floor = he::BigInt(1) << policy.int_bits;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string tag = "frame " + std::to_string(f);
    Message m;
    try {
      m = Deserialize(frames[f]);
    } catch (const Error& e) {
      findings.push_back(tag + ": " + e.what());
      continue;
    }
    if (!CiphertextKind(m.kind) && m.kind != MessageKind::kDecryptedMaskedGrad) continue;
    for (const Block& block : BlocksFromPayload(m.payload)) {
      for (std::size_t i = 0; i < block.values.size(); ++i) {
        const he::BigInt& v = block.values[i];
        bool ok = false;
        for (const he::BigInt& n : policy.moduli) {
          if (CiphertextKind(m.kind)) {
            ok = ok || (v > n && v < n * n);
          } else {
            ok = ok || (v < n && v >= floor && n - v >= floor);
          }
        }
        if (!ok) {
          findings.push_back(tag + " (" + std::string(KindName(m.kind)) + ") block " +
                             block.name + "[" + std::to_string(i) +
                             "] looks like an unprotected plaintext");
        }
      }
    }
  }
  return findings;
}

}  // namespace smmd::wire
