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

#include <gtest/gtest.h>

#include <random>

#include "smmd/error.h"

namespace smmd::wire {
namespace {

Block RandomBlock(std::mt19937_64& gen, const std::string& name) {
  Block b{name, 1 + static_cast<int>(gen() % 3), 1 + static_cast<int>(gen() % 4), 2, {}};
  for (int i = 0; i < b.rows * b.cols; ++i) {
    b.values.push_back(he::BigInt(std::to_string(gen())) * he::BigInt(std::to_string(gen())));
  }
  return b;
}

std::vector<Message> SampleMessages() {
  std::mt19937_64 gen(1);
  std::vector<Message> out;
  out.push_back({MessageKind::kHello, 0, 0,
                 {{"role", "source"}, {"config", {{"frac_bits", 40}, {"kernel", {{"family", "linear"}}}}}}});
  out.push_back({MessageKind::kPubKey, 1, 0, {{"n", "abc1"}, {"g", "abc2"}}});
  for (auto kind : {MessageKind::kEncMonomials, MessageKind::kEncScalar,
                    MessageKind::kMaskedGradRequest, MessageKind::kDecryptedMaskedGrad}) {
    out.push_back({kind, 2 + out.size(), 2,
                   BlocksPayload(3, {RandomBlock(gen, "mmd_grad/2"), RandomBlock(gen, "u")})});
  }
  out.push_back({MessageKind::kLossReport, 9, 0, {{"round", 3}, {"loss", 0.6931}}});
  out.push_back({MessageKind::kAbort, 10, 0, {{"reason", "kernel spec mismatch"}}});
  out.push_back({MessageKind::kDone, 11, 0, {{"rounds", 4}}});
  return out;
}

std::string Frame(const std::string& body) {
  std::string f(4, '\0');
  const auto len = static_cast<std::uint32_t>(body.size());
  for (int i = 0; i < 4; ++i) f[i] = static_cast<char>((len >> (24 - 8 * i)) & 0xff);
  return f + body;
}

ErrorCode CodeOf(const std::string& frame) {
  try {
    Deserialize(frame);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kConfig;
}

TEST(WireTest, RoundtripEveryKind) {
  for (const Message& m : SampleMessages()) {
    EXPECT_EQ(Deserialize(Serialize(m)), m) << KindName(m.kind);
  }
}

TEST(WireTest, BlockRoundtrip) {
  std::mt19937_64 gen(2);
  const Block b = RandomBlock(gen, "gram");
  const Block c = BlockFromJson(BlockJson(b));
  EXPECT_EQ(c.name, b.name);
  EXPECT_EQ(c.values, b.values);
}

TEST(WireTest, VersionAndFramingErrors) {
  const std::string good = Serialize(SampleMessages()[8]);
  auto body = nlohmann::json::parse(good.substr(4));
  body["version"] = "smmd/2";
  EXPECT_EQ(CodeOf(Frame(body.dump())), ErrorCode::kVersion);
  EXPECT_EQ(CodeOf(std::string(4, '\0')), ErrorCode::kMalformed);
  EXPECT_EQ(CodeOf(good.substr(0, good.size() - 3)), ErrorCode::kMalformed);
  EXPECT_EQ(CodeOf("ab"), ErrorCode::kMalformed);
  EXPECT_EQ(CodeOf(Frame("{not json")), ErrorCode::kMalformed);
}

TEST(WireTest, RejectsUnknownKindsAndFields) {
  auto body = nlohmann::json::parse(Serialize(SampleMessages()[8]).substr(4));
  auto bad = body;
  bad["kind"] = "Gossip";
  EXPECT_EQ(CodeOf(Frame(bad.dump())), ErrorCode::kMalformed);
  bad = body;
  bad["payload"]["labels"] = {1, -1};
  EXPECT_EQ(CodeOf(Frame(bad.dump())), ErrorCode::kMalformed);
  bad = body;
  bad["extra"] = 1;
  EXPECT_EQ(CodeOf(Frame(bad.dump())), ErrorCode::kMalformed);
  auto hello = nlohmann::json::parse(Serialize(SampleMessages()[0]).substr(4));
  hello["payload"]["config"]["features"] = {0.5};
  EXPECT_EQ(CodeOf(Frame(hello.dump())), ErrorCode::kMalformed);
}

TEST(WireTest, NonHexNamesPosition) {
  auto body = nlohmann::json::parse(Serialize(SampleMessages()[2]).substr(4));
  body["payload"]["blocks"][0]["values"][0] = "12z4";
  try {
    Deserialize(Frame(body.dump()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformed);
    const std::string what = e.what();
    EXPECT_NE(what.find("payload.blocks[0].values[0]"), std::string::npos) << what;
    EXPECT_NE(what.find("position 2"), std::string::npos) << what;
  }
}

TEST(WireTest, LargeFrameSurvives) {
  Block b{"h", 1, 4096, 1, {}};
  const he::BigInt big = (he::BigInt(1) << 1020) + 12345;
  for (int i = 0; i < 4096; ++i) b.values.push_back(big + i);
  const Message m{MessageKind::kEncMonomials, 5, 1, BlocksPayload(0, {b})};
  const std::string frame = Serialize(m);
  EXPECT_GT(frame.size(), 1u << 20);
  EXPECT_EQ(Deserialize(frame), m);
}

TEST(ScanTest, FlagsPlaintextLookingValues) {
  const he::BigInt n = (he::BigInt(1) << 511) + 111;
  const ScanPolicy policy{{n}, 128};
  Block cipher{"u", 1, 1, 1, {n * 3 + 7}};
  Block masked{"u", 1, 1, 2, {n / 3}};
  std::vector<std::string> frames = {
      Serialize({MessageKind::kEncMonomials, 0, 1, BlocksPayload(0, {cipher})}),
      Serialize({MessageKind::kDecryptedMaskedGrad, 1, 2, BlocksPayload(0, {masked})}),
      Serialize({MessageKind::kLossReport, 2, 0, {{"round", 0}, {"loss", 1.0}}})};
  EXPECT_TRUE(ScanTranscript(frames, policy).empty());

  Block raw_cipher{"h", 1, 1, 1, {he::BigInt(1) << 40}};
  Block raw_plain{"u", 1, 1, 2, {n - 5}};
  frames.push_back(Serialize({MessageKind::kEncMonomials, 3, 1, BlocksPayload(0, {raw_cipher})}));
  frames.push_back(Serialize({MessageKind::kDecryptedMaskedGrad, 4, 2, BlocksPayload(0, {raw_plain})}));
  frames.push_back("garbage");
  EXPECT_EQ(ScanTranscript(frames, policy).size(), 3u);
}

}  // namespace
}  // namespace smmd::wire
