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

// Run configuration: defaults, a key = value file, and per-key overrides
// (the CLI passes its flags through the same Set()).

#ifndef SMMD_CONFIG_H_
#define SMMD_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "smmd/data.h"
#include "smmd/kernels.h"
#include "smmd/mmd.h"
#include "smmd/model.h"
#include "smmd/party.h"

namespace smmd::config {

enum class Mode { kPlaintext, kEncrypted, kSourceOnly };
std::string_view ModeName(Mode mode);
Mode ParseMode(std::string_view name);

struct RunConfig {
  // Data. "synthetic" selects the built-in two-Gaussian demo set.
  std::string data = "synthetic";
  std::string schema;        // credit | census; guessed from the path if empty
  int max_rows = -1;         // -1: desk default for the schema, 0: all rows
  int synthetic_rows = 200;
  int synthetic_features = 8;
  data::SplitParams split;

  // Model and objective.
  std::string kernel = "linear";  // linear | poly | gaussian
  double sigma = 1.0;
  int poly_degree = 2;
  double poly_c = 0.0;
  // auto: taylor2 for an encrypted Gaussian, exact otherwise.
  std::string kernel_mode = "auto";  // auto | exact | taylor2
  double alpha = 1.0;
  double beta = 0.01;
  double lr = 0.05;
  int epochs = 50;
  int batch_size = 256;  // rows per round; 0: whole co-occurrence set
  double early_stop_tol = 1e-5;
  int early_stop_patience = 5;
  bool clip_scores = true;
  std::vector<int> l1_layers = {128};
  std::vector<int> l2_layers = {64};
  model::Activation activation = model::Activation::kRelu;
  double threshold = 0.0;

  Mode mode = Mode::kPlaintext;

  // Encryption.
  int key_bits = 512;
  int frac_bits = 40;
  int int_bits = 128;
  mmd::RowMode row_mode = mmd::RowMode::kSummed;

  // Transport. With tcp and neither address set, both parties run in this
  // process over a local socket.
  std::string transport = "loopback";  // loopback | tcp
  std::string listen;   // host:port, this process is the target
  std::string connect;  // host:port, this process is the source
  int timeout_s = 600;

  std::uint64_t seed_data = 0;
  std::uint64_t seed_model = 0;
  std::uint64_t seed_crypto = 0;

  std::string out;

  // Resolved views.
  kernels::KernelSpec KernelSpec() const;
  model::NetworkArch Arch(int input_dim) const;
  protocol::ProtocolConfig Protocol() const;
  int EffectiveBatch() const;
  int EffectiveMaxRows() const;
  std::string SchemaName() const;

  // Checks ranges and combinations; throws kConfig.
  void Finalize();
  nlohmann::json ToJson() const;
};

// Sets one key (the CLI flag name without dashes, e.g. "poly-degree").
// Throws kConfig for unknown keys or unparseable values.
void Set(RunConfig& config, const std::string& key, const std::string& value);
// Every key Set() accepts.
const std::vector<std::string>& Keys();
// One-line description of a key, for --help.
std::string Help(const std::string& key);

// "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> ReadKeyValueFile(const std::string& path);

// Defaults, then the file (if any), then overrides in order; finalized.
RunConfig ParseConfig(const std::string& file,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace smmd::config

#endif  // SMMD_CONFIG_H_
