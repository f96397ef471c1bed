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

#include "smmd/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "smmd/error.h"

namespace smmd::config {
namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::string Strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void Bad(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::kConfig, "--" + key + ": expected " + want + ", got '" + value + "'");
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    Bad(key, v, std::is_integral_v<T> ? "an integer" : "a number");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  Bad(key, v, "a boolean");
}

std::vector<int> ParseList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ParseNumber<int>(key, Strip(item)));
  if (out.empty()) Bad(key, v, "a comma-separated list of widths");
  return out;
}

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&t]<typename T>(const std::string& key, T RunConfig::*field) {
      t[key] = [key, field](RunConfig& c, const std::string& v) { c.*field = ParseNumber<T>(key, v); };
    };
    auto text = [&t](const std::string& key, std::string RunConfig::*field) {
      t[key] = [field](RunConfig& c, const std::string& v) { c.*field = v; };
    };
    text("data", &RunConfig::data);
    text("schema", &RunConfig::schema);
    num("max-rows", &RunConfig::max_rows);
    t["full"] = [](RunConfig& c, const std::string& v) {
      if (ParseBool("full", v)) c.max_rows = 0;
    };
    num("synthetic-rows", &RunConfig::synthetic_rows);
    num("synthetic-features", &RunConfig::synthetic_features);
    t["source-fraction"] = [](RunConfig& c, const std::string& v) {
      c.split.source_fraction = ParseNumber<double>("source-fraction", v);
    };
    t["overlap-fraction"] = [](RunConfig& c, const std::string& v) {
      c.split.overlap_fraction = ParseNumber<double>("overlap-fraction", v);
    };
    t["test-fraction"] = [](RunConfig& c, const std::string& v) {
      c.split.test_fraction = ParseNumber<double>("test-fraction", v);
    };
    text("kernel", &RunConfig::kernel);
    num("sigma", &RunConfig::sigma);
    num("poly-degree", &RunConfig::poly_degree);
    num("c", &RunConfig::poly_c);
    text("kernel-mode", &RunConfig::kernel_mode);
    num("alpha", &RunConfig::alpha);
    num("beta", &RunConfig::beta);
    num("lr", &RunConfig::lr);
    num("epochs", &RunConfig::epochs);
    num("batch-size", &RunConfig::batch_size);
    num("early-stop-tol", &RunConfig::early_stop_tol);
    num("early-stop-patience", &RunConfig::early_stop_patience);
    t["clip"] = [](RunConfig& c, const std::string& v) { c.clip_scores = ParseBool("clip", v); };
    t["l1"] = [](RunConfig& c, const std::string& v) { c.l1_layers = ParseList("l1", v); };
    t["l2"] = [](RunConfig& c, const std::string& v) { c.l2_layers = ParseList("l2", v); };
    t["activation"] = [](RunConfig& c, const std::string& v) {
      c.activation = model::ParseActivation(v);
    };
    num("threshold", &RunConfig::threshold);
    t["mode"] = [](RunConfig& c, const std::string& v) { c.mode = ParseMode(v); };
    num("key-bits", &RunConfig::key_bits);
    num("frac-bits", &RunConfig::frac_bits);
    num("int-bits", &RunConfig::int_bits);
    t["row-mode"] = [](RunConfig& c, const std::string& v) {
      if (v == "summed") c.row_mode = mmd::RowMode::kSummed;
      else if (v == "per_row" || v == "per-row") c.row_mode = mmd::RowMode::kPerRow;
      else Bad("row-mode", v, "summed or per_row");
    };
    text("transport", &RunConfig::transport);
    text("listen", &RunConfig::listen);
    text("connect", &RunConfig::connect);
    num("timeout-s", &RunConfig::timeout_s);
    num("seed-data", &RunConfig::seed_data);
    num("seed-model", &RunConfig::seed_model);
    num("seed-crypto", &RunConfig::seed_crypto);
    t["seed"] = [](RunConfig& c, const std::string& v) {
      c.seed_data = c.seed_model = c.seed_crypto = ParseNumber<std::uint64_t>("seed", v);
    };
    text("out", &RunConfig::out);
    return t;
  }();
  return table;
}

}  // namespace

std::string_view ModeName(Mode mode) {
  switch (mode) {
    case Mode::kPlaintext: return "plaintext";
    case Mode::kEncrypted: return "encrypted";
    case Mode::kSourceOnly: return "source_only";
  }
  return "?";
}

Mode ParseMode(std::string_view name) {
  if (name == "plaintext") return Mode::kPlaintext;
  if (name == "encrypted") return Mode::kEncrypted;
  if (name == "source_only" || name == "source-only") return Mode::kSourceOnly;
  throw Error(ErrorCode::kConfig, "unknown mode '" + std::string(name) +
                                      "' (expected plaintext, encrypted or source_only)");
}

kernels::KernelSpec RunConfig::KernelSpec() const {
  kernels::KernelSpec k;
  k.family = kernels::ParseFamily(kernel);
  k.sigma = sigma;
  k.degree = poly_degree;
  k.c = poly_c;
  const bool taylor = kernel_mode == "taylor2" ||
                      (kernel_mode == "auto" && mode == Mode::kEncrypted &&
                       k.family == kernels::Family::kGaussian);
  k.mode = taylor ? kernels::Mode::kTaylor2 : kernels::Mode::kExact;
  return k;
}

model::NetworkArch RunConfig::Arch(int input_dim) const {
  return {input_dim, l1_layers, l2_layers, activation};
}

int RunConfig::EffectiveBatch() const { return batch_size; }

std::string RunConfig::SchemaName() const {
  if (!schema.empty() || data == "synthetic") return schema;
  if (data.find("census") != std::string::npos || data.find("adult") != std::string::npos) {
    return "census";
  }
  return "credit";
}

int RunConfig::EffectiveMaxRows() const {
  if (max_rows >= 0) return max_rows;
  if (data == "synthetic") return 0;
  return SchemaName() == "census" ? 10000 : 5000;
}

protocol::ProtocolConfig RunConfig::Protocol() const {
  protocol::ProtocolConfig p;
  p.kernel = KernelSpec();
  p.key_bits = key_bits;
  p.frac_bits = frac_bits;
  p.int_bits = int_bits;
  p.alpha = alpha;
  p.beta = beta;
  p.lr = lr;
  p.epochs = epochs;
  p.batch_size = EffectiveBatch();
  p.batch_seed = seed_model;
  p.early_stop_tol = early_stop_tol;
  p.early_stop_patience = early_stop_patience;
  p.row_mode = row_mode;
  p.timeout = std::chrono::seconds(timeout_s);
  return p;
}

void RunConfig::Finalize() {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
  kernels::ParseFamily(kernel);
  if (kernel_mode != "auto" && kernel_mode != "exact" && kernel_mode != "taylor2") {
    fail("--kernel-mode must be auto, exact or taylor2");
  }
  if (data != "synthetic" && !schema.empty()) data::Schema::Named(schema);
  if (transport != "loopback" && transport != "tcp") fail("--transport must be loopback or tcp");
  if (!listen.empty() && !connect.empty()) fail("--listen and --connect are mutually exclusive");
  if ((!listen.empty() || !connect.empty()) && transport != "tcp") {
    fail("--listen/--connect require --transport tcp");
  }
  if (epochs <= 0) fail("--epochs must be positive");
  if (!(lr > 0.0)) fail("--lr must be positive");
  if (alpha < 0.0 || beta < 0.0) fail("--alpha and --beta must be non-negative");
  if (batch_size < 0) fail("--batch-size must be >= 0 (0: whole set)");
  if (synthetic_rows < 10 || synthetic_features < 2) fail("synthetic data needs >= 10 rows and >= 2 features");
  if (timeout_s <= 0) fail("--timeout-s must be positive");
  model::NetworkArch arch = Arch(1);
  arch.Validate();
  const kernels::KernelSpec k = KernelSpec();
  k.Validate();
  if (mode == Mode::kEncrypted) {
    if (!k.SecureEvaluable()) {
      if (k.family == kernels::Family::kPolynomial && k.c != 0.0) {
        fail("polynomial secure mode requires c=0");
      }
      fail("kernel " + k.ToString() + " has no encrypted form (use linear, poly with d<=3 and c=0, "
           "or gaussian with --kernel-mode taylor2)");
    }
    if (k.family == kernels::Family::kPolynomial && k.degree == 3) {
      for (int w : l2_layers) {
        if (w > 16) fail("encrypted degree-3 polynomial needs aligned widths <= 16 (--l2)");
      }
    }
    if (key_bits < 256) fail("--key-bits must be >= 256 for encrypted runs");
  }
}

nlohmann::json RunConfig::ToJson() const {
  nlohmann::json j = {
      {"data", data}, {"schema", SchemaName()}, {"max_rows", EffectiveMaxRows()},
      {"split", split.ToJson()}, {"kernel", KernelSpec()},
      {"alpha", alpha}, {"beta", beta}, {"lr", lr}, {"epochs", epochs},
      {"batch_size", EffectiveBatch()}, {"early_stop_tol", early_stop_tol},
      {"early_stop_patience", early_stop_patience}, {"clip_scores", clip_scores},
      {"l1", l1_layers}, {"l2", l2_layers}, {"activation", model::ActivationName(activation)},
      {"threshold", threshold}, {"mode", ModeName(mode)},
      {"seed_data", seed_data}, {"seed_model", seed_model}, {"seed_crypto", seed_crypto}};
  if (data == "synthetic") {
    j["synthetic_rows"] = synthetic_rows;
    j["synthetic_features"] = synthetic_features;
  }
  if (mode == Mode::kEncrypted) {
    j["key_bits"] = key_bits;
    j["frac_bits"] = frac_bits;
    j["int_bits"] = int_bits;
    j["row_mode"] = row_mode == mmd::RowMode::kSummed ? "summed" : "per_row";
    j["transport"] = transport;
  }
  return j;
}

void Set(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = Setters();
  auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorCode::kConfig, "unknown option '" + key + "'");
  it->second(config, Strip(value));
}

const std::vector<std::string>& Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : Setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::string Help(const std::string& key) {
  static const std::map<std::string, std::string> help = {
      {"data", "CSV path, or 'synthetic' for the two-Gaussian demo set"},
      {"schema", "credit | census (guessed from the path when omitted)"},
      {"max-rows", "row cap; -1 desk default (credit 5000, census 10000), 0 all"},
      {"full", "use every row"},
      {"synthetic-rows", "rows of the synthetic set"},
      {"synthetic-features", "features of the synthetic set"},
      {"source-fraction", "share of feature columns given to the source party"},
      {"overlap-fraction", "share of samples in the co-occurrence set"},
      {"test-fraction", "held-out share, stratified on labels"},
      {"kernel", "linear | poly | gaussian"},
      {"sigma", "Gaussian bandwidth"},
      {"poly-degree", "polynomial degree"},
      {"c", "polynomial offset (must be 0 in encrypted mode)"},
      {"kernel-mode", "auto | exact | taylor2"},
      {"alpha", "MMD weight"},
      {"beta", "L2 weight"},
      {"lr", "SGD learning rate"},
      {"epochs", "epoch cap"},
      {"batch-size", "co-occurrence rows per round; 0 for all"},
      {"early-stop-tol", "stop when the epoch loss moves less than this"},
      {"early-stop-patience", "for this many epochs in a row"},
      {"clip", "clip plaintext scores to [-8, 8] before the Taylor loss"},
      {"l1", "domain-specific hidden widths, comma list"},
      {"l2", "aligned hidden widths, comma list"},
      {"activation", "relu | tanh"},
      {"threshold", "decision threshold for fscore and precision"},
      {"mode", "plaintext | encrypted | source_only"},
      {"key-bits", "Paillier modulus size"},
      {"frac-bits", "fixed-point fractional bits"},
      {"int-bits", "fixed-point integer budget in bits"},
      {"row-mode", "summed | per_row monomial upload"},
      {"transport", "loopback | tcp"},
      {"listen", "host:port; run only the target party and wait for the source"},
      {"connect", "host:port; run only the source party"},
      {"timeout-s", "per-message receive timeout"},
      {"seed-data", "dataset, split and subsample seed"},
      {"seed-model", "initialization and batch-order seed"},
      {"seed-crypto", "key generation and encryption randomness seed"},
      {"seed", "sets all three seeds"},
      {"out", "output path (file, prefix or directory, per subcommand)"},
  };
  auto it = help.find(key);
  return it == help.end() ? "" : it->second;
}

std::vector<std::pair<std::string, std::string>> ReadKeyValueFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = Strip(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(Strip(line.substr(0, eq)), Strip(line.substr(eq + 1)));
  }
  return out;
}

RunConfig ParseConfig(const std::string& file,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig c;
  if (!file.empty()) {
    for (const auto& [k, v] : ReadKeyValueFile(file)) Set(c, k, v);
  }
  for (const auto& [k, v] : overrides) Set(c, k, v);
  c.Finalize();
  return c;
}

}  // namespace smmd::config
