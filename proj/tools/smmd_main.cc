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

// smmd: command-line front end.
//
//   smmd keygen --key-bits 512 --seed-crypto 1 --out key.json
//   smmd split  --data data/credit/uci_credit_subset.csv --out splits/credit
//   smmd train  --kernel gaussian --sigma 2 --mode encrypted --l2 16
//   smmd train  --mode encrypted --transport tcp --listen 127.0.0.1:7000   (target)
//   smmd train  --mode encrypted --transport tcp --connect 127.0.0.1:7000  (source)
//   smmd eval   --source-checkpoint out/source.json --target-checkpoint out/target.json
//   smmd table  --data data/credit/uci_credit_subset.csv --kernels linear,gaussian:1 --seeds 3
//   smmd bench  --key-bits 512

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smmd/config.h"
#include "smmd/data.h"
#include "smmd/error.h"
#include "smmd/experiment.h"
#include "smmd/fixed_point.h"
#include "smmd/he.h"
#include "smmd/mmd.h"
#include "smmd/trainer.h"

namespace {

using namespace smmd;
using Clock = std::chrono::steady_clock;

struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  bool full = false;

  void Attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file (flags override it)");
    for (const std::string& key : config::Keys()) {
      if (key == "full") continue;
      app->add_option("--" + key, values[key], config::Help(key));
    }
    app->add_flag("--full", full, config::Help("full"));
  }

  config::RunConfig Parse(CLI::App* app) const {
    std::vector<std::pair<std::string, std::string>> overrides;
    // "seed" first so that the specific seeds can refine it.
    if (app->count("--seed")) overrides.emplace_back("seed", values.at("seed"));
    for (const auto& [key, value] : values) {
      if (key != "seed" && app->count("--" + key)) overrides.emplace_back(key, value);
    }
    if (full) overrides.emplace_back("full", "true");
    return config::ParseConfig(file, overrides);
  }
};

double Ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void PrintHeader(const config::RunConfig& c) { std::cout << "# config " << c.ToJson().dump() << "\n"; }

void PrintMetrics(const metrics::Metrics& m) {
  std::cout << std::fixed << std::setprecision(4) << "fscore " << m.fscore << "  auc " << m.auc
            << "  precision " << m.precision << "\n";
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void WriteJson(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kConfig, "cannot write " + path.string());
  f << j.dump(2) << "\n";
}

int Keygen(const config::RunConfig& c) {
  const auto start = Clock::now();
  const he::KeyPair kp = he::Keygen(c.key_bits, c.seed_crypto);
  std::cout << "key_bits " << c.key_bits << "  keygen_ms " << Ms(start) << "\n"
            << "n " << he::ToHex(kp.public_key.n) << "\n";
  if (!c.out.empty()) {
    WriteJson(c.out, {{"key_bits", c.key_bits}, {"seed", c.seed_crypto},
                      {"n", he::ToHex(kp.public_key.n)},
                      {"p", he::ToHex(kp.secret_key.p)}, {"q", he::ToHex(kp.secret_key.q)}});
    std::cout << "wrote " << c.out << " (contains the secret primes)\n";
  }
  return 0;
}

int Split(const config::RunConfig& c) {
  PrintHeader(c);
  const data::FederatedSplit split = trainer::PrepareSplit(c);
  std::cout << split.Manifest().dump(2) << "\n";
  if (!c.out.empty()) {
    const std::filesystem::path prefix(c.out);
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
    data::WriteSplit(split, c.out);
    std::cout << "wrote " << c.out << "_{source,target,source_labels}.csv and _manifest.json\n";
  }
  return 0;
}

int TrainRemote(const config::RunConfig& c) {
  const bool target = !c.listen.empty();
  const auto [host, port_text] = [&] {
    const std::string& addr = target ? c.listen : c.connect;
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kConfig, "expected host:port");
    return std::pair{addr.substr(0, colon), addr.substr(colon + 1)};
  }();
  const int port = std::stoi(port_text);
  const auto timeout = std::chrono::seconds(c.timeout_s);
  const data::FederatedSplit split = trainer::PrepareSplit(c);
  std::unique_ptr<transport::Transport> link;
  if (target) {
    transport::TcpListener listener(host, port);
    std::cout << "target listening on " << host << ":" << listener.port() << "\n" << std::flush;
    link = listener.Accept(timeout);
  } else {
    link = transport::TcpConnect(host, port, timeout);
  }
  const auto role = target ? protocol::Role::kTarget : protocol::Role::kSource;
  const trainer::PartyResult r = trainer::TrainParty(c, split, role, *link);
  link->Close();
  std::cout << protocol::RoleName(role) << " finished " << r.history.rounds.size() << " rounds\n";
  for (std::size_t e = 0; e < r.history.epoch_loss.size(); ++e) {
    std::cout << "epoch " << e << " loss " << r.history.epoch_loss[e] << "\n";
  }
  if (!c.out.empty()) {
    std::filesystem::create_directories(c.out);
    model::SaveCheckpoint(r.params, (std::filesystem::path(c.out) /
                                     (std::string(protocol::RoleName(role)) + ".json")).string());
  }
  return 0;
}

int Train(const config::RunConfig& c) {
  if (!c.listen.empty() || !c.connect.empty()) return TrainRemote(c);
  PrintHeader(c);
  const trainer::TrainResult r = trainer::Train(c);
  for (std::size_t e = 0; e < r.metrics.loss_curve.size(); ++e) {
    std::cout << "epoch " << e << " loss " << r.metrics.loss_curve[e];
    if (e + 1 < r.epoch_mmd.size()) std::cout << " mmd2 " << r.epoch_mmd[e + 1];
    std::cout << "\n";
  }
  if (r.early_stopped) std::cout << "early stop\n";
  PrintMetrics(r.metrics);
  for (const auto& [phase, ms] : r.metrics.wall_ms) std::cout << "wall_ms." << phase << " " << ms << "\n";
  if (!c.out.empty()) {
    const std::filesystem::path dir(c.out);
    std::filesystem::create_directories(dir);
    model::SaveCheckpoint(r.source, (dir / "source.json").string());
    model::SaveCheckpoint(r.target, (dir / "target.json").string());
    nlohmann::json j = {{"config", r.config}, {"metrics", metrics::ToJson(r.metrics)},
                        {"epoch_mmd", r.epoch_mmd}, {"rounds", r.rounds},
                        {"early_stopped", r.early_stopped}};
    WriteJson(dir / "metrics.json", j);
    std::cout << "wrote " << dir.string() << "/{source,target,metrics}.json\n";
  }
  return 0;
}

int Eval(const config::RunConfig& c, const std::string& source_ckpt, const std::string& target_ckpt) {
  PrintHeader(c);
  const data::FederatedSplit split = trainer::PrepareSplit(c);
  const model::NetworkParams s = model::LoadCheckpoint(source_ckpt);
  const model::NetworkParams t = model::LoadCheckpoint(target_ckpt);
  const auto& labeled = c.mode == config::Mode::kSourceOnly ? split.train_ids() : split.co_occurrence();
  PrintMetrics(trainer::Evaluate(split, s, t, labeled, c.threshold));
  return 0;
}

int Table(const config::RunConfig& base, const std::string& kernels, const std::string& modes,
          const std::string& sweep, int seeds) {
  std::vector<experiment::CellSpec> cells;
  if (!sweep.empty()) {
    const auto eq = sweep.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--sweep expects key=v1,v2,...");
    cells = experiment::Sweep(base, sweep.substr(0, eq), SplitList(sweep.substr(eq + 1)));
  } else {
    cells = experiment::KernelGrid(base, SplitList(kernels));
  }
  std::vector<config::Mode> mode_list;
  for (const auto& m : SplitList(modes)) mode_list.push_back(config::ParseMode(m));
  if (seeds <= 0) throw Error(ErrorCode::kConfig, "--seeds must be positive");
  std::vector<std::uint64_t> seed_list;
  for (int s = 0; s < seeds; ++s) seed_list.push_back(base.seed_data + static_cast<std::uint64_t>(s));
  const auto report = experiment::RunTable(
      cells, mode_list, seed_list,
      [](const std::string& label, config::Mode mode, std::uint64_t seed,
         const experiment::Run* run, const std::string* error) {
        std::cerr << label << " " << config::ModeName(mode) << " seed " << seed << ": ";
        if (run) std::cerr << "auc " << run->metrics.auc << " (" << run->wall_ms << " ms)\n";
        else std::cerr << *error << "\n";
      });
  std::cout << report.Text();
  if (!base.out.empty()) {
    report.Write(base.out);
    std::cout << "wrote " << base.out << "/{table.txt,table.csv,manifest.json}\n";
  }
  return 0;
}

template <typename F>
double MicrosPerOp(int reps, F&& f) {
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) f(i);
  return Ms(start) * 1000.0 / reps;
}

int Bench(const config::RunConfig& c, int rows, int dim) {
  std::cout << "key_bits " << c.key_bits << "  rows " << rows << "  dim " << dim << "\n";
  const he::KeyPair kp = he::Keygen(c.key_bits, c.seed_crypto);
  const he::PublicKey& pk = kp.public_key;
  he::RandomStream rng(c.seed_crypto, 9);
  std::vector<he::BigInt> m;
  for (int i = 0; i < 64; ++i) m.push_back(rng.UniformBelow(pk.n));
  std::vector<he::Ciphertext> cts;
  std::cout << std::fixed << std::setprecision(1);
  std::cout << "encrypt_public_us " << MicrosPerOp(64, [&](int i) { cts.push_back(he::Encrypt(pk, m[i], rng)); }) << "\n";
  std::cout << "encrypt_crt_us " << MicrosPerOp(64, [&](int i) { he::Encrypt(kp, m[i], rng); }) << "\n";
  std::cout << "decrypt_us " << MicrosPerOp(64, [&](int i) { he::Decrypt(kp, cts[i]); }) << "\n";
  std::cout << "add_us " << MicrosPerOp(64, [&](int i) { he::Add(pk, cts[i], cts[(i + 1) % 64]); }) << "\n";
  const he::FixedPointParams fp = he::FixedPointParams::ForKey(pk, c.frac_bits, c.int_bits);
  const he::BigInt scalar = he::EncodeFixed(-0.731, fp);
  std::cout << "mul_plain_us " << MicrosPerOp(64, [&](int i) { he::MulPlain(pk, cts[i], scalar); }) << "\n";

  std::mt19937_64 gen(c.seed_data);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(rows, dim, [&] { return u(gen); });
  const Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(rows, dim, [&] { return u(gen); });
  for (const auto& spec : {kernels::KernelSpec::Linear(), kernels::KernelSpec::Polynomial(2),
                           kernels::KernelSpec::Gaussian(c.sigma, kernels::Mode::kTaylor2)}) {
    auto t0 = Clock::now();
    const auto enc = mmd::EncryptMonomialBatch({b}, spec, kp, fp, rng, c.row_mode);
    const double enc_ms = Ms(t0);
    t0 = Clock::now();
    mmd::SecureCrossKernelSum({a}, enc, spec, pk, fp);
    const double sum_ms = Ms(t0);
    t0 = Clock::now();
    mmd::SecureMmdGradRows({a}, enc, spec, pk, fp);
    const double grad_ms = Ms(t0);
    std::cout << spec.ToString() << "  monomials " << enc.monomial_count << "  encrypt_ms " << enc_ms
              << "  cross_sum_ms " << sum_ms << "  grad_rows_ms " << grad_ms << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMMD: federated transfer learning with secure maximum mean discrepancy"};
  app.require_subcommand(0, 1);

  ConfigFlags root_flags, keygen_flags, split_flags, train_flags, eval_flags, table_flags, bench_flags;
  root_flags.Attach(&app);
  auto* keygen = app.add_subcommand("keygen", "generate a Paillier key pair");
  keygen_flags.Attach(keygen);
  auto* split = app.add_subcommand("split", "build and write the vertical federated split");
  split_flags.Attach(split);
  auto* train = app.add_subcommand("train", "train (default when no subcommand is given)");
  train_flags.Attach(train);
  auto* eval = app.add_subcommand("eval", "evaluate saved checkpoints on the target test view");
  eval_flags.Attach(eval);
  std::string source_ckpt, target_ckpt;
  eval->add_option("--source-checkpoint", source_ckpt)->required();
  eval->add_option("--target-checkpoint", target_ckpt)->required();
  auto* table = app.add_subcommand("table", "multi-seed kernel x mode table");
  table_flags.Attach(table);
  std::string kernels = "linear,poly:2,gaussian:1,gaussian:2";
  std::string modes = "encrypted,plaintext,source_only";
  std::string sweep;
  int seeds = 3;
  table->add_option("--kernels", kernels, "comma list: linear, poly:<d>, gaussian:<sigma>");
  table->add_option("--modes", modes);
  table->add_option("--sweep", sweep, "vary one key instead of the kernel, e.g. alpha=0.1,1,10");
  table->add_option("--seeds", seeds, "number of seeds, starting at --seed-data");
  auto* bench = app.add_subcommand("bench", "time the HE primitives and secure MMD terms");
  bench_flags.Attach(bench);
  int bench_rows = 32, bench_dim = 8;
  bench->add_option("--rows", bench_rows);
  bench->add_option("--dim", bench_dim);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*keygen) return Keygen(keygen_flags.Parse(keygen));
    if (*split) return Split(split_flags.Parse(split));
    if (*eval) return Eval(eval_flags.Parse(eval), source_ckpt, target_ckpt);
    if (*table) return Table(table_flags.Parse(table), kernels, modes, sweep, seeds);
    if (*bench) return Bench(bench_flags.Parse(bench), bench_rows, bench_dim);
    if (*train) return Train(train_flags.Parse(train));
    return Train(root_flags.Parse(&app));
  } catch (const Error& e) {
    std::cerr << "smmd: " << e.what() << "\n";
    return 2;
  }
}
