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

#include "smmd/experiment.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "smmd/error.h"
#include "smmd/trainer.h"

namespace smmd::experiment {
namespace {

config::RunConfig WithMode(config::RunConfig c, config::Mode mode) {
  c.mode = mode;
  c.Finalize();
  return c;
}

std::string Fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

}  // namespace

double Cell::Mean(double metrics::Metrics::*field) const {
  if (runs.empty()) return std::nan("");
  double sum = 0.0;
  for (const Run& r : runs) sum += r.metrics.*field;
  return sum / static_cast<double>(runs.size());
}

double Cell::Std(double metrics::Metrics::*field) const {
  if (runs.size() < 2) return 0.0;
  const double m = Mean(field);
  double ss = 0.0;
  for (const Run& r : runs) ss += (r.metrics.*field - m) * (r.metrics.*field - m);
  return std::sqrt(ss / static_cast<double>(runs.size() - 1));
}

std::vector<CellSpec> KernelGrid(const config::RunConfig& base,
                                 const std::vector<std::string>& kernels) {
  if (kernels.empty()) throw Error(ErrorCode::kConfig, "empty kernel grid");
  std::vector<CellSpec> out;
  for (const std::string& entry : kernels) {
    config::RunConfig c = base;
    const auto colon = entry.find(':');
    const std::string family = entry.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : entry.substr(colon + 1);
    config::Set(c, "kernel", family);
    c.kernel_mode = "auto";
    const kernels::Family f = kernels::ParseFamily(family);
    if (f == kernels::Family::kGaussian && !arg.empty()) config::Set(c, "sigma", arg);
    if (f == kernels::Family::kPolynomial && !arg.empty()) config::Set(c, "poly-degree", arg);
    if (f == kernels::Family::kLinear && !arg.empty()) {
      throw Error(ErrorCode::kConfig, "linear kernel takes no argument: '" + entry + "'");
    }
    config::RunConfig(c).Finalize();
    out.push_back({entry, c});
  }
  return out;
}

std::vector<CellSpec> Sweep(const config::RunConfig& base, const std::string& key,
                            const std::vector<std::string>& values) {
  if (values.empty()) throw Error(ErrorCode::kConfig, "empty sweep for '" + key + "'");
  std::vector<CellSpec> out;
  for (const std::string& v : values) {
    config::RunConfig c = base;
    config::Set(c, key, v);
    config::RunConfig(c).Finalize();
    out.push_back({key + "=" + v, c});
  }
  return out;
}

Report RunTable(const std::vector<CellSpec>& cells, const std::vector<config::Mode>& modes,
                const std::vector<std::uint64_t>& seeds, const Progress& progress) {
  if (cells.empty() || modes.empty() || seeds.empty()) {
    throw Error(ErrorCode::kConfig, "experiment table needs at least one cell, mode and seed");
  }
  Report report;
  report.header = cells.front().config.ToJson();
  report.header["seeds"] = seeds;
  for (const CellSpec& spec : cells) {
    for (config::Mode mode : modes) {
      Cell cell{spec.label, mode, {}, ""};
      for (std::uint64_t seed : seeds) {
        try {
          config::RunConfig c = spec.config;
          c.seed_data = c.seed_model = c.seed_crypto = seed;
          c = WithMode(c, mode);
          const auto start = std::chrono::steady_clock::now();
          const trainer::TrainResult r = trainer::Train(c);
          Run run{seed, r.metrics,
                  std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()};
          if (progress) progress(spec.label, mode, seed, &run, nullptr);
          cell.runs.push_back(std::move(run));
        } catch (const std::exception& e) {
          const std::string msg = "seed " + std::to_string(seed) + ": " + e.what();
          if (progress) progress(spec.label, mode, seed, nullptr, &msg);
          cell.error += (cell.error.empty() ? "" : "; ") + msg;
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string Report::Text() const {
  std::ostringstream out;
  out << "# " << header.dump() << "\n";
  out << std::left << std::setw(16) << "kernel" << std::setw(13) << "mode" << std::setw(16)
      << "fscore" << std::setw(16) << "auc" << std::setw(16) << "precision" << "runs\n";
  for (const Cell& c : cells) {
    auto both = [&](double metrics::Metrics::*f) {
      return c.runs.empty() ? std::string("-") : Fmt(c.Mean(f)) + "+-" + Fmt(c.Std(f));
    };
    out << std::left << std::setw(16) << c.label << std::setw(13) << config::ModeName(c.mode)
        << std::setw(16) << both(&metrics::Metrics::fscore) << std::setw(16)
        << both(&metrics::Metrics::auc) << std::setw(16) << both(&metrics::Metrics::precision)
        << c.runs.size();
    if (!c.error.empty()) out << "  FAILED: " << c.error;
    out << "\n";
  }
  return out.str();
}

std::string Report::Csv() const {
  std::ostringstream out;
  out << "kernel,mode,fscore,auc,precision,seed,wall_ms\n";
  out << std::setprecision(10);
  for (const Cell& c : cells) {
    for (const Run& r : c.runs) {
      out << c.label << ',' << config::ModeName(c.mode) << ',' << r.metrics.fscore << ','
          << r.metrics.auc << ',' << r.metrics.precision << ',' << r.seed << ',' << r.wall_ms
          << '\n';
    }
  }
  return out.str();
}

nlohmann::json Report::Json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const Cell& c : cells) {
    nlohmann::json runs = nlohmann::json::array();
    for (const Run& r : c.runs) {
      runs.push_back({{"seed", r.seed}, {"wall_ms", r.wall_ms}, {"metrics", metrics::ToJson(r.metrics)}});
    }
    nlohmann::json j = {{"kernel", c.label}, {"mode", config::ModeName(c.mode)}, {"runs", runs}};
    for (auto [name, field] : {std::pair{"fscore", &metrics::Metrics::fscore},
                               std::pair{"auc", &metrics::Metrics::auc},
                               std::pair{"precision", &metrics::Metrics::precision}}) {
      if (!c.runs.empty()) j[name] = {{"mean", c.Mean(field)}, {"std", c.Std(field)}};
    }
    if (!c.error.empty()) j["error"] = c.error;
    cells_json.push_back(std::move(j));
  }
  return {{"config", header}, {"cells", cells_json}};
}

void Report::Write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw Error(ErrorCode::kConfig, "cannot write " + dir + "/" + name);
    f << body;
  };
  put("table.txt", Text());
  put("table.csv", Csv());
  put("manifest.json", Json().dump(2) + "\n");
}

}  // namespace smmd::experiment
