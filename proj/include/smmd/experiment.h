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

// Multi-seed experiment tables: one row per (label, mode) cell, mean and
// standard deviation over seeds, written as text, CSV and JSON.

#ifndef SMMD_EXPERIMENT_H_
#define SMMD_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "smmd/config.h"
#include "smmd/metrics.h"

namespace smmd::experiment {

struct Run {
  std::uint64_t seed = 0;
  metrics::Metrics metrics;
  double wall_ms = 0.0;
};

struct Cell {
  std::string label;  // kernel, or the swept setting
  config::Mode mode = config::Mode::kPlaintext;
  std::vector<Run> runs;
  std::string error;  // set when any seed failed

  double Mean(double metrics::Metrics::*field) const;
  double Std(double metrics::Metrics::*field) const;
};

struct Report {
  nlohmann::json header;  // effective base config
  std::vector<Cell> cells;

  std::string Text() const;
  // One line per run: kernel,mode,fscore,auc,precision,seed,wall_ms.
  std::string Csv() const;
  nlohmann::json Json() const;
  // <dir>/table.txt, table.csv, manifest.json.
  void Write(const std::string& dir) const;
};

struct CellSpec {
  std::string label;
  config::RunConfig config;  // validated
};

using Progress = std::function<void(const std::string& label, config::Mode mode,
                                    std::uint64_t seed, const Run* run,
                                    const std::string* error)>;

// Every cell config is run once per seed (seed_data, seed_model and
// seed_crypto all set to the seed) and once per mode. A failing run is
// recorded in its cell and the table continues.
Report RunTable(const std::vector<CellSpec>& cells, const std::vector<config::Mode>& modes,
                const std::vector<std::uint64_t>& seeds, const Progress& progress = {});

// Cells for a kernel grid such as {"linear", "gaussian:1", "gaussian:2",
// "poly:2"}; throws kConfig on an empty grid or unknown entry.
std::vector<CellSpec> KernelGrid(const config::RunConfig& base,
                                 const std::vector<std::string>& kernels);
// Cells varying one config key, e.g. ("alpha", {"0.1", "1", "10"}).
std::vector<CellSpec> Sweep(const config::RunConfig& base, const std::string& key,
                            const std::vector<std::string>& values);

}  // namespace smmd::experiment

#endif  // SMMD_EXPERIMENT_H_
