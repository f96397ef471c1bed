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

// Tabular ingestion and the vertical federated split.
//
// A FederatedSplit holds both parties' views of the same samples: disjoint
// column sets, the co-occurrence ids shared by both, and a train/test
// partition. Target labels exist only for evaluation and are reachable only
// inside an EvaluationScope.

#ifndef SMMD_DATA_H_
#define SMMD_DATA_H_

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace smmd::data {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Schema {
  std::string name;
  // First header match wins.
  std::vector<std::string> label_columns;
  std::vector<std::string> categorical;
  std::vector<std::string> drop;
  std::vector<std::string> positive = {"1"};
  std::vector<std::string> negative = {"0"};
  // When false, categorical/drop entries absent from the header are ignored.
  bool strict = true;
  // Unparseable rows are skipped (and recorded) instead of failing the load.
  bool skip_bad_rows = false;

  static Schema Credit();
  static Schema Census();
  // "credit" or "census".
  static Schema Named(const std::string& name);
};

struct Dataset {
  MatrixXd x;
  VectorXd y;  // +-1
  std::vector<std::string> columns;  // encoded column names
  int raw_features = 0;              // before one-hot expansion
  std::vector<std::string> row_errors;
};

Dataset LoadCsv(const std::string& path, const Schema& schema);
// Parses CSV text directly (header row first); `origin` names it in errors.
Dataset ParseCsv(const std::string& text, const Schema& schema,
                 const std::string& origin = "<string>");

// Seeded row subset; returns the input unchanged when max_rows <= 0 or
// max_rows >= rows.
Dataset Subsample(const Dataset& ds, int max_rows, std::uint64_t seed);

// Shifted two-class Gaussian mixture with per-column offsets and scales.
Dataset SyntheticTwoGaussian(int rows, int features, std::uint64_t seed,
                             double separation = 1.0);

struct ColumnStats {
  VectorXd mean;
  VectorXd std;  // 0 for constant columns
};
ColumnStats ComputeStats(const MatrixXd& x);
// z-score with the given stats; zero-variance columns become 0.
MatrixXd ApplyStats(const MatrixXd& x, const ColumnStats& stats);
ColumnStats Normalize(Dataset& ds);

// While alive on the current thread, target labels may be read.
class EvaluationScope {
 public:
  EvaluationScope();
  ~EvaluationScope();
  EvaluationScope(const EvaluationScope&) = delete;
  EvaluationScope& operator=(const EvaluationScope&) = delete;
  static bool active();
};

struct AccessCounters {
  long source_train_features = 0;
  long source_labels = 0;
  long target_train_features = 0;
  long target_test_features = 0;
  long target_labels = 0;
};

struct SplitParams {
  double source_fraction = 0.5;
  double overlap_fraction = 0.5;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  nlohmann::json ToJson() const;
};

class FederatedSplit {
 public:
  // Column partition and co-occurrence ids; every sample is in train until
  // TrainTestSplit runs.
  static FederatedSplit Vertical(const Dataset& ds, double source_fraction,
                                 double overlap_fraction, std::uint64_t seed);
  // Stratified on labels; co-occurrence restricted to train; z-score stats
  // from train rows only, applied to both partitions.
  void TrainTestSplit(double test_fraction, std::uint64_t seed);
  static FederatedSplit Make(const Dataset& ds, const SplitParams& params);

  const std::vector<int>& source_columns() const { return source_columns_; }
  const std::vector<int>& target_columns() const { return target_columns_; }
  std::vector<std::string> source_column_names() const;
  std::vector<std::string> target_column_names() const;
  const std::vector<int>& co_occurrence() const { return co_occurrence_; }
  const std::vector<int>& train_ids() const { return train_; }
  const std::vector<int>& test_ids() const { return test_; }
  int n_st() const { return static_cast<int>(co_occurrence_.size()); }

  // Guarded, counted accessors. Row order follows the id list given.
  MatrixXd SourceFeatures(const std::vector<int>& ids) const;
  VectorXd SourceLabels(const std::vector<int>& ids) const;
  MatrixXd TargetTrainFeatures(const std::vector<int>& ids) const;
  MatrixXd TargetTestFeatures() const;
  // Throws kFirewall outside an EvaluationScope or for non-test ids.
  VectorXd TargetTestLabels() const;

  const AccessCounters& counters() const { return counters_; }
  void ResetCounters() const { counters_ = {}; }

  // Throws kData if any invariant is broken.
  void CheckInvariants() const;
  nlohmann::json Manifest() const;

 private:
  Dataset ds_;
  std::vector<int> source_columns_, target_columns_;
  std::vector<int> co_occurrence_, train_, test_;
  std::vector<char> is_test_;
  SplitParams params_;
  mutable AccessCounters counters_;
};

// Writes <prefix>_source.csv, <prefix>_target.csv (features only, id column
// first), <prefix>_source_labels.csv and a JSON manifest.
void WriteSplit(const FederatedSplit& split, const std::string& prefix);

}  // namespace smmd::data

#endif  // SMMD_DATA_H_
