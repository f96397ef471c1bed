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

#include "smmd/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "smmd/error.h"

namespace smmd::data {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

// Comma-separated fields; double-quoted fields may contain commas.
std::vector<std::string> SplitLine(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(Trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(Trim(cur));
  return out;
}

bool ParseDouble(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && p == end && std::isfinite(v);
}

bool Contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

thread_local int eval_depth = 0;

std::vector<int> Shuffled(int n, std::mt19937_64& gen) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), gen);
  return ids;
}

}  // namespace

Schema Schema::Credit() {
  Schema s;
  s.name = "credit";
  s.label_columns = {"default payment next month", "default.payment.next.month", "default"};
  s.categorical = {"SEX", "EDUCATION", "MARRIAGE"};
  s.drop = {"ID"};
  s.strict = false;
  return s;
}

Schema Schema::Census() {
  Schema s;
  s.name = "census";
  s.label_columns = {"income", "class"};
  s.categorical = {"workclass", "education", "marital-status", "occupation",
                   "relationship", "race", "sex", "native-country"};
  s.positive = {">50K", ">50K."};
  s.negative = {"<=50K", "<=50K."};
  s.strict = false;
  return s;
}

Schema Schema::Named(const std::string& name) {
  if (name == "credit") return Credit();
  if (name == "census") return Census();
  throw Error(ErrorCode::kConfig, "unknown schema '" + name + "' (expected credit or census)");
}

Dataset LoadCsv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kData, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseCsv(buf.str(), schema, path);
}

Dataset ParseCsv(const std::string& text, const Schema& schema, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kData, origin + ": empty file");
  const std::vector<std::string> header = SplitLine(line);

  int label = -1;
  for (const auto& want : schema.label_columns) {
    auto it = std::find(header.begin(), header.end(), want);
    if (it != header.end()) {
      label = static_cast<int>(it - header.begin());
      break;
    }
  }
  if (label < 0) throw Error(ErrorCode::kData, origin + ": no label column found");
  if (schema.strict) {
    for (const auto* list : {&schema.categorical, &schema.drop}) {
      for (const auto& c : *list) {
        if (!Contains(header, c)) throw Error(ErrorCode::kData, origin + ": unknown column '" + c + "'");
      }
    }
  }

  enum class Kind { kNumeric, kCategorical, kSkip };
  std::vector<Kind> kind(header.size(), Kind::kNumeric);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) == label || Contains(schema.drop, header[c])) kind[c] = Kind::kSkip;
    else if (Contains(schema.categorical, header[c])) kind[c] = Kind::kCategorical;
  }

  // First pass: validate rows, collect categorical levels.
  std::vector<std::vector<std::string>> rows;
  std::vector<double> labels;
  std::vector<std::set<std::string>> levels(header.size());
  Dataset ds;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    std::vector<std::string> f = SplitLine(line);
    std::string problem;
    double y = 0.0;
    if (f.size() != header.size()) {
      problem = "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size());
    } else if (Contains(schema.positive, f[label])) {
      y = 1.0;
    } else if (Contains(schema.negative, f[label])) {
      y = -1.0;
    } else {
      problem = "unrecognized label '" + f[label] + "'";
    }
    for (std::size_t c = 0; problem.empty() && c < header.size(); ++c) {
      double v;
      if (kind[c] == Kind::kNumeric && !ParseDouble(f[c], v)) {
        problem = "column '" + header[c] + "': not a number: '" + f[c] + "'";
      }
    }
    if (!problem.empty()) {
      const std::string msg = origin + ":" + std::to_string(lineno) + ": " + problem;
      if (!schema.skip_bad_rows) throw Error(ErrorCode::kData, msg);
      ds.row_errors.push_back(msg);
      continue;
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (kind[c] == Kind::kCategorical) levels[c].insert(f[c]);
    }
    labels.push_back(y);
    rows.push_back(std::move(f));
  }
  if (rows.empty()) throw Error(ErrorCode::kData, origin + ": no usable rows");

  // Encoded layout: columns in header order, categoricals expanded in
  // sorted level order ("?" is just another level).
  std::vector<int> offset(header.size(), -1);
  std::vector<std::map<std::string, int>> level_index(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (kind[c] == Kind::kSkip) continue;
    ++ds.raw_features;
    offset[c] = static_cast<int>(ds.columns.size());
    if (kind[c] == Kind::kNumeric) {
      ds.columns.push_back(header[c]);
    } else {
      for (const auto& lv : levels[c]) {
        level_index[c][lv] = static_cast<int>(ds.columns.size()) - offset[c];
        ds.columns.push_back(header[c] + "=" + lv);
      }
    }
  }

  ds.x = MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.columns.size()));
  ds.y = Eigen::Map<VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (kind[c] == Kind::kNumeric) {
        ParseDouble(rows[r][c], ds.x(r, offset[c]));
      } else if (kind[c] == Kind::kCategorical) {
        ds.x(r, offset[c] + level_index[c][rows[r][c]]) = 1.0;
      }
    }
  }
  return ds;
}

Dataset Subsample(const Dataset& ds, int max_rows, std::uint64_t seed) {
  const int n = static_cast<int>(ds.x.rows());
  if (max_rows <= 0 || max_rows >= n) return ds;
  std::mt19937_64 gen(seed);
  std::vector<int> ids = Shuffled(n, gen);
  ids.resize(max_rows);
  std::sort(ids.begin(), ids.end());
  Dataset out = ds;
  out.x = ds.x(ids, Eigen::all);
  out.y = ds.y(ids);
  return out;
}

Dataset SyntheticTwoGaussian(int rows, int features, std::uint64_t seed, double separation) {
  if (rows < 2 || features < 2) throw Error(ErrorCode::kConfig, "synthetic data needs >= 2 rows and features");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  VectorXd direction(features), offset(features), scale(features);
  for (int j = 0; j < features; ++j) {
    direction(j) = normal(gen);
    offset(j) = 2.0 * normal(gen);
    scale(j) = unif(gen);
  }
  direction *= separation / direction.norm() * std::sqrt(static_cast<double>(features));
  Dataset ds;
  ds.x.resize(rows, features);
  ds.y.resize(rows);
  for (int i = 0; i < rows; ++i) {
    ds.y(i) = i % 2 == 0 ? 1.0 : -1.0;
    for (int j = 0; j < features; ++j) {
      ds.x(i, j) = offset(j) + scale(j) * (0.5 * ds.y(i) * direction(j) + normal(gen));
    }
  }
  for (int j = 0; j < features; ++j) ds.columns.push_back("x" + std::to_string(j));
  ds.raw_features = features;
  return ds;
}

ColumnStats ComputeStats(const MatrixXd& x) {
  if (x.rows() == 0) throw Error(ErrorCode::kData, "cannot normalize an empty matrix");
  ColumnStats s;
  s.mean = x.colwise().mean().transpose();
  s.std.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().mean();
    s.std(j) = var > 1e-24 ? std::sqrt(var) : 0.0;
  }
  return s;
}

MatrixXd ApplyStats(const MatrixXd& x, const ColumnStats& stats) {
  MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (stats.std(j) == 0.0) out.col(j).setZero();
    else out.col(j) = (x.col(j).array() - stats.mean(j)) / stats.std(j);
  }
  return out;
}

ColumnStats Normalize(Dataset& ds) {
  ColumnStats s = ComputeStats(ds.x);
  ds.x = ApplyStats(ds.x, s);
  return s;
}

EvaluationScope::EvaluationScope() { ++eval_depth; }
EvaluationScope::~EvaluationScope() { --eval_depth; }
bool EvaluationScope::active() { return eval_depth > 0; }

nlohmann::json SplitParams::ToJson() const {
  return {{"source_fraction", source_fraction}, {"overlap_fraction", overlap_fraction},
          {"test_fraction", test_fraction}, {"seed", seed}};
}

FederatedSplit FederatedSplit::Vertical(const Dataset& ds, double source_fraction,
                                        double overlap_fraction, std::uint64_t seed) {
  if (!(source_fraction > 0.0 && source_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "source_fraction must be in (0, 1)");
  }
  if (!(overlap_fraction > 0.0 && overlap_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "overlap_fraction must be in (0, 1]");
  }
  const int cols = static_cast<int>(ds.x.cols());
  const int n = static_cast<int>(ds.x.rows());
  const int n_source = static_cast<int>(std::lround(source_fraction * cols));
  if (n_source <= 0 || n_source >= cols) {
    throw Error(ErrorCode::kConfig, "vertical split leaves a party with zero columns (" +
                                        std::to_string(cols) + " columns)");
  }
  FederatedSplit s;
  s.ds_ = ds;
  s.params_.source_fraction = source_fraction;
  s.params_.overlap_fraction = overlap_fraction;
  s.params_.seed = seed;
  std::mt19937_64 gen(seed);
  std::vector<int> perm = Shuffled(cols, gen);
  s.source_columns_.assign(perm.begin(), perm.begin() + n_source);
  s.target_columns_.assign(perm.begin() + n_source, perm.end());
  std::sort(s.source_columns_.begin(), s.source_columns_.end());
  std::sort(s.target_columns_.begin(), s.target_columns_.end());

  const int overlap = std::max(1, static_cast<int>(std::lround(overlap_fraction * n)));
  std::vector<int> rows = Shuffled(n, gen);
  s.co_occurrence_.assign(rows.begin(), rows.begin() + overlap);
  std::sort(s.co_occurrence_.begin(), s.co_occurrence_.end());
  s.train_.resize(n);
  std::iota(s.train_.begin(), s.train_.end(), 0);
  s.is_test_.assign(n, 0);
  s.CheckInvariants();
  return s;
}

void FederatedSplit::TrainTestSplit(double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "test_fraction must be in (0, 1)");
  }
  if (!test_.empty()) throw Error(ErrorCode::kData, "split already partitioned");
  params_.test_fraction = test_fraction;
  std::mt19937_64 gen(seed ^ 0x5851f42d4c957f2dULL);
  for (double cls : {-1.0, 1.0}) {
    std::vector<int> ids;
    for (int i = 0; i < ds_.y.size(); ++i) {
      if (ds_.y(i) == cls) ids.push_back(i);
    }
    std::shuffle(ids.begin(), ids.end(), gen);
    const int n_test = static_cast<int>(std::lround(test_fraction * static_cast<double>(ids.size())));
    if (n_test == 0 || n_test == static_cast<int>(ids.size())) {
      throw Error(ErrorCode::kData, "stratification error: class " + std::to_string(static_cast<int>(cls)) +
                                        " would be absent from the train or test side");
    }
    for (int k = 0; k < n_test; ++k) is_test_[ids[k]] = 1;
  }
  train_.clear();
  for (int i = 0; i < static_cast<int>(is_test_.size()); ++i) {
    (is_test_[i] ? test_ : train_).push_back(i);
  }
  std::erase_if(co_occurrence_, [&](int i) { return is_test_[i] != 0; });
  if (co_occurrence_.empty()) throw Error(ErrorCode::kData, "no co-occurrence rows left in train");

  const ColumnStats stats = ComputeStats(ds_.x(train_, Eigen::all));
  ds_.x = ApplyStats(ds_.x, stats);
  CheckInvariants();
}

FederatedSplit FederatedSplit::Make(const Dataset& ds, const SplitParams& params) {
  FederatedSplit s = Vertical(ds, params.source_fraction, params.overlap_fraction, params.seed);
  s.TrainTestSplit(params.test_fraction, params.seed);
  return s;
}

std::vector<std::string> FederatedSplit::source_column_names() const {
  std::vector<std::string> out;
  for (int c : source_columns_) out.push_back(ds_.columns[c]);
  return out;
}

std::vector<std::string> FederatedSplit::target_column_names() const {
  std::vector<std::string> out;
  for (int c : target_columns_) out.push_back(ds_.columns[c]);
  return out;
}

MatrixXd FederatedSplit::SourceFeatures(const std::vector<int>& ids) const {
  for (int i : ids) {
    if (i < 0 || i >= static_cast<int>(is_test_.size()) || is_test_[i]) {
      throw Error(ErrorCode::kFirewall, "source training access to a non-train sample");
    }
  }
  ++counters_.source_train_features;
  return ds_.x(ids, source_columns_);
}

VectorXd FederatedSplit::SourceLabels(const std::vector<int>& ids) const {
  for (int i : ids) {
    if (i < 0 || i >= static_cast<int>(is_test_.size()) || is_test_[i]) {
      throw Error(ErrorCode::kFirewall, "source label access to a non-train sample");
    }
  }
  ++counters_.source_labels;
  return ds_.y(ids);
}

MatrixXd FederatedSplit::TargetTrainFeatures(const std::vector<int>& ids) const {
  for (int i : ids) {
    if (i < 0 || i >= static_cast<int>(is_test_.size()) || is_test_[i]) {
      throw Error(ErrorCode::kFirewall, "target training access to a non-train sample");
    }
  }
  ++counters_.target_train_features;
  return ds_.x(ids, target_columns_);
}

MatrixXd FederatedSplit::TargetTestFeatures() const {
  ++counters_.target_test_features;
  return ds_.x(test_, target_columns_);
}

VectorXd FederatedSplit::TargetTestLabels() const {
  if (!EvaluationScope::active()) {
    throw Error(ErrorCode::kFirewall, "target labels read outside evaluation");
  }
  ++counters_.target_labels;
  return ds_.y(test_);
}

void FederatedSplit::CheckInvariants() const {
  std::vector<int> both;
  std::set_intersection(source_columns_.begin(), source_columns_.end(), target_columns_.begin(),
                        target_columns_.end(), std::back_inserter(both));
  if (!both.empty()) throw Error(ErrorCode::kData, "source and target columns intersect");
  if (source_columns_.size() + target_columns_.size() != static_cast<std::size_t>(ds_.x.cols())) {
    throw Error(ErrorCode::kData, "column partition does not cover the features");
  }
  for (int i : co_occurrence_) {
    if (i < 0 || i >= ds_.x.rows() || is_test_[i]) {
      throw Error(ErrorCode::kData, "co-occurrence id outside the train partition");
    }
  }
}

nlohmann::json FederatedSplit::Manifest() const {
  return {{"params", params_.ToJson()},
          {"rows", ds_.x.rows()},
          {"n_st", n_st()},
          {"train", train_.size()},
          {"test", test_.size()},
          {"source_columns", source_column_names()},
          {"target_columns", target_column_names()}};
}

void WriteSplit(const FederatedSplit& split, const std::string& prefix) {
  auto write = [&](const std::string& path, const std::vector<std::string>& names,
                   const std::vector<int>& ids, const MatrixXd& x) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kData, "cannot write " + path);
    out << "id";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    out.precision(17);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      out << ids[r];
      for (Eigen::Index c = 0; c < x.cols(); ++c) out << ',' << x(static_cast<Eigen::Index>(r), c);
      out << '\n';
    }
  };
  const auto& co = split.co_occurrence();
  write(prefix + "_source.csv", split.source_column_names(), co, split.SourceFeatures(co));
  write(prefix + "_target.csv", split.target_column_names(), co, split.TargetTrainFeatures(co));
  write(prefix + "_source_labels.csv", {"label"}, co, split.SourceLabels(co));
  std::ofstream manifest(prefix + "_manifest.json");
  manifest << split.Manifest().dump(2) << '\n';
}

}  // namespace smmd::data
