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

#include "smmd/metrics.h"

#include <algorithm>
#include <numeric>

#include "smmd/error.h"

namespace smmd::metrics {
namespace {

void CheckInputs(const VectorXd& scores, const VectorXd& labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kDomain, "score and label counts differ");
  }
  if (!scores.allFinite()) throw Error(ErrorCode::kDomain, "non-finite score");
}

}  // namespace

double Auc(const VectorXd& scores, const VectorXd& labels) {
  CheckInputs(scores, labels);
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores(a) < scores(b); });
  // Mann-Whitney with midranks for ties.
  double pos_rank_sum = 0.0;
  long pos = 0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && scores(order[j]) == scores(order[i])) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (Eigen::Index k = i; k < j; ++k) {
      if (labels(order[k]) > 0) {
        pos_rank_sum += midrank;
        ++pos;
      }
    }
    i = j;
  }
  const long neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kDomain, "AUC undefined for a single-class set");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double AucBruteForce(const VectorXd& scores, const VectorXd& labels) {
  CheckInputs(scores, labels);
  double wins = 0.0;
  long pairs = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (labels(i) <= 0) continue;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
      if (labels(j) > 0) continue;
      ++pairs;
      if (scores(i) > scores(j)) wins += 1.0;
      else if (scores(i) == scores(j)) wins += 0.5;
    }
  }
  if (pairs == 0) throw Error(ErrorCode::kDomain, "AUC undefined for a single-class set");
  return wins / static_cast<double>(pairs);
}

Confusion Confuse(const VectorXd& scores, const VectorXd& labels, double threshold) {
  CheckInputs(scores, labels);
  Confusion c;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool pred = scores(i) > threshold;
    const bool truth = labels(i) > 0;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double Precision(const Confusion& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double Recall(const Confusion& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double FScore(const Confusion& c) {
  const double p = Precision(c), r = Recall(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Metrics Score(const VectorXd& scores, const VectorXd& labels, double threshold) {
  Metrics m;
  m.auc = Auc(scores, labels);
  const Confusion c = Confuse(scores, labels, threshold);
  m.precision = Precision(c);
  m.fscore = FScore(c);
  return m;
}

nlohmann::json ToJson(const Metrics& m) {
  return {{"fscore", m.fscore}, {"auc", m.auc}, {"precision", m.precision},
          {"loss_curve", m.loss_curve}, {"wall_ms", m.wall_ms}};
}

}  // namespace smmd::metrics
