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

// Binary classification metrics over real-valued scores and +-1 labels.

#ifndef SMMD_METRICS_H_
#define SMMD_METRICS_H_

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace smmd::metrics {

using Eigen::VectorXd;

// Rank statistic; tied positive/negative pairs count 1/2. Throws kDomain
// when only one class is present.
double Auc(const VectorXd& scores, const VectorXd& labels);
// O(P*N) pair counting, for cross-checks.
double AucBruteForce(const VectorXd& scores, const VectorXd& labels);

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};
// score > threshold predicts +1.
Confusion Confuse(const VectorXd& scores, const VectorXd& labels, double threshold = 0.0);
// 0 when nothing is predicted positive.
double Precision(const Confusion& c);
double Recall(const Confusion& c);
double FScore(const Confusion& c);

struct Metrics {
  double fscore = 0.0;
  double auc = 0.0;
  double precision = 0.0;
  std::vector<double> loss_curve;
  std::map<std::string, double> wall_ms;  // per phase
};

Metrics Score(const VectorXd& scores, const VectorXd& labels, double threshold = 0.0);

nlohmann::json ToJson(const Metrics& m);

}  // namespace smmd::metrics

#endif  // SMMD_METRICS_H_
