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

// The joint training objective on one co-occurrence batch:
//
//   L = L_cls + alpha * sum_l MMD^2_l + beta/2 * (R_s + R_t)
//
// L_cls averages the Taylor logistic loss of the translator score of every
// target row against the label of its source partner. All three MMD terms
// use the same co-occurrence rows, normalized by 1/N^2.

#ifndef SMMD_OBJECTIVE_H_
#define SMMD_OBJECTIVE_H_

#include <Eigen/Dense>

#include <map>
#include <vector>

#include "smmd/kernels.h"
#include "smmd/model.h"

namespace smmd::objective {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ObjectiveConfig {
  kernels::KernelSpec kernel;
  double alpha = 1.0;
  double beta = 0.01;
  bool clip_scores = true;
};

struct LossTerms {
  double cls = 0.0;
  double mmd = 0.0;  // sum over aligned layers, before alpha
  double reg_source = 0.0;
  double reg_target = 0.0;
  double total = 0.0;
};

// Partials of L_cls + alpha * MMD with respect to hidden outputs, keyed by
// 0-based hidden-layer index.
struct HiddenGrads {
  std::map<int, MatrixXd> source;
  std::map<int, MatrixXd> target;
};

struct ClassificationResult {
  double loss = 0.0;
  VectorXd translator;  // w
  VectorXd dl_dscore;   // per target row, includes the 1/N
  MatrixXd grad_source_top;
  MatrixXd grad_target_top;
};

ClassificationResult ClassificationTerm(const MatrixXd& source_top,
                                        const MatrixXd& target_top,
                                        const VectorXd& labels, bool clip);

struct Evaluation {
  LossTerms terms;
  HiddenGrads grads;
};

// Everything except the regularizer, which needs parameters.
Evaluation EvaluateHidden(const model::LayerActivations& source,
                          const model::LayerActivations& target,
                          const std::vector<int>& aligned_layers,
                          const VectorXd& labels, const ObjectiveConfig& config);

struct FullGradient {
  LossTerms terms;
  model::ParamGrads source;
  model::ParamGrads target;
};

// Forward, loss, and parameter gradients of the complete objective.
FullGradient ObjectiveGradient(const model::NetworkParams& source_params,
                               const model::NetworkParams& target_params,
                               const MatrixXd& source_batch,
                               const MatrixXd& target_batch,
                               const VectorXd& labels,
                               const ObjectiveConfig& config);

// Source-only baseline: head score on the source net, Taylor loss plus
// beta/2 * R_s.
struct SourceOnlyGradient {
  double loss = 0.0;
  model::ParamGrads grads;
};
SourceOnlyGradient SourceOnlyObjective(const model::NetworkParams& params,
                                       const MatrixXd& batch,
                                       const VectorXd& labels, double beta);

}  // namespace smmd::objective

#endif  // SMMD_OBJECTIVE_H_
