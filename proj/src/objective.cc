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

#include "smmd/objective.h"

#include "smmd/error.h"
#include "smmd/mmd.h"

namespace smmd::objective {

ClassificationResult ClassificationTerm(const MatrixXd& source_top,
                                        const MatrixXd& target_top,
                                        const VectorXd& labels, bool clip) {
  const Eigen::Index n = source_top.rows();
  if (n == 0 || target_top.rows() != n || labels.size() != n) {
    throw Error(ErrorCode::kDomain, "co-occurrence batches are not aligned");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  ClassificationResult out;
  out.translator = model::TranslatorWeights(source_top, labels);
  const VectorXd scores = target_top * out.translator;
  out.dl_dscore.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Clipping is straight-through: the derivative ignores it.
    const double f = clip ? model::ClipScore(scores[i]) : scores[i];
    out.loss += model::TaylorLogisticLoss(labels[i], f) * inv_n;
    out.dl_dscore[i] = model::TaylorLogisticGrad(labels[i], f) * inv_n;
  }
  out.grad_target_top = out.dl_dscore * out.translator.transpose();
  // dPhi_i / dh^s_k = y_k h^t_i / N.
  const VectorXd v = target_top.transpose() * out.dl_dscore;
  out.grad_source_top = labels * v.transpose() * inv_n;
  return out;
}

Evaluation EvaluateHidden(const model::LayerActivations& source,
                          const model::LayerActivations& target,
                          const std::vector<int>& aligned_layers,
                          const VectorXd& labels, const ObjectiveConfig& config) {
  Evaluation out;
  const auto cls = ClassificationTerm(source.top(), target.top(), labels,
                                      config.clip_scores);
  out.terms.cls = cls.loss;
  const int top = static_cast<int>(source.post.size()) - 1;
  out.grads.source[top] = cls.grad_source_top;
  out.grads.target[top] = cls.grad_target_top;
  for (int layer : aligned_layers) {
    const mmd::HiddenBatch hs{source.hidden(layer), layer + 1};
    const mmd::HiddenBatch ht{target.hidden(layer), layer + 1};
    out.terms.mmd += mmd::Mmd2Plain(hs, ht, config.kernel);
    if (config.alpha == 0.0) continue;
    const MatrixXd gs = config.alpha * mmd::Mmd2GradHidden(hs, ht, config.kernel, mmd::Side::kSource);
    const MatrixXd gt = config.alpha * mmd::Mmd2GradHidden(hs, ht, config.kernel, mmd::Side::kTarget);
    auto add = [layer](std::map<int, MatrixXd>& m, const MatrixXd& g) {
      auto [it, fresh] = m.emplace(layer, g);
      if (!fresh) it->second += g;
    };
    add(out.grads.source, gs);
    add(out.grads.target, gt);
  }
  out.terms.total = out.terms.cls + config.alpha * out.terms.mmd;
  return out;
}

FullGradient ObjectiveGradient(const model::NetworkParams& source_params,
                               const model::NetworkParams& target_params,
                               const MatrixXd& source_batch,
                               const MatrixXd& target_batch,
                               const VectorXd& labels,
                               const ObjectiveConfig& config) {
  if (source_params.arch.l2_layers != target_params.arch.l2_layers) {
    throw Error(ErrorCode::kConfig, "aligned layer widths differ between parties");
  }
  const auto acts_s = model::Forward(source_params, source_batch);
  const auto acts_t = model::Forward(target_params, target_batch);
  const auto eval = EvaluateHidden(acts_s, acts_t, source_params.arch.aligned_layers(),
                                   labels, config);
  FullGradient out;
  out.terms = eval.terms;
  out.source = model::Backward(source_params, acts_s, VectorXd(), eval.grads.source);
  out.target = model::Backward(target_params, acts_t, VectorXd(), eval.grads.target);
  model::ParamGrads reg;
  out.terms.reg_source = model::L2Reg(source_params, &reg);
  model::AddScaled(out.source, reg, config.beta / 2.0);
  out.terms.reg_target = model::L2Reg(target_params, &reg);
  model::AddScaled(out.target, reg, config.beta / 2.0);
  out.terms.total += config.beta / 2.0 * (out.terms.reg_source + out.terms.reg_target);
  return out;
}

SourceOnlyGradient SourceOnlyObjective(const model::NetworkParams& params,
                                       const MatrixXd& batch,
                                       const VectorXd& labels, double beta) {
  const auto acts = model::Forward(params, batch);
  const Eigen::Index n = batch.rows();
  if (n == 0 || labels.size() != n) throw Error(ErrorCode::kDomain, "labels do not match batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  SourceOnlyGradient out;
  VectorXd dl_df(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = model::ClipScore(acts.score[i]);
    out.loss += model::TaylorLogisticLoss(labels[i], f) * inv_n;
    dl_df[i] = model::TaylorLogisticGrad(labels[i], f) * inv_n;
  }
  out.grads = model::Backward(params, acts, dl_df, {});
  model::ParamGrads reg;
  out.loss += beta / 2.0 * model::L2Reg(params, &reg);
  model::AddScaled(out.grads, reg, beta / 2.0);
  return out;
}

}  // namespace smmd::objective
