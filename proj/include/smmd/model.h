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

// Dense source/target networks. The first l1_layers hidden layers are
// domain specific; the next l2_layers are the aligned layers whose outputs
// enter the MMD term. A linear score head sits on the last hidden layer and
// is trained only by the source-only baseline.

#ifndef SMMD_MODEL_H_
#define SMMD_MODEL_H_

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace smmd::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { kRelu, kTanh };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

struct NetworkArch {
  int input_dim = 0;
  std::vector<int> l1_layers = {128};
  std::vector<int> l2_layers = {64};
  Activation activation = Activation::kRelu;

  void Validate() const;
  int hidden_count() const {
    return static_cast<int>(l1_layers.size() + l2_layers.size());
  }
  int width(int hidden_index) const;
  // 0-based hidden-layer indices of the aligned layers.
  std::vector<int> aligned_layers() const;
  int top_width() const { return width(hidden_count() - 1); }

  friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

struct Layer {
  MatrixXd w;  // out x in
  VectorXd b;
};

// Also used for gradients, with identical shapes.
struct NetworkParams {
  NetworkArch arch;
  std::vector<Layer> layers;
  VectorXd head_w;
  double head_b = 0.0;
  std::uint64_t seed = 0;
};
using ParamGrads = NetworkParams;

struct LayerActivations {
  MatrixXd input;
  std::vector<MatrixXd> pre;   // per hidden layer, rows = samples
  std::vector<MatrixXd> post;
  VectorXd score;              // head output per sample

  const MatrixXd& hidden(int index) const { return post[index]; }
  const MatrixXd& top() const { return post.back(); }
};

NetworkParams InitNetwork(const NetworkArch& arch, std::uint64_t seed);
ParamGrads ZeroGrads(const NetworkParams& params);

LayerActivations Forward(const NetworkParams& params, const MatrixXd& batch);

// Reverse mode for a scalar whose partials w.r.t. the head score and any
// hidden-layer outputs are supplied. Either may be empty/zero.
ParamGrads Backward(const NetworkParams& params, const LayerActivations& acts,
                    const VectorXd& dl_dscore,
                    const std::map<int, MatrixXd>& dl_dhidden);

// Translator direction w = (1/N) sum_i y_i h_i.
VectorXd TranslatorWeights(const MatrixXd& source_hidden, const VectorXd& labels);
double TranslatorScore(const MatrixXd& source_hidden, const VectorXd& labels,
                       const VectorXd& target_hidden);

// Second-order expansion of log(1 + exp(-y f)) at f = 0.
double TaylorLogisticLoss(double y, double f);
double TaylorLogisticGrad(double y, double f);
double ExactLogisticLoss(double y, double f);
inline constexpr double kScoreClip = 8.0;
double ClipScore(double f);

// 1/2 sum of squared weights (head included, biases excluded) and its
// gradient.
double L2Reg(const NetworkParams& params, ParamGrads* grads = nullptr);

// acc += scale * g
void AddScaled(ParamGrads& acc, const ParamGrads& g, double scale);
NetworkParams SgdStep(const NetworkParams& params, const ParamGrads& grads,
                      double lr);

std::vector<double> Flatten(const NetworkParams& params);
void Unflatten(const std::vector<double>& flat, NetworkParams& params);

void to_json(nlohmann::json& j, const NetworkArch& arch);
void from_json(const nlohmann::json& j, NetworkArch& arch);
nlohmann::json CheckpointJson(const NetworkParams& params);
NetworkParams ParamsFromCheckpoint(const nlohmann::json& j);
void SaveCheckpoint(const NetworkParams& params, const std::string& path);
NetworkParams LoadCheckpoint(const std::string& path);

}  // namespace smmd::model

#endif  // SMMD_MODEL_H_
