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

#include "smmd/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "smmd/error.h"

namespace smmd::model {

namespace {

constexpr char kCheckpointFormat[] = "smmd-checkpoint/1";

MatrixXd Activate(Activation a, const MatrixXd& z) {
  if (a == Activation::kRelu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Elementwise derivative of the activation, from pre- and post-activation.
MatrixXd ActivationGrad(Activation a, const MatrixXd& z, const MatrixXd& h) {
  if (a == Activation::kRelu) {
    return (z.array() > 0.0).cast<double>().matrix();
  }
  return (1.0 - h.array().square()).matrix();
}

bool AllFinite(const ParamGrads& g) {
  for (const Layer& l : g.layers) {
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  }
  return g.head_w.allFinite() && std::isfinite(g.head_b);
}

void RequireSameShape(const NetworkParams& a, const NetworkParams& b) {
  bool ok = a.layers.size() == b.layers.size() && a.head_w.size() == b.head_w.size();
  for (std::size_t i = 0; ok && i < a.layers.size(); ++i) {
    ok = a.layers[i].w.rows() == b.layers[i].w.rows() &&
         a.layers[i].w.cols() == b.layers[i].w.cols() &&
         a.layers[i].b.size() == b.layers[i].b.size();
  }
  if (!ok) throw Error(ErrorCode::kDomain, "parameter shapes differ");
}

}  // namespace

std::string_view ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw Error(ErrorCode::kConfig, "unknown activation '" + std::string(name) + "'");
}

void NetworkArch::Validate() const {
  if (input_dim <= 0) throw Error(ErrorCode::kConfig, "input_dim must be positive");
  if (l2_layers.empty()) throw Error(ErrorCode::kConfig, "need at least one aligned layer");
  for (int w : l1_layers) {
    if (w <= 0) throw Error(ErrorCode::kConfig, "layer widths must be positive");
  }
  for (int w : l2_layers) {
    if (w <= 0) throw Error(ErrorCode::kConfig, "layer widths must be positive");
  }
}

int NetworkArch::width(int hidden_index) const {
  const int n1 = static_cast<int>(l1_layers.size());
  if (hidden_index < 0 || hidden_index >= hidden_count()) {
    throw Error(ErrorCode::kDomain, "hidden layer index out of range");
  }
  return hidden_index < n1 ? l1_layers[hidden_index] : l2_layers[hidden_index - n1];
}

std::vector<int> NetworkArch::aligned_layers() const {
  std::vector<int> out;
  for (int i = static_cast<int>(l1_layers.size()); i < hidden_count(); ++i) out.push_back(i);
  return out;
}

NetworkParams InitNetwork(const NetworkArch& arch, std::uint64_t seed) {
  arch.Validate();
  NetworkParams params;
  params.arch = arch;
  params.seed = seed;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int fan_in = arch.input_dim;
  for (int i = 0; i < arch.hidden_count(); ++i) {
    const int out = arch.width(i);
    Layer layer;
    layer.w.resize(out, fan_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = normal(gen) * scale;
    layer.b = VectorXd::Zero(out);
    params.layers.push_back(std::move(layer));
    fan_in = out;
  }
  params.head_w.resize(fan_in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index r = 0; r < params.head_w.size(); ++r) params.head_w[r] = normal(gen) * scale;
  params.head_b = 0.0;
  return params;
}

ParamGrads ZeroGrads(const NetworkParams& params) {
  ParamGrads g;
  g.arch = params.arch;
  g.seed = params.seed;
  for (const Layer& l : params.layers) {
    g.layers.push_back({MatrixXd::Zero(l.w.rows(), l.w.cols()), VectorXd::Zero(l.b.size())});
  }
  g.head_w = VectorXd::Zero(params.head_w.size());
  return g;
}

LayerActivations Forward(const NetworkParams& params, const MatrixXd& batch) {
  if (batch.cols() != params.arch.input_dim) {
    throw Error(ErrorCode::kDomain, "batch width " + std::to_string(batch.cols()) +
                                        " does not match input_dim " +
                                        std::to_string(params.arch.input_dim));
  }
  LayerActivations acts;
  acts.input = batch;
  const MatrixXd* h = &acts.input;
  for (const Layer& layer : params.layers) {
    MatrixXd z = (*h) * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    acts.post.push_back(Activate(params.arch.activation, z));
    acts.pre.push_back(std::move(z));
    h = &acts.post.back();
  }
  acts.score = (*h) * params.head_w;
  acts.score.array() += params.head_b;
  return acts;
}

ParamGrads Backward(const NetworkParams& params, const LayerActivations& acts,
                    const VectorXd& dl_dscore,
                    const std::map<int, MatrixXd>& dl_dhidden) {
  const Eigen::Index n = acts.input.rows();
  const int layers = static_cast<int>(params.layers.size());
  ParamGrads g = ZeroGrads(params);

  MatrixXd delta = MatrixXd::Zero(n, params.head_w.size());  // dL/d(top output)
  if (dl_dscore.size() != 0) {
    if (dl_dscore.size() != n) throw Error(ErrorCode::kDomain, "dL/dscore has wrong length");
    g.head_w = acts.top().transpose() * dl_dscore;
    g.head_b = dl_dscore.sum();
    delta = dl_dscore * params.head_w.transpose();
  }
  for (const auto& [index, grad] : dl_dhidden) {
    if (index < 0 || index >= layers) throw Error(ErrorCode::kDomain, "no such hidden layer");
    if (grad.rows() != n || grad.cols() != acts.post[index].cols()) {
      throw Error(ErrorCode::kDomain, "hidden gradient shape mismatch at layer " +
                                          std::to_string(index));
    }
  }
  for (int l = layers - 1; l >= 0; --l) {
    if (auto it = dl_dhidden.find(l); it != dl_dhidden.end()) delta += it->second;
    const MatrixXd dz =
        delta.cwiseProduct(ActivationGrad(params.arch.activation, acts.pre[l], acts.post[l]));
    const MatrixXd& below = l == 0 ? acts.input : acts.post[l - 1];
    g.layers[l].w = dz.transpose() * below;
    g.layers[l].b = dz.colwise().sum().transpose();
    if (l > 0) delta = dz * params.layers[l].w;
  }
  return g;
}

VectorXd TranslatorWeights(const MatrixXd& source_hidden, const VectorXd& labels) {
  if (source_hidden.rows() == 0) throw Error(ErrorCode::kDomain, "empty labeled set");
  if (labels.size() != source_hidden.rows()) {
    throw Error(ErrorCode::kDomain, "label count does not match rows");
  }
  return source_hidden.transpose() * labels / static_cast<double>(source_hidden.rows());
}

double TranslatorScore(const MatrixXd& source_hidden, const VectorXd& labels,
                       const VectorXd& target_hidden) {
  const VectorXd w = TranslatorWeights(source_hidden, labels);
  if (w.size() != target_hidden.size()) throw Error(ErrorCode::kDomain, "dimension mismatch");
  return w.dot(target_hidden);
}

double TaylorLogisticLoss(double y, double f) {
  return std::log(2.0) - y * f / 2.0 + f * f / 8.0;
}

double TaylorLogisticGrad(double y, double f) { return -y / 2.0 + f / 4.0; }

double ExactLogisticLoss(double y, double f) { return std::log1p(std::exp(-y * f)); }

double ClipScore(double f) { return std::clamp(f, -kScoreClip, kScoreClip); }

double L2Reg(const NetworkParams& params, ParamGrads* grads) {
  double total = 0.0;
  for (const Layer& l : params.layers) total += l.w.squaredNorm();
  total += params.head_w.squaredNorm();
  if (grads != nullptr) {
    *grads = ZeroGrads(params);
    for (std::size_t i = 0; i < params.layers.size(); ++i) grads->layers[i].w = params.layers[i].w;
    grads->head_w = params.head_w;
  }
  return total / 2.0;
}

void AddScaled(ParamGrads& acc, const ParamGrads& g, double scale) {
  RequireSameShape(acc, g);
  for (std::size_t i = 0; i < acc.layers.size(); ++i) {
    acc.layers[i].w += scale * g.layers[i].w;
    acc.layers[i].b += scale * g.layers[i].b;
  }
  acc.head_w += scale * g.head_w;
  acc.head_b += scale * g.head_b;
}

NetworkParams SgdStep(const NetworkParams& params, const ParamGrads& grads, double lr) {
  if (!(lr > 0.0)) throw Error(ErrorCode::kConfig, "learning rate must be positive");
  if (!AllFinite(grads)) throw Error(ErrorCode::kTraining, "non-finite gradient");
  NetworkParams out = params;
  AddScaled(out, grads, -lr);
  return out;
}

std::vector<double> Flatten(const NetworkParams& params) {
  std::vector<double> flat;
  for (const Layer& l : params.layers) {
    flat.insert(flat.end(), l.w.data(), l.w.data() + l.w.size());
    flat.insert(flat.end(), l.b.data(), l.b.data() + l.b.size());
  }
  flat.insert(flat.end(), params.head_w.data(), params.head_w.data() + params.head_w.size());
  flat.push_back(params.head_b);
  return flat;
}

void Unflatten(const std::vector<double>& flat, NetworkParams& params) {
  std::size_t pos = 0;
  auto take = [&](double* dst, Eigen::Index count) {
    if (pos + static_cast<std::size_t>(count) > flat.size()) {
      throw Error(ErrorCode::kDomain, "flat parameter vector too short");
    }
    std::copy(flat.begin() + pos, flat.begin() + pos + count, dst);
    pos += count;
  };
  for (Layer& l : params.layers) {
    take(l.w.data(), l.w.size());
    take(l.b.data(), l.b.size());
  }
  take(params.head_w.data(), params.head_w.size());
  take(&params.head_b, 1);
  if (pos != flat.size()) throw Error(ErrorCode::kDomain, "flat parameter vector too long");
}

void to_json(nlohmann::json& j, const NetworkArch& arch) {
  j = {{"input_dim", arch.input_dim},
       {"l1_layers", arch.l1_layers},
       {"l2_layers", arch.l2_layers},
       {"activation", ActivationName(arch.activation)}};
}

void from_json(const nlohmann::json& j, NetworkArch& arch) {
  arch.input_dim = j.at("input_dim").get<int>();
  arch.l1_layers = j.at("l1_layers").get<std::vector<int>>();
  arch.l2_layers = j.at("l2_layers").get<std::vector<int>>();
  arch.activation = ParseActivation(j.at("activation").get<std::string>());
}

nlohmann::json CheckpointJson(const NetworkParams& params) {
  return {{"format", kCheckpointFormat},
          {"arch", params.arch},
          {"seed", params.seed},
          {"params", Flatten(params)}};
}

NetworkParams ParamsFromCheckpoint(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) {
    throw Error(ErrorCode::kVersion, "unsupported checkpoint format");
  }
  NetworkParams params = InitNetwork(j.at("arch").get<NetworkArch>(), 0);
  params.seed = j.at("seed").get<std::uint64_t>();
  Unflatten(j.at("params").get<std::vector<double>>(), params);
  return params;
}

void SaveCheckpoint(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kConfig, "cannot write " + path);
  out << CheckpointJson(params).dump() << "\n";
}

NetworkParams LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read " + path);
  return ParamsFromCheckpoint(nlohmann::json::parse(in));
}

}  // namespace smmd::model
