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

#include "smmd/trainer.h"

#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include "smmd/error.h"
#include "smmd/objective.h"

namespace smmd::trainer {
namespace {

using Clock = std::chrono::steady_clock;
using config::Mode;

constexpr Eigen::Index kMmdProbeRows = 512;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double Ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void CheckFinite(double loss, int epoch, const char* what) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite " << what << " loss at epoch " << epoch
        << " (try a smaller --lr or larger --beta)";
    throw Error(ErrorCode::kTraining, msg.str());
  }
}

protocol::PartyData SourceData(const data::FederatedSplit& split, model::NetworkParams params) {
  return {std::move(params), split.SourceFeatures(split.co_occurrence()),
          split.SourceLabels(split.co_occurrence())};
}

protocol::PartyData TargetData(const data::FederatedSplit& split, model::NetworkParams params) {
  return {std::move(params), split.TargetTrainFeatures(split.co_occurrence()), {}};
}

double AlignedMmd(const config::RunConfig& cfg, const model::NetworkParams& s,
                  const model::NetworkParams& t, const MatrixXd& xs, const MatrixXd& xt,
                  const VectorXd& y) {
  const objective::ObjectiveConfig oc{cfg.KernelSpec(), cfg.alpha, cfg.beta, cfg.clip_scores};
  return objective::EvaluateHidden(model::Forward(s, xs), model::Forward(t, xt),
                                   s.arch.aligned_layers(), y, oc)
      .terms.mmd;
}

void TrainPlaintext(const config::RunConfig& cfg, const data::FederatedSplit& split, TrainResult& r) {
  const auto& co = split.co_occurrence();
  const MatrixXd xs = split.SourceFeatures(co);
  const MatrixXd xt = split.TargetTrainFeatures(co);
  const VectorXd y = split.SourceLabels(co);
  const objective::ObjectiveConfig oc{cfg.KernelSpec(), cfg.alpha, cfg.beta, cfg.clip_scores};
  protocol::EarlyStopper stopper(cfg.early_stop_tol, cfg.early_stop_patience);
  const Eigen::Index probe = std::min<Eigen::Index>(xs.rows(), kMmdProbeRows);
  auto probe_mmd = [&] {
    return AlignedMmd(cfg, r.source, r.target, xs.topRows(probe), xt.topRows(probe), y.head(probe));
  };
  r.epoch_mmd.push_back(probe_mmd());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = protocol::EpochBatches(static_cast<int>(co.size()), cfg.EffectiveBatch(),
                                                cfg.seed_model, epoch);
    double sum = 0.0;
    for (const auto& b : batches) {
      const auto g = objective::ObjectiveGradient(r.source, r.target, xs(b, Eigen::all),
                                                  xt(b, Eigen::all), y(b), oc);
      CheckFinite(g.terms.total, epoch, "objective");
      r.source = model::SgdStep(r.source, g.source, cfg.lr);
      r.target = model::SgdStep(r.target, g.target, cfg.lr);
      sum += g.terms.total;
      ++r.rounds;
    }
    r.metrics.loss_curve.push_back(sum / static_cast<double>(batches.size()));
    r.epoch_mmd.push_back(probe_mmd());
    if (stopper.Update(r.metrics.loss_curve.back())) {
      r.early_stopped = true;
      break;
    }
  }
}

void TrainSourceOnly(const config::RunConfig& cfg, const data::FederatedSplit& split, TrainResult& r) {
  const auto& ids = split.train_ids();
  const MatrixXd xs = split.SourceFeatures(ids);
  const VectorXd y = split.SourceLabels(ids);
  protocol::EarlyStopper stopper(cfg.early_stop_tol, cfg.early_stop_patience);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = protocol::EpochBatches(static_cast<int>(ids.size()), cfg.EffectiveBatch(),
                                                cfg.seed_model, epoch);
    double sum = 0.0;
    for (const auto& b : batches) {
      const auto g = objective::SourceOnlyObjective(r.source, xs(b, Eigen::all), y(b), cfg.beta);
      CheckFinite(g.loss, epoch, "source-only");
      r.source = model::SgdStep(r.source, g.grads, cfg.lr);
      sum += g.loss;
      ++r.rounds;
    }
    r.metrics.loss_curve.push_back(sum / static_cast<double>(batches.size()));
    if (stopper.Update(r.metrics.loss_curve.back())) {
      r.early_stopped = true;
      break;
    }
  }
}

void TrainEncrypted(const config::RunConfig& cfg, const data::FederatedSplit& split, TrainResult& r) {
  const protocol::ProtocolConfig pc = cfg.Protocol();
  auto run = [&](transport::Transport& ls, transport::Transport& lt) {
    protocol::Party source(protocol::Role::kSource, pc, SourceData(split, r.source), ls, cfg.seed_crypto);
    protocol::Party target(protocol::Role::kTarget, pc, TargetData(split, r.target), lt, cfg.seed_crypto);
    const protocol::TwoPartyResult h = protocol::RunTwoParty(source, target);
    r.source = source.params();
    r.target = target.params();
    r.metrics.loss_curve = h.source.epoch_loss;
    r.early_stopped = h.source.early_stopped;
    r.rounds = static_cast<int>(h.source.rounds.size());
  };
  try {
    if (cfg.transport == "tcp") {
      transport::TcpListener listener("127.0.0.1", 0);
      auto accepted = std::async(std::launch::async, [&] { return listener.Accept(pc.timeout); });
      auto client = transport::TcpConnect("127.0.0.1", listener.port(), pc.timeout);
      auto server = accepted.get();
      run(*client, *server);
    } else {
      auto [ls, lt] = transport::LoopbackPair();
      run(*ls, *lt);
    }
  } catch (const Error& e) {
    // A decoded value outside the 2^b budget means the objective is running
    // away (taylor2 Gaussian with a small sigma does this); say so.
    if (e.code() != ErrorCode::kOverflow) throw;
    throw Error(ErrorCode::kTraining,
                std::string("encrypted round left the fixed-point budget, the objective is "
                            "diverging (") + e.what() + "); try a larger --sigma or smaller --lr");
  }
}

}  // namespace

data::FederatedSplit PrepareSplit(const config::RunConfig& cfg) {
  data::Dataset ds;
  if (cfg.data == "synthetic") {
    ds = data::SyntheticTwoGaussian(cfg.synthetic_rows, cfg.synthetic_features, cfg.seed_data);
  } else {
    ds = data::LoadCsv(cfg.data, data::Schema::Named(cfg.SchemaName()));
    ds = data::Subsample(ds, cfg.EffectiveMaxRows(), cfg.seed_data);
  }
  data::SplitParams params = cfg.split;
  params.seed = cfg.seed_data;
  return data::FederatedSplit::Make(ds, params);
}

model::NetworkParams InitSource(const config::RunConfig& cfg, const data::FederatedSplit& split) {
  return model::InitNetwork(cfg.Arch(static_cast<int>(split.source_columns().size())),
                            cfg.seed_model * 2);
}

model::NetworkParams InitTarget(const config::RunConfig& cfg, const data::FederatedSplit& split) {
  return model::InitNetwork(cfg.Arch(static_cast<int>(split.target_columns().size())),
                            cfg.seed_model * 2 + 1);
}

metrics::Metrics Evaluate(const data::FederatedSplit& split, const model::NetworkParams& source,
                          const model::NetworkParams& target, const std::vector<int>& labeled,
                          double threshold) {
  const MatrixXd hs = model::Forward(source, split.SourceFeatures(labeled)).top();
  const VectorXd w = model::TranslatorWeights(hs, split.SourceLabels(labeled));
  const VectorXd scores = model::Forward(target, split.TargetTestFeatures()).top() * w;
  data::EvaluationScope scope;
  return metrics::Score(scores, split.TargetTestLabels(), threshold);
}

TrainResult Train(const config::RunConfig& cfg, const data::FederatedSplit& split) {
  TrainResult r;
  r.config = cfg.ToJson();
  r.config["split_manifest"] = split.Manifest();
  r.source = InitSource(cfg, split);
  r.target = InitTarget(cfg, split);
  const auto start = Clock::now();
  switch (cfg.mode) {
    case Mode::kPlaintext: TrainPlaintext(cfg, split, r); break;
    case Mode::kEncrypted: TrainEncrypted(cfg, split, r); break;
    case Mode::kSourceOnly: TrainSourceOnly(cfg, split, r); break;
  }
  const double train_ms = Ms(start);
  const auto eval_start = Clock::now();
  const std::vector<int>& labeled =
      cfg.mode == Mode::kSourceOnly ? split.train_ids() : split.co_occurrence();
  std::vector<double> curve = std::move(r.metrics.loss_curve);
  r.metrics = Evaluate(split, r.source, r.target, labeled, cfg.threshold);
  r.metrics.loss_curve = std::move(curve);
  r.metrics.wall_ms["train"] = train_ms;
  r.metrics.wall_ms["eval"] = Ms(eval_start);
  r.counters = split.counters();
  return r;
}

TrainResult Train(const config::RunConfig& cfg) {
  const auto start = Clock::now();
  const data::FederatedSplit split = PrepareSplit(cfg);
  const double load_ms = Ms(start);
  TrainResult r = Train(cfg, split);
  r.metrics.wall_ms["data"] = load_ms;
  return r;
}

PartyResult TrainParty(const config::RunConfig& cfg, const data::FederatedSplit& split,
                       protocol::Role role, transport::Transport& link) {
  if (cfg.mode != Mode::kEncrypted) throw Error(ErrorCode::kConfig, "two-process runs need --mode encrypted");
  protocol::PartyData pd = role == protocol::Role::kSource ? SourceData(split, InitSource(cfg, split))
                                                           : TargetData(split, InitTarget(cfg, split));
  protocol::Party party(role, cfg.Protocol(), std::move(pd), link, cfg.seed_crypto);
  PartyResult out;
  out.history = party.Train();
  out.params = party.params();
  return out;
}

}  // namespace smmd::trainer
