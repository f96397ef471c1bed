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

// Training orchestration for the three run modes and target-side
// evaluation through the translator.

#ifndef SMMD_TRAINER_H_
#define SMMD_TRAINER_H_

#include <optional>
#include <vector>

#include "json.hpp"
#include "smmd/config.h"
#include "smmd/data.h"
#include "smmd/metrics.h"
#include "smmd/model.h"
#include "smmd/party.h"
#include "smmd/transport.h"

namespace smmd::trainer {

struct TrainResult {
  model::NetworkParams source, target;
  metrics::Metrics metrics;      // loss_curve holds the per-epoch loss
  // Sum of MMD^2 over aligned layers on the first 512 co-occurrence rows,
  // before epoch 0 and after every epoch; plaintext mode only.
  std::vector<double> epoch_mmd;
  bool early_stopped = false;
  int rounds = 0;
  data::AccessCounters counters;
  nlohmann::json config;
};

// Loads (or synthesizes) the dataset and builds the split from the config.
data::FederatedSplit PrepareSplit(const config::RunConfig& config);

model::NetworkParams InitSource(const config::RunConfig& config, const data::FederatedSplit& split);
model::NetworkParams InitTarget(const config::RunConfig& config, const data::FederatedSplit& split);

// Scores the target test view with the translator built from the labeled
// source rows `labeled` and reads target labels inside an EvaluationScope.
metrics::Metrics Evaluate(const data::FederatedSplit& split, const model::NetworkParams& source,
                          const model::NetworkParams& target, const std::vector<int>& labeled,
                          double threshold);

// Runs both parties (in-process for encrypted mode) and evaluates.
TrainResult Train(const config::RunConfig& config, const data::FederatedSplit& split);
TrainResult Train(const config::RunConfig& config);

// One party of a two-process encrypted run over an established link. The
// returned params are this party's; metrics are left empty since neither
// side can evaluate alone.
struct PartyResult {
  model::NetworkParams params;
  protocol::TrainHistory history;
};
PartyResult TrainParty(const config::RunConfig& config, const data::FederatedSplit& split,
                       protocol::Role role, transport::Transport& link);

}  // namespace smmd::trainer

#endif  // SMMD_TRAINER_H_
