// Copyright 2026 The fedshap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Federated averaging simulation with a full per-round update trace.
//
// Every round each client trains locally from the current global model; the
// server adds the unweighted mean of the client deltas. The trace keeps all
// deltas so that the model of any coalition can be rebuilt later without
// retraining.

#ifndef FEDSHAP_FEDSIM_H_
#define FEDSHAP_FEDSIM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedshap/error.h"
#include "fedshap/model.h"
#include "fedshap/synthdata.h"

namespace fedshap {

// Bitmask over client indices 0..N-1.
using Coalition = std::uint32_t;

inline constexpr int kMaxCoalitionClients = 25;

struct FLRunConfig {
  double lr = 0.1;
  int batch = 32;
  int local_epochs = 1;
  int patience = 10;
  int max_rounds = 200;
  std::uint64_t seed = 0;
};

void ValidateRunConfig(const FLRunConfig& cfg);

struct ClientUpdate {
  int round = 0;  // 1-based
  int client_id = 0;
  std::vector<double> delta;

  bool operator==(const ClientUpdate&) const = default;
};

struct FLTrace {
  ModelParams initial;
  std::vector<int> client_ids;
  // rounds[t - 1][i]: update of client index i in round t.
  std::vector<std::vector<ClientUpdate>> rounds;
  // validation_loss[t - 1][i]: client i's validation loss of the global model
  // after round t.
  std::vector<std::vector<double>> validation_loss;
  int best_round = 0;  // 1-based; 0 if no round completed

  int NumClients() const { return static_cast<int>(client_ids.size()); }
  int NumRounds() const { return static_cast<int>(rounds.size()); }
  double MeanValidationLoss(int round) const;

  bool operator==(const FLTrace&) const = default;
};

struct FedAvgResult {
  ModelParams best;
  FLTrace trace;
  bool early_stopped = false;
};

// Thrown when local training diverges. Carries the trace up to the last
// completed round.
class RunError : public Error {
 public:
  RunError(const std::string& message, FLTrace trace, int round)
      : Error("run", message), trace_(std::move(trace)), round_(round) {}

  const FLTrace& trace() const { return trace_; }
  int round() const { return round_; }

 private:
  FLTrace trace_;
  int round_;
};

// Local seeds derive from (cfg.seed, round, client_id), so a client follows
// the same shuffle stream in every coalition it trains in.
FedAvgResult RunFedAvg(std::span<const ClientDataset* const> clients,
                       const ModelParams& initial, const FLRunConfig& cfg);
FedAvgResult RunFedAvg(std::span<const ClientDataset> clients, const ModelParams& initial,
                       const FLRunConfig& cfg);

// Global-model step shared by aggregation and reconstruction: params plus the
// mean of the deltas of the clients in `members`.
void ApplyMeanDelta(std::vector<double>& params, std::span<const ClientUpdate> updates,
                    Coalition members);

// Coalition model at `round` rebuilt from the grand-coalition trace.
ModelParams ReconstructCoalitionModel(const FLTrace& trace, Coalition members, int round);
// ... at the trace's best round.
ModelParams ReconstructCoalitionModel(const FLTrace& trace, Coalition members);

void SaveTrace(const FLTrace& trace, const std::string& path);
FLTrace LoadTrace(const std::string& path);

}  // namespace fedshap

#endif  // FEDSHAP_FEDSIM_H_
