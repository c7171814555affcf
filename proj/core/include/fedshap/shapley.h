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

// Coalition utility tables and exact Shapley values.
//
// A table holds U(S) for every non-empty coalition S of N clients, either the
// macro-AUROC gain over a random classifier (performance) or the subgroup
// AUROC difference (bias). U(empty) is 0 for both kinds. Three back-ends fill
// tables: retraining every coalition from scratch, rebuilding coalition
// models from the grand-coalition update trace, and soft-voting ensembles of
// per-client logistic heads over deep features.

#ifndef FEDSHAP_SHAPLEY_H_
#define FEDSHAP_SHAPLEY_H_

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedshap/fedsim.h"
#include "fedshap/metrics.h"
#include "fedshap/model.h"
#include "nlohmann/json_fwd.hpp"

namespace fedshap {

inline int CoalitionSize(Coalition s) { return std::popcount(s); }
inline bool Contains(Coalition s, int client) { return (s >> client & 1u) != 0; }
inline Coalition GrandCoalition(int n) {
  return n >= 32 ? ~Coalition{0} : (Coalition{1} << n) - 1u;
}
std::vector<int> Members(Coalition s);

enum class UtilityKind { kPerformance, kBias };

const char* UtilityKindName(UtilityKind kind);
std::optional<UtilityKind> ParseUtilityKind(const std::string& name);

class UtilityTable {
 public:
  UtilityTable() = default;
  // Empty table over `num_clients` clients; every coalition starts missing.
  UtilityTable(UtilityKind kind, int num_clients);

  UtilityKind kind() const { return kind_; }
  int num_clients() const { return num_clients_; }
  std::size_t NumCoalitions() const { return values_.size() - 1; }

  void Set(Coalition s, double utility);
  bool Has(Coalition s) const;
  // U(empty) is 0; throws ValuationError for a missing coalition.
  double Get(Coalition s) const;
  double GrandUtility() const { return Get(GrandCoalition(num_clients_)); }

  bool IsComplete() const;
  std::vector<Coalition> MissingCoalitions() const;

  nlohmann::json ToJson() const;
  static UtilityTable FromJson(const nlohmann::json& j);

 private:
  UtilityKind kind_ = UtilityKind::kPerformance;
  int num_clients_ = 0;
  std::vector<double> values_;  // indexed by bitmask, NaN = missing
};

struct ShapleyVector {
  UtilityKind kind = UtilityKind::kPerformance;
  std::vector<double> phi;
  double grand_utility = 0.0;

  std::size_t size() const { return phi.size(); }
  nlohmann::json ToJson() const;
  static ShapleyVector FromJson(const nlohmann::json& j);
};

// phi_i = sum over S not containing i of |S|!(N-|S|-1)!/N! [U(S+i) - U(S)].
// Throws ValuationError listing missing coalitions if the table is incomplete.
ShapleyVector ShapleyFromTable(const UtilityTable& table);

double PerformanceUtility(const ScoredTestSet& ts);
double BiasUtility(const ScoredTestSet& ts);
double Utility(UtilityKind kind, const ScoredTestSet& ts);

enum class TimingPhase { kTrain, kPerformance, kBias };
const char* TimingPhaseName(TimingPhase phase);

struct CoalitionTiming {
  TimingPhase phase = TimingPhase::kPerformance;
  Coalition coalition = 0;
  double seconds = 0.0;
};

// Performance and bias tables built from the same coalition models.
struct UtilityTables {
  UtilityTable performance;
  UtilityTable bias;
  std::vector<CoalitionTiming> timings;

  const UtilityTable& Get(UtilityKind kind) const {
    return kind == UtilityKind::kPerformance ? performance : bias;
  }
};

struct ExactOptions {
  FLRunConfig fl;
  int max_clients = 6;
  bool allow_large = false;  // lift the max_clients guard
  int jobs = 1;
};

// Trains every coalition from scratch with RunFedAvg (shared seed and
// initial model) and scores its best model on `test`.
UtilityTables UtilityTablesExact(std::span<const ClientDataset> clients,
                                 std::span<const Sample> test, const ModelParams& initial,
                                 const ExactOptions& options);
UtilityTable UtilityTableExact(std::span<const ClientDataset> clients,
                               std::span<const Sample> test, UtilityKind kind,
                               const ModelParams& initial, const ExactOptions& options);

// Coalition models rebuilt by ReconstructCoalitionModel. The overload taking
// `clients` checks them against the trace's client ids.
UtilityTables UtilityTablesGradientAccum(const FLTrace& trace, std::span<const Sample> test,
                                         int jobs = 1);
UtilityTables UtilityTablesGradientAccum(const FLTrace& trace,
                                         std::span<const ClientDataset> clients,
                                         std::span<const Sample> test, int jobs = 1);
UtilityTable UtilityTableGradientAccum(const FLTrace& trace, std::span<const Sample> test,
                                       UtilityKind kind);

enum class Accumulation { kProbability, kLogit };

const char* AccumulationName(Accumulation a);
std::optional<Accumulation> ParseAccumulation(const std::string& name);

// One head per client, fitted on the client's training data as seen through
// `feature_model`.
std::vector<LogisticHead> TrainClientHeads(const ModelParams& feature_model,
                                           std::span<const ClientDataset> clients,
                                           const HeadFitOptions& options = {});

// Coalition score for a test sample is the mean of member heads' per-label
// probabilities (or logits, then sigmoid) on the sample's deep features from
// the trace's best global model.
UtilityTables UtilityTablesEnsemble(const FLTrace& trace, std::span<const LogisticHead> heads,
                                    std::span<const Sample> test,
                                    Accumulation accumulation = Accumulation::kProbability);
UtilityTables UtilityTablesEnsemble(const ModelParams& feature_model, int num_clients,
                                    std::span<const LogisticHead> heads,
                                    std::span<const Sample> test,
                                    Accumulation accumulation = Accumulation::kProbability);
UtilityTable UtilityTableEnsemble(const FLTrace& trace, std::span<const LogisticHead> heads,
                                  std::span<const Sample> test, UtilityKind kind,
                                  Accumulation accumulation = Accumulation::kProbability);

}  // namespace fedshap

#endif  // FEDSHAP_SHAPLEY_H_
