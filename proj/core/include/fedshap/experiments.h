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

// Config-driven experiment runner.
//
// A repeat generates per-source data, splits it into client pairs, flips
// labels of the configured clients, trains the grand coalition with FedAvg,
// builds performance and bias utility tables with the chosen back-end,
// computes Shapley values and allocates every reward pool. All per-stage
// seeds derive from the master seed and the repeat index, so a config fully
// determines the report.

#ifndef FEDSHAP_EXPERIMENTS_H_
#define FEDSHAP_EXPERIMENTS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedshap/fedsim.h"
#include "fedshap/metrics.h"
#include "fedshap/rewards.h"
#include "fedshap/shapley.h"
#include "fedshap/synthdata.h"

namespace fedshap {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

enum class Backend { kExact, kGradientAccum, kEnsemble };

const char* BackendName(Backend b);
std::optional<Backend> ParseBackend(const std::string& name);

enum class PerfScheme { kProportional, kFullPool };

struct PoolConfig {
  RewardPool pool;
  PerfScheme scheme = PerfScheme::kProportional;
  NegativePolicy negative_policy = NegativePolicy::kClampRenormalize;
  double tol = kDefaultBiasTolerance;
};

struct FlipPlan {
  std::vector<int> clients;      // flipped
  std::vector<int> counterparts; // unflipped partner of clients[k]
  double ratio = 0.0;
  std::vector<double> study_ratios = {0.025, 0.05, 0.075};
  int study_repeats = 12;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 42;
  int repeats = 10;
  int n_clients = 6;

  int num_features = 20;
  int num_labels = 8;
  int test_size_per_source = 2000;
  std::vector<SourceParams> sources;

  SplitRegime regime = SplitRegime::kAsIs;
  int per_client_size = 1000;
  double train_fraction = 0.8;

  int hidden = 16;
  FLRunConfig training;

  FlipPlan flip;

  Backend backend = Backend::kEnsemble;
  Accumulation accumulation = Accumulation::kProbability;
  int exact_max_clients = 6;
  bool allow_large_exact = false;
  HeadFitOptions head;

  std::vector<PoolConfig> pools;
  std::vector<std::pair<int, int>> pairs;  // client pairs for paired t-tests

  double failure_threshold = 0.2;
  std::string output_dir;  // runtime only, not part of the report
  int jobs = 1;            // runtime only

  // Index of the source feeding client `c`.
  int SourceOf(int c) const;
};

// Three sources with distinct disparity, a performance pool and one
// bias pool, counterpart pairs (0,1), (2,3), (4,5).
ExperimentConfig DefaultConfig();

// Parses and validates against the published schema; unknown keys and
// out-of-range values raise ConfigError naming the offending path.
ExperimentConfig ParseConfig(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::string& path);
void ValidateConfig(const ExperimentConfig& cfg);
// Canonical JSON of the config without runtime-only fields.
nlohmann::json ConfigToJson(const ExperimentConfig& cfg);

struct ClientManifest {
  int client_id = 0;
  int source = 0;
  int train_a = 0, train_b = 0, validation_a = 0, validation_b = 0;
  double flip_ratio = 0.0;
  std::size_t flipped_entries = 0;
};

struct RepeatResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  double total_auroc = 0.0;   // performance grand utility + 0.5
  double bias = 0.0;          // bias grand utility
  double global_auroc = 0.0;  // FedAvg model itself on the test set
  double global_bias = 0.0;
  int rounds_run = 0;
  int best_round = 0;
  ShapleyVector performance;
  ShapleyVector bias_sv;
  UtilityTables tables;
  std::vector<RewardAllocation> allocations;
  CombinedAllocation combined;
  std::vector<ClientManifest> manifest;
  FLTrace trace;
};

struct RepeatFailure {
  int repeat = 0;
  std::uint64_t seed = 0;
  std::string kind;
  std::string message;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<RepeatResult> repeats;
  std::vector<RepeatFailure> failures;

  std::vector<int> ClientIds() const;
};

// Runs a single repeat. Throws on any stage error.
RepeatResult RunRepeat(const ExperimentConfig& cfg, int repeat);

// Throws ExperimentError when more than cfg.failure_threshold of the repeats
// fail.
RunReport RunExperiment(const ExperimentConfig& cfg);

// Aggregated statistics of a report: means, 95% CIs and paired t-tests.
nlohmann::json Aggregate(const RunReport& report);

struct FlipRow {
  double ratio = 0.0;
  std::string group;  // "flipped" or "unflipped"
  int client_id = -1; // -1 for the group mean row
  double mean_reward = 0.0;
  double ci_half_width = 0.0;
  int n = 0;
};

struct FlipComparison {
  double ratio = 0.0;
  double flipped_mean = 0.0;
  double unflipped_mean = 0.0;
  double p_value = 1.0;
};

struct FlipStudyReport {
  std::vector<double> ratios;  // 0 first, then the study ratios
  std::vector<RunReport> runs;
  std::vector<FlipRow> rows;
  std::vector<FlipComparison> comparisons;
  bool flipped_lower_at_max = false;
  bool unflipped_higher_at_max = false;  // vs. the no-flip baseline
};

// Per-repeat group means of the given performance pool's rewards.
std::pair<std::vector<double>, std::vector<double>> FlipGroupRewards(
    const RunReport& report, const FlipPlan& plan, const std::string& pool_id);

FlipStudyReport LabelFlipStudy(const ExperimentConfig& cfg);

// Writes summary.json, sv_table.csv, bias_sv.csv, rewards.csv,
// allocations.csv, flip.csv, timings.csv, timings_summary.csv plus per-repeat
// tables and traces. Throws ExperimentError for an empty report before
// writing anything.
void EmitReports(const RunReport& report, const std::string& dir);
void EmitFlipStudy(const FlipStudyReport& report, const std::string& dir);

nlohmann::json SummaryJson(const RunReport& report);

struct ReportCheck {
  int repeats = 0;
  double max_table_identity_error = 0.0;  // |sum phi_perf + 0.5 - total AUROC|
  double max_bias_identity_error = 0.0;
  bool rewards_match = true;  // recomputed bit-exactly from persisted phi
  std::vector<std::string> problems;
};

// Recomputes rewards from the persisted Shapley vectors of a summary.json.
ReportCheck VerifySummary(const nlohmann::json& summary);

std::string DefaultOutputDir(const ExperimentConfig& cfg);

}  // namespace fedshap

#endif  // FEDSHAP_EXPERIMENTS_H_
