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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fedshap/experiments.h"
#include "fedshap/metrics.h"
#include "fedshap/seed.h"
#include "fedshap/shapley.h"

namespace fedshap {
namespace {

UtilityTable MakeTable(int n) {
  Rng rng(n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  UtilityTable t(UtilityKind::kPerformance, n);
  for (Coalition s = 1; s <= GrandCoalition(n); ++s) t.Set(s, u(rng));
  return t;
}

void BM_ShapleyFromTable(benchmark::State& state) {
  const UtilityTable t = MakeTable(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ShapleyFromTable(t));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ShapleyFromTable)->DenseRange(4, 16, 4);

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = u(rng) < 0.3;
    scores[i] = u(rng) + 0.3 * labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(Auroc(scores, labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auroc)->Range(1 << 10, 1 << 16);

// Trained once; the loop measures coalition evaluation only.
struct EnsembleSetup {
  FedAvgResult run;
  std::vector<ClientDataset> clients;
  std::vector<LogisticHead> heads;
  std::vector<Sample> test;
};

const EnsembleSetup& Setup() {
  static const EnsembleSetup setup = [] {
    ExperimentConfig cfg = DefaultConfig();
    cfg.repeats = 1;
    cfg.training.max_rounds = 20;
    const RunReport report = RunExperiment(cfg);
    EnsembleSetup s;
    s.run.trace = report.repeats.at(0).trace;
    s.run.best = ReconstructCoalitionModel(s.run.trace, GrandCoalition(cfg.n_clients));
    for (const SourceParams& src : cfg.sources) {
      const std::vector<Sample> part = Generate(MakeGeneratorSpec(src, 99), cfg.test_size_per_source);
      s.test.insert(s.test.end(), part.begin(), part.end());
    }
    const std::vector<Sample> pool = Generate(MakeGeneratorSpec(cfg.sources[0], 98), 6 * 400 * 3);
    SplitPlan plan;
    plan.regime = SplitRegime::kEven5050;
    plan.num_clients = 6;
    plan.per_client_size = 400;
    s.clients = Split(pool, plan, 97);
    s.heads = TrainClientHeads(s.run.best, s.clients);
    return s;
  }();
  return setup;
}

void BM_EnsembleTables(benchmark::State& state) {
  const EnsembleSetup& s = Setup();
  for (auto _ : state)
    benchmark::DoNotOptimize(UtilityTablesEnsemble(s.run.best, 6, s.heads, s.test));
  state.counters["coalitions"] =
      benchmark::Counter(63.0, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_EnsembleTables)->Unit(benchmark::kMillisecond);

void BM_GradientAccumTables(benchmark::State& state) {
  const EnsembleSetup& s = Setup();
  for (auto _ : state) benchmark::DoNotOptimize(UtilityTablesGradientAccum(s.run.trace, s.test));
}
BENCHMARK(BM_GradientAccumTables)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace fedshap

BENCHMARK_MAIN();
