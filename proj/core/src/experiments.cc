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

#include "fedshap/experiments.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "fedshap/error.h"
#include "fedshap/seed.h"
#include "internal.h"
#include "parallel.h"

namespace fedshap {
namespace {

using nlohmann::json;

SourceParams WithShare(SourceParams p, double share_a) {
  p.share_a = share_a;
  return p;
}

void Append(std::vector<Sample>& dst, std::vector<Sample> src) {
  dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

std::vector<ClientDataset> BuildClients(const ExperimentConfig& cfg, int repeat) {
  std::vector<ClientDataset> clients(cfg.n_clients);
  const int num_sources = static_cast<int>(cfg.sources.size());
  for (int s = 0; s < num_sources; ++s) {
    std::vector<int> members;
    for (int c = 0; c < cfg.n_clients; ++c)
      if (cfg.SourceOf(c) == s) members.push_back(c);
    if (members.empty()) continue;
    const SourceParams& src = cfg.sources[s];
    const std::size_t pool_size = members.size() * static_cast<std::size_t>(cfg.per_client_size);

    std::vector<Sample> pool;
    pool.reserve(2 * pool_size);
    Append(pool, Generate(MakeGeneratorSpec(WithShare(src, 1.0),
                                            DeriveSeed(cfg.seed, repeat, SeedStage::kPool, 2 * s)),
                          pool_size));
    Append(pool, Generate(MakeGeneratorSpec(WithShare(src, 0.0),
                                            DeriveSeed(cfg.seed, repeat, SeedStage::kPool, 2 * s + 1)),
                          pool_size));

    SplitPlan plan;
    plan.regime = cfg.regime;
    plan.num_clients = static_cast<int>(members.size());
    plan.per_client_size = cfg.per_client_size;
    plan.train_fraction = cfg.train_fraction;
    plan.as_is_share_a = src.share_a;
    std::vector<ClientDataset> split =
        Split(pool, plan, DeriveSeed(cfg.seed, repeat, SeedStage::kSplit, s));
    for (std::size_t k = 0; k < members.size(); ++k) {
      split[k].client_id = members[k];
      clients[members[k]] = std::move(split[k]);
    }
  }
  return clients;
}

std::vector<Sample> BuildTestSet(const ExperimentConfig& cfg, int repeat) {
  std::vector<Sample> test;
  for (std::size_t s = 0; s < cfg.sources.size(); ++s)
    Append(test, Generate(MakeGeneratorSpec(cfg.sources[s],
                                            DeriveSeed(cfg.seed, repeat, SeedStage::kTest, s)),
                          cfg.test_size_per_source));
  return test;
}

int CountGroup(std::span<const Sample> samples, Subgroup g) {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(),
                                        [g](const Sample& s) { return s.subgroup == g; }));
}

json CiJson(std::span<const double> values) {
  json j = {{"mean", Mean(values)}, {"n", values.size()}};
  if (values.size() >= 2)
    j["ci_half_width"] = MeanCi(values).half_width;
  else
    j["ci_half_width"] = nullptr;
  return j;
}

json PairedJson(const std::string& metric, int a, int b, std::span<const double> x,
                std::span<const double> y) {
  json j = {{"metric", metric}, {"client_a", a}, {"client_b", b}};
  if (x.size() < 2) {
    j["t"] = nullptr;
    j["p_value"] = nullptr;
    j["dof"] = nullptr;
    return j;
  }
  const TTestResult t = PairedTTest(x, y);
  j["t"] = std::isfinite(t.t) ? json(t.t) : json(nullptr);
  j["p_value"] = t.p_value;
  j["dof"] = t.dof;
  j["floored"] = t.floored;
  return j;
}

std::vector<double> Column(const RunReport& report, auto&& get) {
  std::vector<double> out;
  out.reserve(report.repeats.size());
  for (const RepeatResult& r : report.repeats) out.push_back(get(r));
  return out;
}

const PoolConfig& FirstPerformancePool(const ExperimentConfig& cfg) {
  for (const PoolConfig& p : cfg.pools)
    if (p.pool.objective == PoolObjective::kPerformance) return p;
  throw ConfigError("label-flip study needs a performance reward pool");
}

void ValidateFlipPairs(const ExperimentConfig& cfg) {
  const FlipPlan& plan = cfg.flip;
  if (plan.clients.empty()) throw ConfigError("unmatched pairs: flip plan names no clients");
  if (plan.clients.size() != plan.counterparts.size())
    throw ConfigError("unmatched pairs: " + std::to_string(plan.clients.size()) +
                      " flipped clients but " + std::to_string(plan.counterparts.size()) +
                      " counterparts");
  std::set<int> seen;
  for (std::size_t k = 0; k < plan.clients.size(); ++k) {
    const int f = plan.clients[k], u = plan.counterparts[k];
    if (!seen.insert(f).second || !seen.insert(u).second)
      throw ConfigError("unmatched pairs: client listed twice in the flip plan");
    if (cfg.SourceOf(f) != cfg.SourceOf(u))
      throw ConfigError("unmatched pairs: clients " + std::to_string(f) + " and " +
                        std::to_string(u) + " come from different sources");
  }
}

}  // namespace

namespace internal {

std::vector<RewardAllocation> AllocatePools(std::span<const PoolConfig> pools,
                                            const ShapleyVector& performance,
                                            const ShapleyVector& bias) {
  std::vector<RewardAllocation> out;
  out.reserve(pools.size());
  for (const PoolConfig& p : pools) {
    if (p.pool.objective == PoolObjective::kPerformance) {
      out.push_back(p.scheme == PerfScheme::kFullPool
                        ? PerfRewardsFullPool(performance, p.pool)
                        : PerfRewards(performance, p.pool, p.negative_policy));
    } else {
      out.push_back(BiasRewards(bias, p.pool, p.tol));
    }
  }
  return out;
}

}  // namespace internal

std::vector<int> RunReport::ClientIds() const {
  std::vector<int> ids(config.n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

RepeatResult RunRepeat(const ExperimentConfig& cfg, int repeat) {
  RepeatResult r;
  r.repeat = repeat;
  r.seed = DeriveSeed(cfg.seed, {static_cast<std::uint64_t>(repeat)});

  std::vector<ClientDataset> clients = BuildClients(cfg, repeat);
  const std::set<int> flipped(cfg.flip.clients.begin(), cfg.flip.clients.end());
  for (ClientDataset& ds : clients) {
    ClientManifest m;
    m.client_id = ds.client_id;
    m.source = cfg.SourceOf(ds.client_id);
    if (flipped.count(ds.client_id) && cfg.flip.ratio > 0.0) {
      m.flip_ratio = cfg.flip.ratio;
      m.flipped_entries = FlipPositions(ds.train.size(), cfg.num_labels, cfg.flip.ratio, 0).size();
      ds = FlipLabels(ds, cfg.flip.ratio,
                      DeriveSeed(cfg.seed, repeat, SeedStage::kFlip, ds.client_id));
    }
    m.train_a = CountGroup(ds.train, Subgroup::kA);
    m.train_b = CountGroup(ds.train, Subgroup::kB);
    m.validation_a = CountGroup(ds.validation, Subgroup::kA);
    m.validation_b = CountGroup(ds.validation, Subgroup::kB);
    r.manifest.push_back(m);
  }
  const std::vector<Sample> test = BuildTestSet(cfg, repeat);

  const Architecture arch{cfg.num_features, cfg.hidden, cfg.num_labels};
  const ModelParams initial = InitParams(arch, DeriveSeed(cfg.seed, repeat, SeedStage::kInit));
  FLRunConfig fl = cfg.training;
  fl.seed = DeriveSeed(cfg.seed, repeat, SeedStage::kTrain);
  FedAvgResult run = RunFedAvg(clients, initial, fl);
  r.rounds_run = run.trace.NumRounds();
  r.best_round = run.trace.best_round;

  const ScoredTestSet global = MakeScoredTestSet(test, ScoreSamples(run.best, test));
  r.global_auroc = MacroAuroc(global).value;
  r.global_bias = Bias(global).value;

  switch (cfg.backend) {
    case Backend::kExact: {
      ExactOptions opts;
      opts.fl = fl;
      opts.max_clients = cfg.exact_max_clients;
      opts.allow_large = cfg.allow_large_exact;
      r.tables = UtilityTablesExact(clients, test, initial, opts);
      break;
    }
    case Backend::kGradientAccum:
      r.tables = UtilityTablesGradientAccum(run.trace, clients, test);
      break;
    case Backend::kEnsemble: {
      const std::vector<LogisticHead> heads = TrainClientHeads(run.best, clients, cfg.head);
      r.tables = UtilityTablesEnsemble(run.best, cfg.n_clients, heads, test, cfg.accumulation);
      break;
    }
  }
  r.performance = ShapleyFromTable(r.tables.performance);
  r.bias_sv = ShapleyFromTable(r.tables.bias);
  r.total_auroc = r.performance.grand_utility + 0.5;
  r.bias = r.bias_sv.grand_utility;
  r.allocations = internal::AllocatePools(cfg.pools, r.performance, r.bias_sv);
  if (!r.allocations.empty()) r.combined = CombinedRewards(r.allocations);
  r.trace = std::move(run.trace);
  return r;
}

RunReport RunExperiment(const ExperimentConfig& cfg) {
  ValidateConfig(cfg);
  std::vector<std::optional<RepeatResult>> results(cfg.repeats);
  std::vector<std::optional<RepeatFailure>> failures(cfg.repeats);
  internal::ParallelFor(cfg.repeats, cfg.jobs, [&](std::size_t k) {
    const int repeat = static_cast<int>(k);
    try {
      results[k] = RunRepeat(cfg, repeat);
    } catch (const Error& e) {
      failures[k] = RepeatFailure{repeat, DeriveSeed(cfg.seed, {k}), e.kind(), e.what()};
    } catch (const std::exception& e) {
      failures[k] = RepeatFailure{repeat, DeriveSeed(cfg.seed, {k}), "internal", e.what()};
    }
  });

  RunReport report;
  report.config = cfg;
  for (int k = 0; k < cfg.repeats; ++k) {
    if (results[k]) report.repeats.push_back(std::move(*results[k]));
    if (failures[k]) report.failures.push_back(std::move(*failures[k]));
  }
  const double failed = static_cast<double>(report.failures.size()) / cfg.repeats;
  if (report.repeats.empty() || failed > cfg.failure_threshold) {
    std::string msg = std::to_string(report.failures.size()) + " of " +
                      std::to_string(cfg.repeats) + " repeats failed";
    if (!report.failures.empty())
      msg += "; first: repeat " + std::to_string(report.failures.front().repeat) + " (" +
             report.failures.front().kind + "): " + report.failures.front().message;
    throw ExperimentError(msg);
  }
  return report;
}

json Aggregate(const RunReport& report) {
  const int n = report.config.n_clients;
  json agg;
  agg["repeats_ok"] = report.repeats.size();
  agg["repeats_failed"] = report.failures.size();
  if (report.repeats.empty()) return agg;

  agg["total_auroc"] = CiJson(Column(report, [](const RepeatResult& r) { return r.total_auroc; }));
  agg["bias"] = CiJson(Column(report, [](const RepeatResult& r) { return r.bias; }));
  agg["global_auroc"] =
      CiJson(Column(report, [](const RepeatResult& r) { return r.global_auroc; }));
  agg["global_bias"] = CiJson(Column(report, [](const RepeatResult& r) { return r.global_bias; }));

  json phi_perf = json::array(), phi_bias = json::array();
  for (int c = 0; c < n; ++c) {
    phi_perf.push_back(
        CiJson(Column(report, [c](const RepeatResult& r) { return r.performance.phi[c]; })));
    phi_bias.push_back(
        CiJson(Column(report, [c](const RepeatResult& r) { return r.bias_sv.phi[c]; })));
  }
  agg["phi_performance"] = phi_perf;
  agg["phi_bias"] = phi_bias;

  json rewards = json::object();
  const std::size_t num_pools = report.repeats.front().allocations.size();
  for (std::size_t p = 0; p < num_pools; ++p) {
    const RewardAllocation& first = report.repeats.front().allocations[p];
    json per_client = json::array();
    for (int c = 0; c < n; ++c) {
      json j = CiJson(
          Column(report, [p, c](const RepeatResult& r) { return r.allocations[p].reward[c]; }));
      if (first.source == PoolSource::kMemberDeposits)
        j["mean_profit"] = Mean(Column(
            report, [p, c](const RepeatResult& r) { return Profit(r.allocations[p])[c]; }));
      per_client.push_back(j);
    }
    rewards[first.pool_id] = {
        {"clients", per_client},
        {"distributed",
         CiJson(Column(report, [p](const RepeatResult& r) { return r.allocations[p].distributed; }))}};
  }
  if (num_pools > 0) {
    json per_client = json::array();
    for (int c = 0; c < n; ++c)
      per_client.push_back(
          CiJson(Column(report, [c](const RepeatResult& r) { return r.combined.total[c]; })));
    rewards["combined"] = {{"clients", per_client}};
  }
  agg["rewards"] = rewards;

  json tests = json::array();
  for (const auto& [a, b] : report.config.pairs) {
    auto pair = [&](const std::string& metric, auto&& get) {
      tests.push_back(PairedJson(metric, a, b, Column(report, [&](const RepeatResult& r) { return get(r, a); }),
                                 Column(report, [&](const RepeatResult& r) { return get(r, b); })));
    };
    pair("phi_performance", [](const RepeatResult& r, int c) { return r.performance.phi[c]; });
    pair("phi_bias", [](const RepeatResult& r, int c) { return r.bias_sv.phi[c]; });
    for (std::size_t p = 0; p < num_pools; ++p)
      pair("reward:" + report.repeats.front().allocations[p].pool_id,
           [p](const RepeatResult& r, int c) { return r.allocations[p].reward[c]; });
  }
  agg["paired_tests"] = tests;
  return agg;
}

std::pair<std::vector<double>, std::vector<double>> FlipGroupRewards(
    const RunReport& report, const FlipPlan& plan, const std::string& pool_id) {
  std::vector<double> flipped, unflipped;
  for (const RepeatResult& r : report.repeats) {
    const RewardAllocation* alloc = nullptr;
    for (const RewardAllocation& a : r.allocations)
      if (a.pool_id == pool_id) alloc = &a;
    if (!alloc) throw ExperimentError("report has no reward pool " + pool_id);
    double f = 0.0, u = 0.0;
    for (int c : plan.clients) f += alloc->reward.at(c);
    for (int c : plan.counterparts) u += alloc->reward.at(c);
    flipped.push_back(f / plan.clients.size());
    unflipped.push_back(u / plan.counterparts.size());
  }
  return {flipped, unflipped};
}

FlipStudyReport LabelFlipStudy(const ExperimentConfig& cfg) {
  ValidateConfig(cfg);
  ValidateFlipPairs(cfg);
  const std::string pool_id = FirstPerformancePool(cfg).pool.id;

  FlipStudyReport out;
  out.ratios.push_back(0.0);
  for (double r : cfg.flip.study_ratios)
    if (r > 0.0) out.ratios.push_back(r);
  std::sort(out.ratios.begin() + 1, out.ratios.end());

  for (double ratio : out.ratios) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.repeats = cfg.flip.study_repeats;
    run_cfg.flip.ratio = ratio;
    out.runs.push_back(RunExperiment(run_cfg));
    const RunReport& report = out.runs.back();

    const auto [flipped, unflipped] = FlipGroupRewards(report, cfg.flip, pool_id);
    auto group_row = [&](const char* group, const std::vector<double>& v) {
      const ConfidenceInterval ci = v.size() >= 2 ? MeanCi(v) : ConfidenceInterval{Mean(v), 0.0};
      out.rows.push_back({ratio, group, -1, ci.mean, ci.half_width, static_cast<int>(v.size())});
    };
    group_row("flipped", flipped);
    group_row("unflipped", unflipped);
    auto client_rows = [&](const char* group, const std::vector<int>& ids) {
      for (int c : ids) {
        std::vector<double> v;
        for (const RepeatResult& r : report.repeats)
          for (const RewardAllocation& a : r.allocations)
            if (a.pool_id == pool_id) v.push_back(a.reward[c]);
        const ConfidenceInterval ci = v.size() >= 2 ? MeanCi(v) : ConfidenceInterval{Mean(v), 0.0};
        out.rows.push_back({ratio, group, c, ci.mean, ci.half_width, static_cast<int>(v.size())});
      }
    };
    client_rows("flipped", cfg.flip.clients);
    client_rows("unflipped", cfg.flip.counterparts);

    FlipComparison cmp;
    cmp.ratio = ratio;
    cmp.flipped_mean = Mean(flipped);
    cmp.unflipped_mean = Mean(unflipped);
    cmp.p_value = flipped.size() >= 2 ? PairedTTest(flipped, unflipped).p_value : 1.0;
    out.comparisons.push_back(cmp);
  }
  const FlipComparison& base = out.comparisons.front();
  const FlipComparison& top = out.comparisons.back();
  out.flipped_lower_at_max =
      out.comparisons.size() > 1 && top.flipped_mean < top.unflipped_mean && top.p_value < 0.05;
  out.unflipped_higher_at_max = out.comparisons.size() > 1 && top.unflipped_mean > base.unflipped_mean;
  return out;
}

}  // namespace fedshap
