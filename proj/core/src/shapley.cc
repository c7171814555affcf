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

#include "fedshap/shapley.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fedshap/error.h"
#include "parallel.h"

namespace fedshap {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

void CheckClientCount(int n) {
  if (n < 1 || n > kMaxCoalitionClients)
    throw ValuationError("client count must lie in [1, " + std::to_string(kMaxCoalitionClients) +
                         "], got " + std::to_string(n));
}

// Scores every coalition with `score(mask, scores_out)` and fills both
// tables. `base` carries the test labels and groups.
template <typename ScoreFn>
UtilityTables FillTables(int n, const ScoredTestSet& base, int jobs, ScoreFn&& score) {
  UtilityTables out{UtilityTable(UtilityKind::kPerformance, n),
                    UtilityTable(UtilityKind::kBias, n), {}};
  const std::size_t count = (std::size_t{1} << n) - 1;
  std::vector<double> perf(count), bias(count);
  std::vector<std::vector<CoalitionTiming>> timings(count);
  internal::ParallelFor(count, jobs, [&](std::size_t k) {
    const auto mask = static_cast<Coalition>(k + 1);
    ScoredTestSet ts;
    ts.num_labels = base.num_labels;
    ts.labels = base.labels;
    ts.groups = base.groups;
    const auto t0 = Clock::now();
    score(mask, ts.scores, timings[k]);
    const auto t1 = Clock::now();
    try {
      perf[k] = PerformanceUtility(ts);
      const auto t2 = Clock::now();
      bias[k] = BiasUtility(ts);
      const auto t3 = Clock::now();
      const double scoring = Seconds(t0, t1);
      timings[k].push_back({TimingPhase::kPerformance, mask, scoring + Seconds(t1, t2)});
      timings[k].push_back({TimingPhase::kBias, mask, scoring + Seconds(t2, t3)});
    } catch (const Error& e) {
      throw ValuationError("coalition " + std::to_string(mask) + ": " + e.what());
    }
  });
  for (std::size_t k = 0; k < count; ++k) {
    const auto mask = static_cast<Coalition>(k + 1);
    out.performance.Set(mask, perf[k]);
    out.bias.Set(mask, bias[k]);
    for (const CoalitionTiming& t : timings[k]) out.timings.push_back(t);
  }
  return out;
}

ScoredTestSet BaseTestSet(std::span<const Sample> test) {
  if (test.empty()) throw ValuationError("empty test set");
  const std::size_t l = test.front().labels.size();
  return MakeScoredTestSet(test, std::vector<double>(test.size() * l, 0.0));
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::vector<int> Members(Coalition s) {
  std::vector<int> out;
  for (int i = 0; s != 0; ++i, s >>= 1)
    if (s & 1u) out.push_back(i);
  return out;
}

const char* UtilityKindName(UtilityKind kind) {
  return kind == UtilityKind::kPerformance ? "performance" : "bias";
}

std::optional<UtilityKind> ParseUtilityKind(const std::string& name) {
  if (name == "performance") return UtilityKind::kPerformance;
  if (name == "bias") return UtilityKind::kBias;
  return std::nullopt;
}

UtilityTable::UtilityTable(UtilityKind kind, int num_clients)
    : kind_(kind), num_clients_(num_clients) {
  CheckClientCount(num_clients);
  values_.assign(std::size_t{1} << num_clients, std::numeric_limits<double>::quiet_NaN());
  values_[0] = 0.0;
}

void UtilityTable::Set(Coalition s, double utility) {
  if (s == 0) throw ValuationError("the empty coalition's utility is fixed at 0");
  if (s >= values_.size()) throw ValuationError("coalition outside the table");
  if (!std::isfinite(utility))
    throw ValuationError("non-finite utility for coalition " + std::to_string(s));
  values_[s] = utility;
}

bool UtilityTable::Has(Coalition s) const {
  return s < values_.size() && !std::isnan(values_[s]);
}

double UtilityTable::Get(Coalition s) const {
  if (!Has(s)) throw ValuationError("coalition " + std::to_string(s) + " missing from table");
  return values_[s];
}

bool UtilityTable::IsComplete() const {
  if (values_.empty()) return false;
  for (double v : values_)
    if (std::isnan(v)) return false;
  return true;
}

std::vector<Coalition> UtilityTable::MissingCoalitions() const {
  std::vector<Coalition> out;
  for (std::size_t s = 1; s < values_.size(); ++s)
    if (std::isnan(values_[s])) out.push_back(static_cast<Coalition>(s));
  return out;
}

nlohmann::json UtilityTable::ToJson() const {
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t s = 1; s < values_.size(); ++s)
    if (!std::isnan(values_[s])) values[std::to_string(s)] = values_[s];
  return {{"kind", UtilityKindName(kind_)}, {"num_clients", num_clients_}, {"values", values}};
}

UtilityTable UtilityTable::FromJson(const nlohmann::json& j) {
  const auto kind = ParseUtilityKind(j.at("kind").get<std::string>());
  if (!kind) throw ValuationError("unknown utility kind in table JSON");
  UtilityTable t(*kind, j.at("num_clients").get<int>());
  for (const auto& [key, value] : j.at("values").items())
    t.Set(static_cast<Coalition>(std::stoul(key)), value.get<double>());
  return t;
}

nlohmann::json ShapleyVector::ToJson() const {
  return {{"kind", UtilityKindName(kind)}, {"phi", phi}, {"grand_utility", grand_utility}};
}

ShapleyVector ShapleyVector::FromJson(const nlohmann::json& j) {
  ShapleyVector v;
  const auto kind = ParseUtilityKind(j.at("kind").get<std::string>());
  if (!kind) throw ValuationError("unknown utility kind in Shapley JSON");
  v.kind = *kind;
  v.phi = j.at("phi").get<std::vector<double>>();
  v.grand_utility = j.at("grand_utility").get<double>();
  return v;
}

ShapleyVector ShapleyFromTable(const UtilityTable& table) {
  const std::vector<Coalition> missing = table.MissingCoalitions();
  if (table.num_clients() == 0) throw ValuationError("empty utility table");
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "incomplete utility table: " << missing.size() << " missing coalition(s):";
    for (std::size_t i = 0; i < missing.size() && i < 16; ++i) msg << ' ' << missing[i];
    if (missing.size() > 16) msg << " ...";
    throw ValuationError(msg.str());
  }
  const int n = table.num_clients();
  // weight[s] = s! (n - s - 1)! / n! = 1 / (n * C(n - 1, s))
  std::vector<double> weight(n);
  double binom = 1.0;
  for (int s = 0; s < n; ++s) {
    weight[s] = 1.0 / (n * binom);
    binom = binom * (n - 1 - s) / (s + 1);
  }
  ShapleyVector out;
  out.kind = table.kind();
  out.phi.assign(n, 0.0);
  out.grand_utility = table.GrandUtility();
  const Coalition full = GrandCoalition(n);
  for (int i = 0; i < n; ++i) {
    const Coalition bit = Coalition{1} << i;
    // Marginals are summed per coalition size before weighting.
    std::vector<double> by_size(n, 0.0);
    for (Coalition s = 0; s <= full; ++s) {
      if (s & bit) continue;
      by_size[CoalitionSize(s)] += table.Get(s | bit) - table.Get(s);
    }
    double phi = 0.0;
    for (int k = 0; k < n; ++k) phi += weight[k] * by_size[k];
    out.phi[i] = phi;
  }
  return out;
}

double PerformanceUtility(const ScoredTestSet& ts) { return MacroAuroc(ts).value - 0.5; }
double BiasUtility(const ScoredTestSet& ts) { return Bias(ts).value; }
double Utility(UtilityKind kind, const ScoredTestSet& ts) {
  return kind == UtilityKind::kPerformance ? PerformanceUtility(ts) : BiasUtility(ts);
}

const char* TimingPhaseName(TimingPhase phase) {
  switch (phase) {
    case TimingPhase::kTrain: return "train";
    case TimingPhase::kPerformance: return "performance";
    case TimingPhase::kBias: return "bias";
  }
  return "?";
}

UtilityTables UtilityTablesExact(std::span<const ClientDataset> clients,
                                 std::span<const Sample> test, const ModelParams& initial,
                                 const ExactOptions& options) {
  const int n = static_cast<int>(clients.size());
  CheckClientCount(n);
  if (n > options.max_clients && !options.allow_large)
    throw ValuationError("exact retraining of " + std::to_string((1u << n) - 1) +
                         " coalitions refused for " + std::to_string(n) +
                         " clients (limit " + std::to_string(options.max_clients) +
                         "); set allow_large to override");
  const ScoredTestSet base = BaseTestSet(test);
  return FillTables(n, base, options.jobs,
                    [&](Coalition mask, std::vector<double>& scores,
                        std::vector<CoalitionTiming>& timings) {
                      std::vector<const ClientDataset*> members;
                      for (int i : Members(mask)) members.push_back(&clients[i]);
                      const auto t0 = Clock::now();
                      FedAvgResult run = RunFedAvg(members, initial, options.fl);
                      timings.push_back({TimingPhase::kTrain, mask, Seconds(t0, Clock::now())});
                      scores = ScoreSamples(run.best, test);
                    });
}

UtilityTable UtilityTableExact(std::span<const ClientDataset> clients,
                               std::span<const Sample> test, UtilityKind kind,
                               const ModelParams& initial, const ExactOptions& options) {
  return UtilityTablesExact(clients, test, initial, options).Get(kind);
}

UtilityTables UtilityTablesGradientAccum(const FLTrace& trace, std::span<const Sample> test,
                                         int jobs) {
  const int n = trace.NumClients();
  CheckClientCount(n);
  if (trace.best_round < 1) throw ValuationError("trace has no completed round");
  const ScoredTestSet base = BaseTestSet(test);
  return FillTables(n, base, jobs,
                    [&](Coalition mask, std::vector<double>& scores,
                        std::vector<CoalitionTiming>&) {
                      scores = ScoreSamples(ReconstructCoalitionModel(trace, mask), test);
                    });
}

UtilityTables UtilityTablesGradientAccum(const FLTrace& trace,
                                         std::span<const ClientDataset> clients,
                                         std::span<const Sample> test, int jobs) {
  if (clients.size() != trace.client_ids.size())
    throw ValuationError("trace has " + std::to_string(trace.client_ids.size()) +
                         " clients, valuation given " + std::to_string(clients.size()));
  for (std::size_t i = 0; i < clients.size(); ++i)
    if (clients[i].client_id != trace.client_ids[i])
      throw ValuationError("client " + std::to_string(i) + " id " +
                           std::to_string(clients[i].client_id) + " does not match trace id " +
                           std::to_string(trace.client_ids[i]));
  return UtilityTablesGradientAccum(trace, test, jobs);
}

UtilityTable UtilityTableGradientAccum(const FLTrace& trace, std::span<const Sample> test,
                                       UtilityKind kind) {
  return UtilityTablesGradientAccum(trace, test).Get(kind);
}

const char* AccumulationName(Accumulation a) {
  return a == Accumulation::kProbability ? "probability" : "logit";
}

std::optional<Accumulation> ParseAccumulation(const std::string& name) {
  if (name == "probability") return Accumulation::kProbability;
  if (name == "logit") return Accumulation::kLogit;
  return std::nullopt;
}

std::vector<LogisticHead> TrainClientHeads(const ModelParams& feature_model,
                                           std::span<const ClientDataset> clients,
                                           const HeadFitOptions& options) {
  std::vector<LogisticHead> heads;
  heads.reserve(clients.size());
  for (const ClientDataset& c : clients)
    heads.push_back(FitHeadOnSamples(feature_model, c.train, options));
  return heads;
}

UtilityTables UtilityTablesEnsemble(const ModelParams& feature_model, int num_clients,
                                    std::span<const LogisticHead> heads,
                                    std::span<const Sample> test, Accumulation accumulation) {
  CheckClientCount(num_clients);
  if (heads.size() != static_cast<std::size_t>(num_clients))
    throw ValuationError("ensemble needs one head per client: " + std::to_string(num_clients) +
                         " clients, " + std::to_string(heads.size()) + " heads");
  const ScoredTestSet base = BaseTestSet(test);
  const auto l = static_cast<std::size_t>(base.num_labels);
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i].NumLabels() != l)
      throw ValuationError("head " + std::to_string(i) + " predicts " +
                           std::to_string(heads[i].NumLabels()) + " labels, test set has " +
                           std::to_string(l));

  // Head outputs on the shared test features, computed once per client.
  std::vector<std::vector<double>> outputs(heads.size(),
                                           std::vector<double>(test.size() * l));
  for (std::size_t t = 0; t < test.size(); ++t) {
    const std::vector<double> f = ExtractFeatures(feature_model, test[t].features);
    for (std::size_t i = 0; i < heads.size(); ++i) {
      const std::vector<double> o = accumulation == Accumulation::kProbability
                                        ? HeadPredict(heads[i], f)
                                        : HeadLogits(heads[i], f);
      std::copy(o.begin(), o.end(), outputs[i].begin() + static_cast<std::ptrdiff_t>(t * l));
    }
  }
  return FillTables(num_clients, base, 1,
                    [&](Coalition mask, std::vector<double>& scores,
                        std::vector<CoalitionTiming>&) {
                      const std::vector<int> members = Members(mask);
                      const double inv = 1.0 / static_cast<double>(members.size());
                      scores.assign(test.size() * l, 0.0);
                      for (int i : members)
                        for (std::size_t j = 0; j < scores.size(); ++j)
                          scores[j] += outputs[i][j];
                      for (double& s : scores) s *= inv;
                      if (accumulation == Accumulation::kLogit)
                        for (double& s : scores) s = Sigmoid(s);
                    });
}

UtilityTables UtilityTablesEnsemble(const FLTrace& trace, std::span<const LogisticHead> heads,
                                    std::span<const Sample> test, Accumulation accumulation) {
  if (trace.best_round < 1) throw ValuationError("trace has no completed round");
  const ModelParams global = ReconstructCoalitionModel(trace, GrandCoalition(trace.NumClients()));
  return UtilityTablesEnsemble(global, trace.NumClients(), heads, test, accumulation);
}

UtilityTable UtilityTableEnsemble(const FLTrace& trace, std::span<const LogisticHead> heads,
                                  std::span<const Sample> test, UtilityKind kind,
                                  Accumulation accumulation) {
  return UtilityTablesEnsemble(trace, heads, test, accumulation).Get(kind);
}

}  // namespace fedshap
