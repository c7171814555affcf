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

#include "fedshap/fedsim.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fedshap/seed.h"

namespace fedshap {
namespace {

constexpr char kTraceMagic[8] = {'F', 'S', 'H', 'T', 'R', 'A', 'C', 'E'};
constexpr std::uint32_t kTraceVersion = 1;

template <typename T>
void WritePod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void WriteDoubles(std::ostream& out, const std::vector<double>& v) {
  WritePod<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> ReadDoubles(std::istream& in, std::uint64_t limit) {
  const auto n = ReadPod<std::uint64_t>(in);
  if (!in || n > limit) throw IoError("corrupt trace: bad vector length");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

}  // namespace

void ValidateRunConfig(const FLRunConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be >= 0");
  if (cfg.batch <= 0) throw ConfigError("batch must be positive");
  if (cfg.local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  if (cfg.max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
}

double FLTrace::MeanValidationLoss(int round) const {
  const std::vector<double>& losses = validation_loss.at(round - 1);
  double sum = 0.0;
  for (double v : losses) sum += v;
  return sum / static_cast<double>(losses.size());
}

void ApplyMeanDelta(std::vector<double>& params, std::span<const ClientUpdate> updates,
                    Coalition members) {
  const int count = std::popcount(members);
  if (count == 0) throw DomainError("empty coalition has no model");
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t j = 0; j < params.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < updates.size(); ++i)
      if (members >> i & 1u) sum += updates[i].delta[j];
    params[j] += sum * inv;
  }
}

FedAvgResult RunFedAvg(std::span<const ClientDataset* const> clients,
                       const ModelParams& initial, const FLRunConfig& cfg) {
  ValidateRunConfig(cfg);
  if (clients.empty()) throw ConfigError("RunFedAvg: need at least one client");
  if (clients.size() > static_cast<std::size_t>(kMaxCoalitionClients))
    throw ConfigError("RunFedAvg: too many clients for coalition bitmasks");
  for (const ClientDataset* c : clients)
    if (c->train.empty() || c->validation.empty())
      throw ConfigError("client " + std::to_string(c->client_id) +
                        " needs non-empty train and validation sets");

  FedAvgResult result;
  FLTrace& trace = result.trace;
  trace.initial = initial;
  for (const ClientDataset* c : clients) trace.client_ids.push_back(c->client_id);

  const Coalition all = clients.size() == 32 ? ~0u : (1u << clients.size()) - 1u;
  const LocalTrainOptions local{cfg.local_epochs, cfg.lr, cfg.batch};
  ModelParams global = initial;
  double best_loss = INFINITY;
  int since_improvement = 0;
  result.best = initial;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    std::vector<ClientUpdate> updates;
    updates.reserve(clients.size());
    for (const ClientDataset* c : clients) {
      const std::uint64_t seed =
          DeriveSeed(cfg.seed, {static_cast<std::uint64_t>(round),
                                static_cast<std::uint64_t>(c->client_id)});
      ModelParams local_params;
      try {
        local_params = TrainLocal(global, c->train, local, seed);
      } catch (const TrainingError& e) {
        throw RunError("round " + std::to_string(round) + ", client " +
                           std::to_string(c->client_id) + ": " + e.what(),
                       trace, round);
      }
      ClientUpdate u;
      u.round = round;
      u.client_id = c->client_id;
      u.delta.resize(global.values.size());
      for (std::size_t j = 0; j < u.delta.size(); ++j)
        u.delta[j] = local_params.values[j] - global.values[j];
      updates.push_back(std::move(u));
    }
    ApplyMeanDelta(global.values, updates, all);

    std::vector<double> losses;
    losses.reserve(clients.size());
    for (const ClientDataset* c : clients) losses.push_back(MeanLoss(global, c->validation));
    trace.rounds.push_back(std::move(updates));
    trace.validation_loss.push_back(losses);

    const double mean_loss = trace.MeanValidationLoss(round);
    if (!std::isfinite(mean_loss))
      throw RunError("round " + std::to_string(round) + ": non-finite validation loss", trace,
                     round);
    if (mean_loss < best_loss) {
      best_loss = mean_loss;
      trace.best_round = round;
      result.best = global;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

FedAvgResult RunFedAvg(std::span<const ClientDataset> clients, const ModelParams& initial,
                       const FLRunConfig& cfg) {
  std::vector<const ClientDataset*> ptrs;
  ptrs.reserve(clients.size());
  for (const ClientDataset& c : clients) ptrs.push_back(&c);
  return RunFedAvg(std::span<const ClientDataset* const>(ptrs), initial, cfg);
}

ModelParams ReconstructCoalitionModel(const FLTrace& trace, Coalition members, int round) {
  if (members == 0) throw DomainError("empty coalition has no model");
  const int n = trace.NumClients();
  if (n < 32 && (members >> n) != 0)
    throw DomainError("coalition references clients outside the trace");
  if (round < 0 || round > trace.NumRounds()) throw DomainError("round outside the trace");
  ModelParams m = trace.initial;
  for (int t = 0; t < round; ++t) ApplyMeanDelta(m.values, trace.rounds[t], members);
  return m;
}

ModelParams ReconstructCoalitionModel(const FLTrace& trace, Coalition members) {
  return ReconstructCoalitionModel(trace, members, trace.best_round);
}

void SaveTrace(const FLTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kTraceMagic, sizeof(kTraceMagic));
  WritePod(out, kTraceVersion);
  WritePod<std::int32_t>(out, trace.initial.arch.inputs);
  WritePod<std::int32_t>(out, trace.initial.arch.hidden);
  WritePod<std::int32_t>(out, trace.initial.arch.outputs);
  WriteDoubles(out, trace.initial.values);
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(trace.client_ids.size()));
  for (int id : trace.client_ids) WritePod<std::int32_t>(out, id);
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(trace.rounds.size()));
  for (std::size_t t = 0; t < trace.rounds.size(); ++t) {
    for (const ClientUpdate& u : trace.rounds[t]) WriteDoubles(out, u.delta);
    WriteDoubles(out, trace.validation_loss[t]);
  }
  WritePod<std::int32_t>(out, trace.best_round);
  if (!out) throw IoError("failed writing " + path);
}

FLTrace LoadTrace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTraceMagic, sizeof(magic)) != 0)
    throw IoError(path + " is not a trace file");
  const auto version = ReadPod<std::uint32_t>(in);
  if (version != kTraceVersion)
    throw IoError(path + ": unsupported trace version " + std::to_string(version));
  FLTrace trace;
  Architecture arch;
  arch.inputs = ReadPod<std::int32_t>(in);
  arch.hidden = ReadPod<std::int32_t>(in);
  arch.outputs = ReadPod<std::int32_t>(in);
  const std::size_t params = arch.NumParams();
  trace.initial = ModelParams(arch, ReadDoubles(in, params));
  const auto n = ReadPod<std::uint32_t>(in);
  if (!in || n > static_cast<std::uint32_t>(kMaxCoalitionClients))
    throw IoError("corrupt trace: client count");
  for (std::uint32_t i = 0; i < n; ++i) trace.client_ids.push_back(ReadPod<std::int32_t>(in));
  const auto rounds = ReadPod<std::uint32_t>(in);
  for (std::uint32_t t = 0; t < rounds && in; ++t) {
    std::vector<ClientUpdate> updates(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      updates[i].round = static_cast<int>(t + 1);
      updates[i].client_id = trace.client_ids[i];
      updates[i].delta = ReadDoubles(in, params);
      if (updates[i].delta.size() != params) throw IoError("corrupt trace: delta length");
    }
    trace.rounds.push_back(std::move(updates));
    trace.validation_loss.push_back(ReadDoubles(in, n));
  }
  trace.best_round = ReadPod<std::int32_t>(in);
  if (!in) throw IoError(path + ": truncated trace");
  return trace;
}

}  // namespace fedshap
