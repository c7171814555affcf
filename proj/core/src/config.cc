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

// Experiment config parsing. The accepted document is described by
// docs/config.schema.json; this file enforces the same constraints.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "fedshap/error.h"
#include "fedshap/experiments.h"

namespace fedshap {
namespace {

using nlohmann::json;

// Reads members of one JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(path_ + "." + key + ": unknown key");
  }

  const json* Find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Path(const std::string& key) const { return path_ + "." + key; }

  template <typename T>
  void Read(const std::string& key, T& out) {
    const json* v = Find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw ConfigError(Path(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(Path(key) + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError(Path(key) + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)
            throw ConfigError(Path(key) + ": expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(Path(key) + ": expected a string");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(Path(key) + ": " + e.what());
    }
  }

  template <typename Enum, typename ParseFn>
  void ReadEnum(const std::string& key, Enum& out, ParseFn parse) {
    std::string name;
    Read(key, name);
    if (name.empty()) return;
    auto parsed = parse(name);
    if (!parsed) throw ConfigError(Path(key) + ": unknown value '" + name + "'");
    out = *parsed;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SourceParams ParseSource(const json& j, const std::string& path) {
  SourceParams s;
  ObjectReader r(j, path);
  r.Read("name", s.name);
  r.Read("share_a", s.share_a);
  r.Read("disparity", s.disparity);
  r.Read("signal", s.signal);
  r.Read("base_rate", s.base_rate);
  r.Read("label_noise", s.label_noise);
  r.Read("noise_b_extra", s.noise_b_extra);
  r.Read("feature_shift", s.feature_shift);
  r.Read("source_shift", s.source_shift);
  r.Read("task_seed", s.task_seed);
  r.Read("source_seed", s.source_seed);
  return s;
}

std::optional<PerfScheme> ParsePerfScheme(const std::string& name) {
  if (name == "proportional") return PerfScheme::kProportional;
  if (name == "full_pool") return PerfScheme::kFullPool;
  return std::nullopt;
}

std::optional<NegativePolicy> ParseNegativePolicy(const std::string& name) {
  if (name == "clamp") return NegativePolicy::kClampRenormalize;
  if (name == "raw") return NegativePolicy::kRaw;
  return std::nullopt;
}

PoolConfig ParsePool(const json& j, const std::string& path) {
  PoolConfig p;
  ObjectReader r(j, path);
  r.Read("id", p.pool.id);
  r.Read("amount", p.pool.amount);
  r.ReadEnum("source", p.pool.source, ParsePoolSource);
  r.ReadEnum("objective", p.pool.objective, ParsePoolObjective);
  r.ReadEnum("scheme", p.scheme, ParsePerfScheme);
  r.ReadEnum("negative_policy", p.negative_policy, ParseNegativePolicy);
  r.Read("tol", p.tol);
  return p;
}

std::vector<int> ReadIntList(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array");
  std::vector<int> out;
  for (const json& v : j) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected integers");
    out.push_back(v.get<int>());
  }
  return out;
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

const char* BackendName(Backend b) {
  switch (b) {
    case Backend::kExact: return "exact";
    case Backend::kGradientAccum: return "gradient_accum";
    case Backend::kEnsemble: return "ensemble";
  }
  return "?";
}

std::optional<Backend> ParseBackend(const std::string& name) {
  if (name == "exact") return Backend::kExact;
  if (name == "gradient_accum") return Backend::kGradientAccum;
  if (name == "ensemble") return Backend::kEnsemble;
  return std::nullopt;
}

int ExperimentConfig::SourceOf(int c) const {
  if (sources.empty()) return 0;
  return (c / 2) % static_cast<int>(sources.size());
}

ExperimentConfig DefaultConfig() {
  ExperimentConfig cfg;
  cfg.name = "default";
  auto source = [](const char* name, double share, double disparity, double noise,
                   std::uint64_t seed) {
    SourceParams s;
    s.name = name;
    s.share_a = share;
    s.disparity = disparity;
    s.label_noise = noise;
    s.source_shift = 0.3;
    s.task_seed = 7;
    s.source_seed = seed;
    return s;
  };
  cfg.sources = {source("src1", 0.435, 0.4, 1.0, 11), source("src2", 0.406, 0.7, 0.6, 12),
                 source("src3", 0.474, 1.0, 0.3, 13)};
  PoolConfig perf;
  perf.pool = {"performance", 60.0, PoolSource::kMemberDeposits, PoolObjective::kPerformance};
  PoolConfig bias;
  bias.pool = {"bias", 60.0, PoolSource::kMemberDeposits, PoolObjective::kSexBiasLike};
  cfg.pools = {perf, bias};
  cfg.pairs = {{0, 1}, {2, 3}, {4, 5}};
  cfg.flip.clients = {1, 3, 5};
  cfg.flip.counterparts = {0, 2, 4};
  return cfg;
}

void ValidateConfig(const ExperimentConfig& c) {
  Require(!c.name.empty(), "name must not be empty");
  Require(c.repeats >= 1, "repeats must be >= 1");
  Require(c.n_clients >= 2 && c.n_clients % 2 == 0, "n_clients must be an even number >= 2");
  Require(c.n_clients <= kMaxCoalitionClients, "n_clients exceeds the coalition limit");
  Require(c.num_features >= 1 && c.num_labels >= 1, "num_features and num_labels must be >= 1");
  Require(c.test_size_per_source >= 2, "test_size_per_source must be >= 2");
  Require(!c.sources.empty(), "at least one source is required");
  for (const SourceParams& s : c.sources) {
    Require(s.share_a >= 0.0 && s.share_a <= 1.0, "source " + s.name + ": share_a outside [0, 1]");
    Require(s.disparity >= 0.0, "source " + s.name + ": disparity must be >= 0");
    Require(s.label_noise >= 0.0 && s.noise_b_extra >= 0.0,
            "source " + s.name + ": noise must be >= 0");
    Require(s.base_rate > 0.0 && s.base_rate < 1.0, "source " + s.name + ": base_rate outside (0, 1)");
    Require(s.signal >= 0.0, "source " + s.name + ": signal must be >= 0");
  }
  Require(c.per_client_size >= 2, "per_client_size must be >= 2");
  Require(c.train_fraction > 0.0 && c.train_fraction < 1.0, "train_fraction outside (0, 1)");
  Require(c.hidden >= 0, "hidden must be >= 0");
  ValidateRunConfig(c.training);

  auto valid_client = [&](int i) { return i >= 0 && i < c.n_clients; };
  Require(c.flip.ratio >= 0.0 && c.flip.ratio <= 1.0, "flip.ratio outside [0, 1]");
  for (double r : c.flip.study_ratios)
    Require(r >= 0.0 && r <= 1.0, "flip.study_ratios entries must lie in [0, 1]");
  Require(c.flip.study_repeats >= 2, "flip.study_repeats must be >= 2");
  for (int i : c.flip.clients) Require(valid_client(i), "flip.clients: client index out of range");
  for (int i : c.flip.counterparts)
    Require(valid_client(i), "flip.counterparts: client index out of range");

  Require(c.exact_max_clients >= 1, "exact_max_clients must be >= 1");
  if (c.backend == Backend::kExact && c.n_clients > c.exact_max_clients && !c.allow_large_exact)
    throw ConfigError("backend exact with " + std::to_string(c.n_clients) +
                      " clients exceeds exact_max_clients=" + std::to_string(c.exact_max_clients) +
                      "; set valuation.allow_large_exact to override");
  Require(c.head.iterations >= 1 && c.head.lr > 0.0, "head iterations and lr must be positive");

  std::set<std::string> ids;
  for (const PoolConfig& p : c.pools) {
    Require(!p.pool.id.empty(), "pool id must not be empty");
    Require(ids.insert(p.pool.id).second, "duplicate pool id " + p.pool.id);
    Require(p.pool.id != "combined", "pool id 'combined' is reserved");
    Require(p.pool.amount > 0.0 && std::isfinite(p.pool.amount), "pool " + p.pool.id + ": amount must be positive");
    Require(p.tol >= 0.0, "pool " + p.pool.id + ": tol must be >= 0");
  }
  for (const auto& [a, b] : c.pairs)
    Require(valid_client(a) && valid_client(b) && a != b, "pairs: invalid client pair");
  Require(c.failure_threshold >= 0.0 && c.failure_threshold <= 1.0,
          "failure_threshold outside [0, 1]");
  Require(c.jobs >= 1, "jobs must be >= 1");
}

ExperimentConfig ParseConfig(const json& j) {
  ExperimentConfig c = DefaultConfig();
  {
    ObjectReader r(j, "$");
    int version = kConfigSchemaVersion;
    r.Read("schema_version", version);
    if (version != kConfigSchemaVersion)
      throw ConfigError("$.schema_version: unsupported version " + std::to_string(version));
    r.Read("name", c.name);
    r.Read("seed", c.seed);
    r.Read("repeats", c.repeats);
    r.Read("n_clients", c.n_clients);
    r.Read("output_dir", c.output_dir);
    r.Read("jobs", c.jobs);
    r.Read("failure_threshold", c.failure_threshold);

    if (const json* d = r.Find("data")) {
      ObjectReader dr(*d, "$.data");
      dr.Read("num_features", c.num_features);
      dr.Read("num_labels", c.num_labels);
      dr.Read("test_size_per_source", c.test_size_per_source);
      if (const json* s = dr.Find("sources")) {
        if (!s->is_array()) throw ConfigError("$.data.sources: expected an array");
        c.sources.clear();
        for (std::size_t i = 0; i < s->size(); ++i)
          c.sources.push_back(ParseSource((*s)[i], "$.data.sources[" + std::to_string(i) + "]"));
      }
    }
    if (const json* s = r.Find("split")) {
      ObjectReader sr(*s, "$.split");
      sr.ReadEnum("regime", c.regime, ParseSplitRegime);
      sr.Read("per_client_size", c.per_client_size);
      sr.Read("train_fraction", c.train_fraction);
    }
    if (const json* m = r.Find("model")) {
      ObjectReader mr(*m, "$.model");
      mr.Read("hidden", c.hidden);
    }
    if (const json* t = r.Find("training")) {
      ObjectReader tr(*t, "$.training");
      tr.Read("lr", c.training.lr);
      tr.Read("batch", c.training.batch);
      tr.Read("local_epochs", c.training.local_epochs);
      tr.Read("patience", c.training.patience);
      tr.Read("max_rounds", c.training.max_rounds);
    }
    if (const json* f = r.Find("flip")) {
      ObjectReader fr(*f, "$.flip");
      if (const json* v = fr.Find("clients")) c.flip.clients = ReadIntList(*v, "$.flip.clients");
      if (const json* v = fr.Find("counterparts"))
        c.flip.counterparts = ReadIntList(*v, "$.flip.counterparts");
      fr.Read("ratio", c.flip.ratio);
      if (const json* v = fr.Find("study_ratios")) {
        if (!v->is_array()) throw ConfigError("$.flip.study_ratios: expected an array");
        c.flip.study_ratios.clear();
        for (const json& x : *v) {
          if (!x.is_number()) throw ConfigError("$.flip.study_ratios: expected numbers");
          c.flip.study_ratios.push_back(x.get<double>());
        }
      }
      fr.Read("study_repeats", c.flip.study_repeats);
    }
    if (const json* v = r.Find("valuation")) {
      ObjectReader vr(*v, "$.valuation");
      vr.ReadEnum("backend", c.backend, ParseBackend);
      vr.ReadEnum("accumulation", c.accumulation, ParseAccumulation);
      vr.Read("exact_max_clients", c.exact_max_clients);
      vr.Read("allow_large_exact", c.allow_large_exact);
      vr.Read("head_iterations", c.head.iterations);
      vr.Read("head_lr", c.head.lr);
    }
    if (const json* p = r.Find("pools")) {
      if (!p->is_array()) throw ConfigError("$.pools: expected an array");
      c.pools.clear();
      for (std::size_t i = 0; i < p->size(); ++i)
        c.pools.push_back(ParsePool((*p)[i], "$.pools[" + std::to_string(i) + "]"));
    }
    if (const json* p = r.Find("pairs")) {
      if (!p->is_array()) throw ConfigError("$.pairs: expected an array");
      c.pairs.clear();
      for (const json& pair : *p) {
        const std::vector<int> v = ReadIntList(pair, "$.pairs");
        if (v.size() != 2) throw ConfigError("$.pairs: each pair needs two client indices");
        c.pairs.emplace_back(v[0], v[1]);
      }
    }
  }
  for (SourceParams& s : c.sources) {
    s.num_features = c.num_features;
    s.num_labels = c.num_labels;
  }
  ValidateConfig(c);
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return ParseConfig(j);
}

json ConfigToJson(const ExperimentConfig& c) {
  json sources = json::array();
  for (const SourceParams& s : c.sources)
    sources.push_back({{"name", s.name},
                       {"share_a", s.share_a},
                       {"disparity", s.disparity},
                       {"signal", s.signal},
                       {"base_rate", s.base_rate},
                       {"label_noise", s.label_noise},
                       {"noise_b_extra", s.noise_b_extra},
                       {"feature_shift", s.feature_shift},
                       {"source_shift", s.source_shift},
                       {"task_seed", s.task_seed},
                       {"source_seed", s.source_seed}});
  json pools = json::array();
  for (const PoolConfig& p : c.pools)
    pools.push_back({{"id", p.pool.id},
                     {"amount", p.pool.amount},
                     {"source", PoolSourceName(p.pool.source)},
                     {"objective", PoolObjectiveName(p.pool.objective)},
                     {"scheme", p.scheme == PerfScheme::kProportional ? "proportional" : "full_pool"},
                     {"negative_policy",
                      p.negative_policy == NegativePolicy::kRaw ? "raw" : "clamp"},
                     {"tol", p.tol}});
  json pairs = json::array();
  for (const auto& [a, b] : c.pairs) pairs.push_back({a, b});
  return {{"schema_version", kConfigSchemaVersion},
          {"name", c.name},
          {"seed", c.seed},
          {"repeats", c.repeats},
          {"n_clients", c.n_clients},
          {"failure_threshold", c.failure_threshold},
          {"data",
           {{"num_features", c.num_features},
            {"num_labels", c.num_labels},
            {"test_size_per_source", c.test_size_per_source},
            {"sources", sources}}},
          {"split",
           {{"regime", SplitRegimeName(c.regime)},
            {"per_client_size", c.per_client_size},
            {"train_fraction", c.train_fraction}}},
          {"model", {{"hidden", c.hidden}}},
          {"training",
           {{"lr", c.training.lr},
            {"batch", c.training.batch},
            {"local_epochs", c.training.local_epochs},
            {"patience", c.training.patience},
            {"max_rounds", c.training.max_rounds}}},
          {"flip",
           {{"clients", c.flip.clients},
            {"counterparts", c.flip.counterparts},
            {"ratio", c.flip.ratio},
            {"study_ratios", c.flip.study_ratios},
            {"study_repeats", c.flip.study_repeats}}},
          {"valuation",
           {{"backend", BackendName(c.backend)},
            {"accumulation", AccumulationName(c.accumulation)},
            {"exact_max_clients", c.exact_max_clients},
            {"allow_large_exact", c.allow_large_exact},
            {"head_iterations", c.head.iterations},
            {"head_lr", c.head.lr}}},
          {"pools", pools},
          {"pairs", pairs}};
}

std::string DefaultOutputDir(const ExperimentConfig& cfg) {
  const char* root = std::getenv("FEDSHAP_OUTPUT_ROOT");
  const std::string base = root && *root ? root : "runs";
  if (!cfg.output_dir.empty()) {
    if (cfg.output_dir.front() == '/' || !(root && *root)) return cfg.output_dir;
    return base + "/" + cfg.output_dir;
  }
  return base + "/" + cfg.name;
}

}  // namespace fedshap
