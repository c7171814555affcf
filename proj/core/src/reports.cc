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

// Report emission and verification.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fedshap/error.h"
#include "fedshap/experiments.h"
#include "internal.h"

namespace fedshap {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string Exact(double v) { return Format("%.17g", v); }
// Monetary amounts are rounded only here, at emission.
std::string Money(double v) {
  std::string s = Format("%.2f", v);
  return s == "-0.00" ? "0.00" : s;
}

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string SplitLabel(const ExperimentConfig& cfg) { return SplitRegimeName(cfg.regime); }

std::string SvTable(const RunReport& report, bool bias) {
  const int n = report.config.n_clients;
  std::ostringstream out;
  out << "split,repeat";
  for (int c = 0; c < n; ++c) out << ",client_" << c;
  out << (bias ? ",bias\n" : ",total_auroc\n");
  std::vector<double> mean(n + 1, 0.0);
  for (const RepeatResult& r : report.repeats) {
    const ShapleyVector& sv = bias ? r.bias_sv : r.performance;
    out << SplitLabel(report.config) << ',' << r.repeat;
    for (int c = 0; c < n; ++c) {
      out << ',' << Exact(sv.phi[c]);
      mean[c] += sv.phi[c];
    }
    const double total = bias ? r.bias : r.total_auroc;
    mean[n] += total;
    out << ',' << Exact(total) << '\n';
  }
  out << SplitLabel(report.config) << ",mean";
  for (double& v : mean) out << ',' << Exact(v / report.repeats.size());
  out << '\n';
  return out.str();
}

std::string RewardsTable(const RunReport& report, const json& agg) {
  std::ostringstream out;
  out << "pool_id,client_id,mean_reward,ci_half_width,mean_profit\n";
  for (const auto& [pool_id, pool] : agg["rewards"].items()) {
    const json& clients = pool["clients"];
    for (std::size_t c = 0; c < clients.size(); ++c) {
      const json& j = clients[c];
      out << pool_id << ',' << c << ',' << Money(j["mean"].get<double>()) << ','
          << (j["ci_half_width"].is_null() ? "" : Money(j["ci_half_width"].get<double>())) << ','
          << (j.contains("mean_profit") ? Money(j["mean_profit"].get<double>()) : "") << '\n';
    }
  }
  (void)report;
  return out.str();
}

std::string FlipCsv(const std::vector<FlipRow>& rows) {
  std::ostringstream out;
  out << "ratio,group,client_id,mean_reward,ci_half_width,n\n";
  for (const FlipRow& r : rows) {
    out << Format("%.4g", r.ratio) << ',' << r.group << ',';
    if (r.client_id >= 0) out << r.client_id;
    out << ',' << Money(r.mean_reward) << ',' << Money(r.ci_half_width) << ',' << r.n << '\n';
  }
  return out.str();
}

std::vector<FlipRow> RunFlipRows(const RunReport& report) {
  const ExperimentConfig& cfg = report.config;
  std::vector<FlipRow> rows;
  if (cfg.flip.clients.empty()) return rows;
  const PoolConfig* perf = nullptr;
  for (const PoolConfig& p : cfg.pools)
    if (p.pool.objective == PoolObjective::kPerformance) {
      perf = &p;
      break;
    }
  if (!perf) return rows;
  FlipPlan plan = cfg.flip;
  if (plan.counterparts.size() != plan.clients.size()) plan.counterparts.clear();
  auto add = [&](const char* group, const std::vector<int>& ids) {
    if (ids.empty()) return;
    std::vector<double> v;
    for (const RepeatResult& r : report.repeats) {
      double s = 0.0;
      for (int c : ids)
        for (const RewardAllocation& a : r.allocations)
          if (a.pool_id == perf->pool.id) s += a.reward[c];
      v.push_back(s / ids.size());
    }
    const ConfidenceInterval ci = v.size() >= 2 ? MeanCi(v) : ConfidenceInterval{Mean(v), 0.0};
    rows.push_back({cfg.flip.ratio, group, -1, ci.mean, ci.half_width, static_cast<int>(v.size())});
  };
  add("flipped", plan.clients);
  add("unflipped", plan.counterparts);
  return rows;
}

std::string TimingsCsv(const RunReport& report) {
  std::ostringstream out;
  out << "repeat,backend,phase,coalition,size,seconds\n";
  const char* backend = BackendName(report.config.backend);
  for (const RepeatResult& r : report.repeats)
    for (const CoalitionTiming& t : r.tables.timings)
      out << r.repeat << ',' << backend << ',' << TimingPhaseName(t.phase) << ',' << t.coalition
          << ',' << CoalitionSize(t.coalition) << ',' << Format("%.9f", t.seconds) << '\n';
  return out.str();
}

std::string TimingsSummaryCsv(const RunReport& report) {
  std::ostringstream out;
  out << "repeat,phase,coalitions,total_seconds,mean_ms\n";
  for (const RepeatResult& r : report.repeats) {
    std::map<TimingPhase, std::pair<int, double>> acc;
    for (const CoalitionTiming& t : r.tables.timings) {
      acc[t.phase].first += 1;
      acc[t.phase].second += t.seconds;
    }
    for (const auto& [phase, v] : acc)
      out << r.repeat << ',' << TimingPhaseName(phase) << ',' << v.first << ','
          << Format("%.9f", v.second) << ',' << Format("%.6f", 1000.0 * v.second / v.first)
          << '\n';
  }
  return out.str();
}

json ManifestJson(const ClientManifest& m) {
  return {{"client_id", m.client_id},       {"source", m.source},
          {"train_a", m.train_a},           {"train_b", m.train_b},
          {"validation_a", m.validation_a}, {"validation_b", m.validation_b},
          {"flip_ratio", m.flip_ratio},     {"flipped_entries", m.flipped_entries}};
}

std::string RepeatName(int repeat, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "repeat_%03d%s", repeat, ext);
  return buf;
}

}  // namespace

json SummaryJson(const RunReport& report) {
  json repeats = json::array();
  for (const RepeatResult& r : report.repeats) {
    json allocations = json::array();
    for (const RewardAllocation& a : r.allocations) allocations.push_back(a.ToJson());
    json manifest = json::array();
    for (const ClientManifest& m : r.manifest) manifest.push_back(ManifestJson(m));
    repeats.push_back({{"repeat", r.repeat},
                       {"seed", r.seed},
                       {"total_auroc", r.total_auroc},
                       {"bias", r.bias},
                       {"global_auroc", r.global_auroc},
                       {"global_bias", r.global_bias},
                       {"rounds_run", r.rounds_run},
                       {"best_round", r.best_round},
                       {"coalitions", r.tables.performance.NumCoalitions()},
                       {"phi_performance", r.performance.ToJson()},
                       {"phi_bias", r.bias_sv.ToJson()},
                       {"allocations", allocations},
                       {"combined", {{"total", r.combined.total}, {"distributed", r.combined.distributed}}},
                       {"manifest", manifest}});
  }
  json failures = json::array();
  for (const RepeatFailure& f : report.failures)
    failures.push_back(
        {{"repeat", f.repeat}, {"seed", f.seed}, {"kind", f.kind}, {"message", f.message}});
  return {{"schema_version", kSummarySchemaVersion},
          {"config", ConfigToJson(report.config)},
          {"client_ids", report.ClientIds()},
          {"repeats", repeats},
          {"failures", failures},
          {"aggregate", Aggregate(report)}};
}

void EmitReports(const RunReport& report, const std::string& dir) {
  if (report.repeats.empty()) throw ExperimentError("report has no completed repeats");
  const json summary = SummaryJson(report);
  const json agg = summary["aggregate"];
  std::ostringstream allocations;
  allocations << "repeat,client_id,phi,reward,profit,pool_id\n";
  const std::vector<int> ids = report.ClientIds();
  for (const RepeatResult& r : report.repeats) {
    std::ostringstream body;
    WriteAllocationsCsv(body, r.allocations, ids);
    std::istringstream lines(body.str());
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) allocations << r.repeat << ',' << line << '\n';
  }

  // Everything is rendered before the first file is touched.
  const std::vector<std::pair<std::string, std::string>> files = {
      {"summary.json", summary.dump(2) + "\n"},
      {"sv_table.csv", SvTable(report, false)},
      {"bias_sv.csv", SvTable(report, true)},
      {"rewards.csv", RewardsTable(report, agg)},
      {"allocations.csv", allocations.str()},
      {"flip.csv", FlipCsv(RunFlipRows(report))},
      {"timings.csv", TimingsCsv(report)},
      {"timings_summary.csv", TimingsSummaryCsv(report)},
  };
  const fs::path root(dir);
  MakeDir(root);
  MakeDir(root / "tables");
  MakeDir(root / "traces");
  for (const auto& [name, content] : files) WriteFile(root / name, content);
  for (const RepeatResult& r : report.repeats) {
    const json tables = {{"performance", r.tables.performance.ToJson()},
                         {"bias", r.tables.bias.ToJson()}};
    WriteFile(root / "tables" / RepeatName(r.repeat, ".json"), tables.dump(2) + "\n");
    SaveTrace(r.trace, (root / "traces" / RepeatName(r.repeat, ".trace")).string());
  }
}

void EmitFlipStudy(const FlipStudyReport& report, const std::string& dir) {
  if (report.runs.empty()) throw ExperimentError("flip study has no runs");
  json comparisons = json::array();
  for (const FlipComparison& c : report.comparisons)
    comparisons.push_back({{"ratio", c.ratio},
                           {"flipped_mean", c.flipped_mean},
                           {"unflipped_mean", c.unflipped_mean},
                           {"p_value", c.p_value}});
  const json summary = {{"schema_version", kSummarySchemaVersion},
                        {"config", ConfigToJson(report.runs.front().config)},
                        {"ratios", report.ratios},
                        {"comparisons", comparisons},
                        {"flipped_lower_at_max", report.flipped_lower_at_max},
                        {"unflipped_higher_at_max", report.unflipped_higher_at_max}};
  const fs::path root(dir);
  MakeDir(root);
  WriteFile(root / "flip_study.json", summary.dump(2) + "\n");
  WriteFile(root / "flip.csv", FlipCsv(report.rows));
  for (std::size_t k = 0; k < report.runs.size(); ++k)
    EmitReports(report.runs[k], (root / ("ratio_" + Format("%.4f", report.ratios[k]))).string());
}

ReportCheck VerifySummary(const json& summary) {
  ReportCheck check;
  if (!summary.is_object() || !summary.contains("schema_version"))
    throw ConfigError("not a summary document");
  if (summary["schema_version"] != kSummarySchemaVersion)
    throw ConfigError("unsupported summary schema version");
  const ExperimentConfig cfg = ParseConfig(summary.at("config"));
  for (const json& r : summary.at("repeats")) {
    ++check.repeats;
    const int repeat = r.at("repeat").get<int>();
    const ShapleyVector perf = ShapleyVector::FromJson(r.at("phi_performance"));
    const ShapleyVector bias = ShapleyVector::FromJson(r.at("phi_bias"));
    double sum_perf = 0.0, sum_bias = 0.0;
    for (double v : perf.phi) sum_perf += v;
    for (double v : bias.phi) sum_bias += v;
    check.max_table_identity_error = std::max(
        check.max_table_identity_error, std::fabs(sum_perf + 0.5 - r.at("total_auroc").get<double>()));
    check.max_bias_identity_error =
        std::max(check.max_bias_identity_error, std::fabs(sum_bias - r.at("bias").get<double>()));

    const std::vector<RewardAllocation> allocs = internal::AllocatePools(cfg.pools, perf, bias);
    const json& stored = r.at("allocations");
    if (stored.size() != allocs.size()) {
      check.rewards_match = false;
      check.problems.push_back("repeat " + std::to_string(repeat) + ": pool count differs");
      continue;
    }
    for (std::size_t p = 0; p < allocs.size(); ++p) {
      const std::vector<double> reward = stored[p].at("reward").get<std::vector<double>>();
      if (reward != allocs[p].reward ||
          stored[p].at("distributed").get<double>() != allocs[p].distributed) {
        check.rewards_match = false;
        check.problems.push_back("repeat " + std::to_string(repeat) + ": pool " +
                                 allocs[p].pool_id + " does not recompute");
      }
    }
  }
  if (check.max_table_identity_error > 1e-9)
    check.problems.push_back("performance Shapley values do not sum to total AUROC - 0.5");
  if (check.max_bias_identity_error > 1e-9)
    check.problems.push_back("bias Shapley values do not sum to the bias");
  return check;
}

}  // namespace fedshap
