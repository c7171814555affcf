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

// fedshap command-line tool.
//
//   fedshap run <config>             run an experiment and write its reports
//   fedshap flip-study <config>      label-flip comparison across ratios
//   fedshap report <run-dir>         verify and summarize a finished run
//   fedshap validate-config <config>
//
// Errors go to stderr as a single JSON object:
//   {"error": {"kind": "...", "message": "..."}}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "fedshap/error.h"
#include "fedshap/experiments.h"

namespace {

using nlohmann::json;

enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kConfigInvalid = 2,
  kIoFailure = 3,
  kExperimentFailed = 4,
  kVerificationFailed = 5,
  kUsage = 64,
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::optional<std::string> backend;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

void PrintError(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
}

int ExitCodeFor(const std::string& kind) {
  if (kind == "config") return kConfigInvalid;
  if (kind == "io") return kIoFailure;
  if (kind == "experiment") return kExperimentFailed;
  return kFailure;
}

void AddOverrideFlags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--repeats", o.repeats, "Number of repeats")->check(CLI::PositiveNumber);
  cmd->add_option("--backend", o.backend, "Valuation back-end")
      ->check(CLI::IsMember({"exact", "gradient_accum", "ensemble"}));
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

fedshap::ExperimentConfig Load(const std::string& path, const Overrides& o) {
  fedshap::ExperimentConfig cfg = fedshap::LoadConfig(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.repeats) cfg.repeats = *o.repeats;
  if (o.backend) cfg.backend = *fedshap::ParseBackend(*o.backend);
  if (o.out) cfg.output_dir = *o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  fedshap::ValidateConfig(cfg);
  return cfg;
}

std::string OutputDir(const fedshap::ExperimentConfig& cfg, const Overrides& o) {
  return o.out ? *o.out : fedshap::DefaultOutputDir(cfg);
}

int Run(const std::string& path, const Overrides& o) {
  const fedshap::ExperimentConfig cfg = Load(path, o);
  const fedshap::RunReport report = fedshap::RunExperiment(cfg);
  const std::string dir = OutputDir(cfg, o);
  fedshap::EmitReports(report, dir);
  const json agg = fedshap::Aggregate(report);
  std::cout << json{{"output_dir", dir},
                    {"repeats_ok", report.repeats.size()},
                    {"repeats_failed", report.failures.size()},
                    {"total_auroc", agg["total_auroc"]},
                    {"bias", agg["bias"]}}
                   .dump(2)
            << std::endl;
  return kOk;
}

int FlipStudy(const std::string& path, const Overrides& o) {
  fedshap::ExperimentConfig cfg = Load(path, o);
  if (o.repeats) cfg.flip.study_repeats = *o.repeats;
  fedshap::ValidateConfig(cfg);
  const fedshap::FlipStudyReport report = fedshap::LabelFlipStudy(cfg);
  const std::string dir = OutputDir(cfg, o);
  fedshap::EmitFlipStudy(report, dir);
  json comparisons = json::array();
  for (const auto& c : report.comparisons)
    comparisons.push_back({{"ratio", c.ratio},
                           {"flipped_mean", c.flipped_mean},
                           {"unflipped_mean", c.unflipped_mean},
                           {"p_value", c.p_value}});
  std::cout << json{{"output_dir", dir},
                    {"comparisons", comparisons},
                    {"flipped_lower_at_max", report.flipped_lower_at_max},
                    {"unflipped_higher_at_max", report.unflipped_higher_at_max}}
                   .dump(2)
            << std::endl;
  return kOk;
}

int Report(const std::string& dir) {
  const std::string path = dir + "/summary.json";
  std::ifstream in(path);
  if (!in) throw fedshap::IoError("cannot open " + path);
  json summary;
  try {
    summary = json::parse(in);
  } catch (const json::parse_error& e) {
    throw fedshap::IoError(path + ": " + e.what());
  }
  const fedshap::ReportCheck check = fedshap::VerifySummary(summary);
  std::cout << json{{"run_dir", dir},
                    {"repeats", check.repeats},
                    {"max_table_identity_error", check.max_table_identity_error},
                    {"max_bias_identity_error", check.max_bias_identity_error},
                    {"rewards_match", check.rewards_match},
                    {"problems", check.problems},
                    {"aggregate", summary.value("aggregate", json::object())}}
                   .dump(2)
            << std::endl;
  if (!check.problems.empty()) {
    PrintError("verification", check.problems.front());
    return kVerificationFailed;
  }
  return kOk;
}

int ValidateOnly(const std::string& path) {
  const fedshap::ExperimentConfig cfg = fedshap::LoadConfig(path);
  std::cout << json{{"valid", true}, {"config", fedshap::ConfigToJson(cfg)}}.dump(2) << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shapley-value valuation and rewards for simulated federated learning", "fedshap"};
  app.require_subcommand(1);

  std::string config_path, run_dir;
  Overrides run_flags, flip_flags;

  CLI::App* run = app.add_subcommand("run", "Run an experiment and write its reports");
  run->add_option("config", config_path, "Config file")->required();
  AddOverrideFlags(run, run_flags);

  CLI::App* flip = app.add_subcommand("flip-study", "Compare rewards of flipped and unflipped clients");
  flip->add_option("config", config_path, "Config file")->required();
  AddOverrideFlags(flip, flip_flags);

  CLI::App* report = app.add_subcommand("report", "Verify and summarize a run directory");
  report->add_option("run_dir", run_dir, "Run directory")->required();

  CLI::App* validate = app.add_subcommand("validate-config", "Check a config file");
  validate->add_option("config", config_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("usage", e.what());
    return kUsage;
  }

  try {
    if (*run) return Run(config_path, run_flags);
    if (*flip) return FlipStudy(config_path, flip_flags);
    if (*report) return Report(run_dir);
    if (*validate) return ValidateOnly(config_path);
  } catch (const fedshap::Error& e) {
    PrintError(e.kind(), e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    PrintError("internal", e.what());
    return kFailure;
  }
  return kUsage;
}
