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

// Seeded synthetic multi-label data with a binary subgroup attribute, the
// four client split regimes, and training-label corruption.
//
// Each sample draws its subgroup g from Bernoulli(share_a), features from
// N(mean_g, scale_g^2 I) and every label l from
// Bernoulli(sigmoid(w_{g,l} . x + b_{g,l} + noise_g * eps)), eps ~ N(0, 1).
// Subgroup B's label map is subgroup A's plus `disparity` times a fixed
// random direction, so disparity 0 makes the subgroups exchangeable.

#ifndef FEDSHAP_SYNTHDATA_H_
#define FEDSHAP_SYNTHDATA_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fedshap {

enum class Subgroup : std::uint8_t { kA = 0, kB = 1 };

inline Subgroup Other(Subgroup g) {
  return g == Subgroup::kA ? Subgroup::kB : Subgroup::kA;
}
inline const char* SubgroupName(Subgroup g) {
  return g == Subgroup::kA ? "A" : "B";
}

struct Sample {
  std::vector<double> features;
  std::vector<std::uint8_t> labels;
  Subgroup subgroup = Subgroup::kA;

  bool operator==(const Sample&) const = default;
};

struct SubgroupParams {
  std::vector<double> feature_mean;  // length d
  double feature_scale = 1.0;
  std::vector<double> weights;        // L x d, row-major
  std::vector<double> bias;           // length L
  double label_noise = 0.0;           // std of Gaussian noise on the logit
};

struct GeneratorSpec {
  int num_features = 20;
  int num_labels = 8;
  double share_a = 0.5;
  SubgroupParams a;
  SubgroupParams b;
  std::uint64_t seed = 0;
};

// Compact description of a data source, expanded into a GeneratorSpec by
// MakeGeneratorSpec. Sources built from the same `task_seed` share the
// subgroup-A label map up to `source_shift`.
struct SourceParams {
  std::string name = "source";
  int num_features = 20;
  int num_labels = 8;
  double share_a = 0.5;
  double disparity = 0.0;      // distance of B's label map from A's
  double signal = 2.0;         // std of the noiseless logit
  double base_rate = 0.3;      // label prevalence at x = mean
  double label_noise = 0.5;
  double noise_b_extra = 0.0;  // additional logit noise for subgroup B
  double feature_shift = 0.0;  // offset of B's feature mean
  double source_shift = 0.0;   // per-source perturbation of the label map
  std::uint64_t task_seed = 1;
  std::uint64_t source_seed = 1;
};

GeneratorSpec MakeGeneratorSpec(const SourceParams& params,
                                std::uint64_t sample_seed);

// Throws ConfigError on bad dimensions, negative noise/scale, or a share
// outside [0, 1].
void ValidateGeneratorSpec(const GeneratorSpec& spec);

std::vector<Sample> Generate(const GeneratorSpec& spec, std::size_t n);

enum class SplitRegime { kAsIs, kEven5050, kSkew7525, kPure1000 };

const char* SplitRegimeName(SplitRegime regime);
std::optional<SplitRegime> ParseSplitRegime(const std::string& name);

struct SplitPlan {
  SplitRegime regime = SplitRegime::kAsIs;
  int num_clients = 2;  // even; clients (2k, 2k+1) form a mirrored pair
  int per_client_size = 1000;
  double train_fraction = 0.8;
  // Subgroup-A share used by kAsIs. When unset, the pool's empirical share.
  std::optional<double> as_is_share_a;
};

struct ClientDataset {
  int client_id = 0;
  std::vector<Sample> train;
  std::vector<Sample> validation;

  bool operator==(const ClientDataset&) const = default;
};

// Number of subgroup-A samples assigned to client `index` of `plan`.
int SubgroupACount(const SplitPlan& plan, int index, double pool_share_a);

// Partitions `samples` into plan.num_clients equally sized clients. Each
// client is stratified by subgroup across train and validation. Throws
// SplitError naming the deficit if the pool lacks samples of a subgroup.
std::vector<ClientDataset> Split(std::span<const Sample> samples,
                                 const SplitPlan& plan, std::uint64_t seed);

// Flattened (sample * L + label) training positions flipped by FlipLabels.
std::vector<std::size_t> FlipPositions(std::size_t num_train, int num_labels,
                                       double ratio, std::uint64_t seed);

// Inverts exactly round(ratio * |train| * L) training label entries chosen
// uniformly without replacement. Validation is left untouched.
ClientDataset FlipLabels(const ClientDataset& ds, double ratio,
                         std::uint64_t seed);

double SubgroupShare(std::span<const Sample> samples, Subgroup g);

// One row per sample: f0..f{d-1}, y0..y{L-1}, subgroup.
void WriteSamplesCsv(std::ostream& out, std::span<const Sample> samples);

}  // namespace fedshap

#endif  // FEDSHAP_SYNTHDATA_H_
