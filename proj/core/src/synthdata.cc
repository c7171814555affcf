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

#include "fedshap/synthdata.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fedshap/error.h"
#include "fedshap/seed.h"

namespace fedshap {
namespace {

double Logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<double> GaussianVector(Rng& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void ValidateSubgroup(const SubgroupParams& p, int d, int l, const char* name) {
  auto fail = [&](const std::string& what) {
    throw ConfigError(std::string("subgroup ") + name + ": " + what);
  };
  if (p.feature_mean.size() != static_cast<std::size_t>(d))
    fail("feature_mean must have length num_features");
  if (p.weights.size() != static_cast<std::size_t>(d) * l)
    fail("weights must be num_labels x num_features");
  if (p.bias.size() != static_cast<std::size_t>(l))
    fail("bias must have length num_labels");
  if (!(p.feature_scale >= 0.0) || !std::isfinite(p.feature_scale))
    fail("feature_scale must be finite and non-negative");
  if (!(p.label_noise >= 0.0) || !std::isfinite(p.label_noise))
    fail("label_noise must be finite and non-negative");
}

Sample DrawSample(const GeneratorSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  s.subgroup = unit(rng) < spec.share_a ? Subgroup::kA : Subgroup::kB;
  const SubgroupParams& p = s.subgroup == Subgroup::kA ? spec.a : spec.b;
  const int d = spec.num_features;
  s.features.resize(d);
  for (int j = 0; j < d; ++j)
    s.features[j] = p.feature_mean[j] + p.feature_scale * normal(rng);
  s.labels.resize(spec.num_labels);
  for (int l = 0; l < spec.num_labels; ++l) {
    std::span<const double> w(p.weights.data() + static_cast<std::size_t>(l) * d, d);
    const double logit = Dot(w, s.features) + p.bias[l] + p.label_noise * normal(rng);
    const double prob = 1.0 / (1.0 + std::exp(-logit));
    s.labels[l] = unit(rng) < prob ? 1 : 0;
  }
  return s;
}

}  // namespace

GeneratorSpec MakeGeneratorSpec(const SourceParams& sp, std::uint64_t sample_seed) {
  if (sp.num_features <= 0 || sp.num_labels <= 0)
    throw ConfigError("num_features and num_labels must be positive");
  if (sp.disparity < 0.0) throw ConfigError("disparity must be >= 0");
  if (sp.signal < 0.0) throw ConfigError("signal must be >= 0");
  if (!(sp.base_rate > 0.0 && sp.base_rate < 1.0))
    throw ConfigError("base_rate must lie in (0, 1)");
  if (sp.share_a < 0.0 || sp.share_a > 1.0)
    throw ConfigError("share_a must lie in [0, 1]");

  const int d = sp.num_features;
  const int l = sp.num_labels;
  const double wstd = sp.signal / std::sqrt(static_cast<double>(d));

  Rng task(DeriveSeed(sp.task_seed, {0x7461736bULL}));
  std::vector<double> wa = GaussianVector(task, static_cast<std::size_t>(l) * d, wstd);
  const std::vector<double> direction =
      GaussianVector(task, static_cast<std::size_t>(l) * d, wstd);
  std::vector<double> shift_dir = GaussianVector(task, d, 1.0);
  const double shift_norm = std::sqrt(Dot(shift_dir, shift_dir));
  for (double& x : shift_dir) x /= shift_norm;

  Rng source(DeriveSeed(sp.source_seed, {0x73726345ULL}));
  const std::vector<double> perturb =
      GaussianVector(source, static_cast<std::size_t>(l) * d, wstd);
  for (std::size_t i = 0; i < wa.size(); ++i) wa[i] += sp.source_shift * perturb[i];

  // B's rows are A's rows rotated toward `direction`, rescaled to A's norm.
  std::vector<double> wb(wa.size());
  for (int row = 0; row < l; ++row) {
    const std::size_t off = static_cast<std::size_t>(row) * d;
    double norm_a = 0.0, norm_b = 0.0;
    for (int j = 0; j < d; ++j) {
      wb[off + j] = wa[off + j] + sp.disparity * direction[off + j];
      norm_a += wa[off + j] * wa[off + j];
      norm_b += wb[off + j] * wb[off + j];
    }
    const double scale = norm_b > 0.0 ? std::sqrt(norm_a / norm_b) : 1.0;
    for (int j = 0; j < d; ++j) wb[off + j] *= scale;
  }

  GeneratorSpec spec;
  spec.num_features = d;
  spec.num_labels = l;
  spec.share_a = sp.share_a;
  spec.seed = sample_seed;

  spec.a.feature_mean.assign(d, 0.0);
  spec.b.feature_mean.resize(d);
  for (int j = 0; j < d; ++j) spec.b.feature_mean[j] = sp.feature_shift * shift_dir[j];
  spec.a.feature_scale = spec.b.feature_scale = 1.0;
  spec.a.label_noise = sp.label_noise;
  spec.b.label_noise = sp.label_noise + sp.noise_b_extra;
  spec.a.weights = std::move(wa);
  spec.b.weights = std::move(wb);

  const double b0 = Logit(sp.base_rate);
  spec.a.bias.resize(l);
  spec.b.bias.resize(l);
  for (int row = 0; row < l; ++row) {
    std::span<const double> w_a(spec.a.weights.data() + static_cast<std::size_t>(row) * d, d);
    std::span<const double> w_b(spec.b.weights.data() + static_cast<std::size_t>(row) * d, d);
    spec.a.bias[row] = b0 - Dot(w_a, spec.a.feature_mean);
    spec.b.bias[row] = b0 - Dot(w_b, spec.b.feature_mean);
  }
  ValidateGeneratorSpec(spec);
  return spec;
}

void ValidateGeneratorSpec(const GeneratorSpec& spec) {
  if (spec.num_features <= 0) throw ConfigError("num_features must be positive");
  if (spec.num_labels <= 0) throw ConfigError("num_labels must be positive");
  if (!(spec.share_a >= 0.0 && spec.share_a <= 1.0))
    throw ConfigError("share_a must lie in [0, 1]");
  ValidateSubgroup(spec.a, spec.num_features, spec.num_labels, "A");
  ValidateSubgroup(spec.b, spec.num_features, spec.num_labels, "B");
}

std::vector<Sample> Generate(const GeneratorSpec& spec, std::size_t n) {
  ValidateGeneratorSpec(spec);
  if (n < 1) throw ConfigError("Generate: n must be >= 1");
  Rng rng(spec.seed);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(DrawSample(spec, rng));
  return out;
}

const char* SplitRegimeName(SplitRegime regime) {
  switch (regime) {
    case SplitRegime::kAsIs: return "as_is";
    case SplitRegime::kEven5050: return "50/50";
    case SplitRegime::kSkew7525: return "75/25";
    case SplitRegime::kPure1000: return "100/0";
  }
  return "?";
}

std::optional<SplitRegime> ParseSplitRegime(const std::string& name) {
  if (name == "as_is" || name == "asis") return SplitRegime::kAsIs;
  if (name == "50/50" || name == "even5050") return SplitRegime::kEven5050;
  if (name == "75/25" || name == "skew7525") return SplitRegime::kSkew7525;
  if (name == "100/0" || name == "pure1000") return SplitRegime::kPure1000;
  return std::nullopt;
}

int SubgroupACount(const SplitPlan& plan, int index, double pool_share_a) {
  const int n = plan.per_client_size;
  const bool first = index % 2 == 0;
  auto share_count = [n](double share) {
    return static_cast<int>(std::lround(share * n));
  };
  switch (plan.regime) {
    case SplitRegime::kAsIs:
      return share_count(plan.as_is_share_a.value_or(pool_share_a));
    case SplitRegime::kEven5050:
      return share_count(0.5);
    case SplitRegime::kSkew7525:
      return first ? share_count(0.75) : n - share_count(0.75);
    case SplitRegime::kPure1000:
      return first ? n : 0;
  }
  return 0;
}

double SubgroupShare(std::span<const Sample> samples, Subgroup g) {
  if (samples.empty()) return 0.0;
  std::size_t count = 0;
  for (const Sample& s : samples) count += s.subgroup == g;
  return static_cast<double>(count) / static_cast<double>(samples.size());
}

std::vector<ClientDataset> Split(std::span<const Sample> samples,
                                 const SplitPlan& plan, std::uint64_t seed) {
  if (plan.num_clients <= 0 || plan.num_clients % 2 != 0)
    throw ConfigError("num_clients must be a positive even number");
  if (plan.per_client_size <= 0) throw ConfigError("per_client_size must be positive");
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  if (plan.as_is_share_a && (*plan.as_is_share_a < 0.0 || *plan.as_is_share_a > 1.0))
    throw ConfigError("as_is_share_a must lie in [0, 1]");

  const int n = plan.per_client_size;
  const int n_train = static_cast<int>(std::lround(plan.train_fraction * n));
  if (n_train < 1 || n_train >= n)
    throw ConfigError("per_client_size too small for a non-empty train and validation");

  std::vector<std::size_t> pool_a, pool_b;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (samples[i].subgroup == Subgroup::kA ? pool_a : pool_b).push_back(i);
  const double pool_share =
      samples.empty() ? 0.0 : static_cast<double>(pool_a.size()) / samples.size();

  std::vector<int> need_a(plan.num_clients);
  std::size_t total_a = 0, total_b = 0;
  for (int c = 0; c < plan.num_clients; ++c) {
    need_a[c] = std::clamp(SubgroupACount(plan, c, pool_share), 0, n);
    total_a += need_a[c];
    total_b += n - need_a[c];
  }
  if (total_a > pool_a.size() || total_b > pool_b.size()) {
    std::ostringstream msg;
    msg << "insufficient samples for split " << SplitRegimeName(plan.regime) << ":";
    if (total_a > pool_a.size())
      msg << " subgroup A needs " << total_a << ", pool has " << pool_a.size()
          << " (deficit " << total_a - pool_a.size() << ")";
    if (total_b > pool_b.size())
      msg << " subgroup B needs " << total_b << ", pool has " << pool_b.size()
          << " (deficit " << total_b - pool_b.size() << ")";
    throw SplitError(msg.str());
  }

  Rng rng(seed);
  std::shuffle(pool_a.begin(), pool_a.end(), rng);
  std::shuffle(pool_b.begin(), pool_b.end(), rng);

  std::vector<ClientDataset> clients(plan.num_clients);
  std::size_t next_a = 0, next_b = 0;
  for (int c = 0; c < plan.num_clients; ++c) {
    const int na = need_a[c];
    const int nb = n - na;
    // Stratify: train gets round(tf * na) A-samples, adjusted so that the
    // train total is exactly n_train.
    int train_a = static_cast<int>(std::lround(plan.train_fraction * na));
    train_a = std::clamp(train_a, std::max(0, n_train - nb), std::min(na, n_train));
    const int train_b = n_train - train_a;

    ClientDataset& ds = clients[c];
    ds.client_id = c;
    ds.train.reserve(n_train);
    ds.validation.reserve(n - n_train);
    for (int k = 0; k < na; ++k) {
      const Sample& s = samples[pool_a[next_a++]];
      (k < train_a ? ds.train : ds.validation).push_back(s);
    }
    for (int k = 0; k < nb; ++k) {
      const Sample& s = samples[pool_b[next_b++]];
      (k < train_b ? ds.train : ds.validation).push_back(s);
    }
    std::shuffle(ds.train.begin(), ds.train.end(), rng);
    std::shuffle(ds.validation.begin(), ds.validation.end(), rng);
  }
  return clients;
}

std::vector<std::size_t> FlipPositions(std::size_t num_train, int num_labels,
                                       double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw ConfigError("flip ratio must lie in [0, 1]");
  const std::size_t total = num_train * static_cast<std::size_t>(num_labels);
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
  std::vector<std::size_t> positions(total);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(positions[i], positions[pick(rng)]);
  }
  positions.resize(k);
  std::sort(positions.begin(), positions.end());
  return positions;
}

ClientDataset FlipLabels(const ClientDataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw ConfigError("flip ratio must lie in [0, 1]");
  ClientDataset out = ds;
  if (out.train.empty()) return out;
  const int num_labels = static_cast<int>(out.train.front().labels.size());
  for (std::size_t pos : FlipPositions(out.train.size(), num_labels, ratio, seed)) {
    std::uint8_t& y = out.train[pos / num_labels].labels[pos % num_labels];
    y = static_cast<std::uint8_t>(1 - y);
  }
  return out;
}

void WriteSamplesCsv(std::ostream& out, std::span<const Sample> samples) {
  if (samples.empty()) return;
  const std::size_t d = samples.front().features.size();
  const std::size_t l = samples.front().labels.size();
  for (std::size_t j = 0; j < d; ++j) out << 'f' << j << ',';
  for (std::size_t j = 0; j < l; ++j) out << 'y' << j << ',';
  out << "subgroup\n";
  char buf[32];
  for (const Sample& s : samples) {
    for (double x : s.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      out << buf << ',';
    }
    for (std::uint8_t y : s.labels) out << static_cast<int>(y) << ',';
    out << SubgroupName(s.subgroup) << '\n';
  }
}

}  // namespace fedshap
