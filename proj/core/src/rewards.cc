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

#include "fedshap/rewards.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "fedshap/error.h"

namespace fedshap {
namespace {

void CheckPool(const RewardPool& pool) {
  if (!(pool.amount > 0.0) || !std::isfinite(pool.amount))
    throw DomainError("reward pool " + pool.id + " must be finite and positive");
}

RewardAllocation Begin(const ShapleyVector& sv, const RewardPool& pool) {
  CheckPool(pool);
  if (sv.phi.empty()) throw DomainError("empty Shapley vector");
  for (double v : sv.phi)
    if (!std::isfinite(v)) throw DomainError("non-finite Shapley value");
  RewardAllocation a;
  a.pool_id = pool.id;
  a.objective = pool.objective;
  a.source = pool.source;
  a.phi = sv.phi;
  a.pool = pool.amount;
  a.reward.assign(sv.phi.size(), 0.0);
  return a;
}

}  // namespace

const char* PoolSourceName(PoolSource s) {
  return s == PoolSource::kExternal ? "external" : "member_deposits";
}

const char* PoolObjectiveName(PoolObjective o) {
  switch (o) {
    case PoolObjective::kPerformance: return "performance";
    case PoolObjective::kSexBiasLike: return "sex_bias_like";
    case PoolObjective::kAgeBiasLike: return "age_bias_like";
  }
  return "?";
}

std::optional<PoolSource> ParsePoolSource(const std::string& name) {
  if (name == "external") return PoolSource::kExternal;
  if (name == "member_deposits") return PoolSource::kMemberDeposits;
  return std::nullopt;
}

std::optional<PoolObjective> ParsePoolObjective(const std::string& name) {
  if (name == "performance") return PoolObjective::kPerformance;
  if (name == "sex_bias_like") return PoolObjective::kSexBiasLike;
  if (name == "age_bias_like") return PoolObjective::kAgeBiasLike;
  return std::nullopt;
}

double RewardPool::Deposit(std::size_t num_clients) const {
  if (source != PoolSource::kMemberDeposits || num_clients == 0) return 0.0;
  return amount / static_cast<double>(num_clients);
}

nlohmann::json RewardAllocation::ToJson() const {
  nlohmann::json j = {{"pool_id", pool_id},
                      {"objective", PoolObjectiveName(objective)},
                      {"source", PoolSourceName(source)},
                      {"phi", phi},
                      {"reward", reward},
                      {"pool", pool},
                      {"distributed", distributed},
                      {"residual", residual},
                      {"full_pool", full_pool},
                      {"clamped", clamped},
                      {"equal_split", equal_split},
                      {"reference_client", reference_client}};
  if (source == PoolSource::kMemberDeposits) j["profit"] = Profit(*this);
  return j;
}

RewardAllocation PerfRewards(const ShapleyVector& sv, const RewardPool& pool,
                             NegativePolicy policy) {
  if (sv.kind != UtilityKind::kPerformance)
    throw DomainError("performance rewards need a performance Shapley vector");
  RewardAllocation a = Begin(sv, pool);
  const double u = sv.grand_utility;
  if (u > 0.5)
    throw DomainError("grand utility " + std::to_string(u) + " exceeds the AUROC-gain maximum 0.5");
  if (u < 0.0)
    throw DomainError("grand utility " + std::to_string(u) +
                      " is below a random classifier; nothing to distribute");
  a.distributed = pool.amount * u / 0.5;
  a.residual = pool.amount - a.distributed;

  const bool any_negative = std::any_of(sv.phi.begin(), sv.phi.end(), [](double v) { return v < 0; });
  const bool any_positive = std::any_of(sv.phi.begin(), sv.phi.end(), [](double v) { return v > 0; });
  if (!any_positive) {
    if (any_negative) throw AllocationError("no client has a positive Shapley value");
    return a;  // worthless model: nothing distributed
  }
  if (policy == NegativePolicy::kRaw || !any_negative) {
    for (std::size_t i = 0; i < sv.phi.size(); ++i) a.reward[i] = sv.phi[i] / 0.5 * pool.amount;
    return a;
  }
  double positive_sum = 0.0;
  for (double v : sv.phi) positive_sum += std::max(v, 0.0);
  for (std::size_t i = 0; i < sv.phi.size(); ++i)
    a.reward[i] = std::max(sv.phi[i], 0.0) / positive_sum * a.distributed;
  a.clamped = true;
  return a;
}

RewardAllocation PerfRewardsFullPool(const ShapleyVector& sv, const RewardPool& pool) {
  if (sv.kind != UtilityKind::kPerformance)
    throw DomainError("performance rewards need a performance Shapley vector");
  RewardAllocation a = Begin(sv, pool);
  const double u = sv.grand_utility;
  if (u == 0.0) throw AllocationError("full-pool rewards undefined for zero grand utility");
  a.full_pool = true;
  a.distributed = pool.amount;
  a.residual = 0.0;
  for (std::size_t i = 0; i < sv.phi.size(); ++i) a.reward[i] = sv.phi[i] / u * pool.amount;
  return a;
}

RewardAllocation BiasRewards(const ShapleyVector& sv, const RewardPool& pool, double tol) {
  if (sv.kind != UtilityKind::kBias) throw DomainError("bias rewards need a bias Shapley vector");
  if (!(tol >= 0.0)) throw DomainError("tolerance must be >= 0");
  RewardAllocation a = Begin(sv, pool);
  const double u = sv.grand_utility;
  if (std::fabs(u) > 1.0)
    throw DomainError("bias " + std::to_string(u) + " outside [-1, 1]");
  a.distributed = pool.amount * (1.0 - std::fabs(u));
  a.residual = pool.amount - a.distributed;

  const auto [lo, hi] = std::minmax_element(sv.phi.begin(), sv.phi.end());
  const std::size_t n = sv.phi.size();
  if (std::fabs(u) <= tol || *hi - *lo <= tol) {
    a.equal_split = true;
    for (double& r : a.reward) r = a.distributed / static_cast<double>(n);
    return a;
  }
  const double sign = u > 0.0 ? 1.0 : -1.0;
  std::size_t w = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (sign * sv.phi[i] > sign * sv.phi[w]) w = i;
  a.reference_client = static_cast<int>(w);

  std::vector<double> delta(n);
  double delta_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    delta[i] = sv.phi[w] - sv.phi[i];
    delta_sum += delta[i];
  }
  for (std::size_t i = 0; i < n; ++i) a.reward[i] = delta[i] / delta_sum * a.distributed;
  return a;
}

std::vector<double> Profit(const RewardAllocation& alloc) {
  if (alloc.source != PoolSource::kMemberDeposits)
    throw DomainError("profit is defined only for member-funded pools");
  const double share = alloc.distributed / static_cast<double>(alloc.reward.size());
  std::vector<double> g(alloc.reward.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = alloc.reward[i] - share;
  return g;
}

CombinedAllocation CombinedRewards(std::span<const RewardAllocation> allocations) {
  if (allocations.empty()) throw DomainError("combined rewards need at least one allocation");
  CombinedAllocation c;
  const std::size_t n = allocations.front().reward.size();
  c.total.assign(n, 0.0);
  for (const RewardAllocation& a : allocations) {
    if (a.reward.size() != n)
      throw DomainError("allocation " + a.pool_id + " covers " + std::to_string(a.reward.size()) +
                        " clients, expected " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) c.total[i] += a.reward[i];
    c.distributed += a.distributed;
  }
  return c;
}

void WriteAllocationsCsv(std::ostream& out, std::span<const RewardAllocation> allocations,
                         std::span<const int> client_ids) {
  out << "client_id,phi,reward,profit,pool_id\n";
  char buf[128];
  for (const RewardAllocation& a : allocations) {
    std::vector<double> profit;
    if (a.source == PoolSource::kMemberDeposits) profit = Profit(a);
    for (std::size_t i = 0; i < a.reward.size(); ++i) {
      const int id = i < client_ids.size() ? client_ids[i] : static_cast<int>(i);
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,", id, a.phi[i], a.reward[i]);
      out << buf;
      if (!profit.empty()) {
        std::snprintf(buf, sizeof(buf), "%.17g", profit[i]);
        out << buf;
      }
      out << ',' << a.pool_id << '\n';
    }
  }
}

}  // namespace fedshap
