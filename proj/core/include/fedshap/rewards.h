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

// Monetary reward allocation from Shapley vectors.
//
// Performance pools distribute P_dist = P * U(D) / 0.5 in proportion to the
// clients' performance values (R_i = phi_i / 0.5 * P), or the full pool with
// R_i = phi_i / U(D) * P. Bias pools distribute P_dist = P * (1 - |U(D)|) in
// proportion to each client's distance from the client pushing hardest in
// the direction of the overall bias. Member-funded pools also report the
// profit R_i - P_dist / N.

#ifndef FEDSHAP_REWARDS_H_
#define FEDSHAP_REWARDS_H_

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedshap/shapley.h"
#include "nlohmann/json_fwd.hpp"

namespace fedshap {

enum class PoolSource { kExternal, kMemberDeposits };
enum class PoolObjective { kPerformance, kSexBiasLike, kAgeBiasLike };

const char* PoolSourceName(PoolSource s);
const char* PoolObjectiveName(PoolObjective o);
std::optional<PoolSource> ParsePoolSource(const std::string& name);
std::optional<PoolObjective> ParsePoolObjective(const std::string& name);

struct RewardPool {
  std::string id = "pool";
  double amount = 60.0;
  PoolSource source = PoolSource::kExternal;
  PoolObjective objective = PoolObjective::kPerformance;

  double Deposit(std::size_t num_clients) const;
};

// What happens to negative performance values.
enum class NegativePolicy {
  kClampRenormalize,  // zero them and spread P_dist over positive values
  kRaw,               // R_i = phi_i / 0.5 * P, possibly negative
};

struct RewardAllocation {
  std::string pool_id;
  PoolObjective objective = PoolObjective::kPerformance;
  PoolSource source = PoolSource::kExternal;
  std::vector<double> phi;
  std::vector<double> reward;
  double pool = 0.0;
  double distributed = 0.0;  // P_dist
  double residual = 0.0;     // P - P_dist
  bool full_pool = false;
  bool clamped = false;      // negative values were zeroed
  bool equal_split = false;  // bias degenerate rule applied
  int reference_client = -1; // bias argmax client, -1 if unused

  std::size_t size() const { return reward.size(); }
  nlohmann::json ToJson() const;
};

RewardAllocation PerfRewards(const ShapleyVector& sv, const RewardPool& pool,
                             NegativePolicy policy = NegativePolicy::kClampRenormalize);

// Distributes the entire pool: R_i = phi_i / U(D) * P.
RewardAllocation PerfRewardsFullPool(const ShapleyVector& sv, const RewardPool& pool);

inline constexpr double kDefaultBiasTolerance = 1e-6;

RewardAllocation BiasRewards(const ShapleyVector& sv, const RewardPool& pool,
                             double tol = kDefaultBiasTolerance);

// G_i = R_i - P_dist / N. Throws DomainError for externally funded pools.
std::vector<double> Profit(const RewardAllocation& alloc);

struct CombinedAllocation {
  std::vector<double> total;
  double distributed = 0.0;
};

CombinedAllocation CombinedRewards(std::span<const RewardAllocation> allocations);

// client_id, phi, reward, profit, pool_id. Profit is empty for external pools.
void WriteAllocationsCsv(std::ostream& out, std::span<const RewardAllocation> allocations,
                         std::span<const int> client_ids = {});

}  // namespace fedshap

#endif  // FEDSHAP_REWARDS_H_
