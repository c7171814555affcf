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

#ifndef FEDSHAP_SRC_INTERNAL_H_
#define FEDSHAP_SRC_INTERNAL_H_

#include <span>
#include <vector>

#include "fedshap/experiments.h"

namespace fedshap::internal {

// One allocation per configured pool, in config order.
std::vector<RewardAllocation> AllocatePools(std::span<const PoolConfig> pools,
                                            const ShapleyVector& performance,
                                            const ShapleyVector& bias);

}  // namespace fedshap::internal

#endif  // FEDSHAP_SRC_INTERNAL_H_
