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

#ifndef FEDSHAP_SEED_H_
#define FEDSHAP_SEED_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedshap {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based seed expansion: the same (master, path) always yields the
// same child seed, and distinct paths yield unrelated streams.
inline std::uint64_t DeriveSeed(std::uint64_t master,
                                std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = MixSeed(master);
  for (std::uint64_t p : path) s = MixSeed(s ^ MixSeed(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stage tags used with DeriveSeed by the experiment runner.
enum class SeedStage : std::uint64_t {
  kTask = 1,
  kPool = 2,
  kTest = 3,
  kSplit = 4,
  kFlip = 5,
  kInit = 6,
  kTrain = 7,
  kHead = 8,
};

inline std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t repeat,
                                SeedStage stage, std::uint64_t index = 0) {
  return DeriveSeed(master, {repeat, static_cast<std::uint64_t>(stage), index});
}

}  // namespace fedshap

#endif  // FEDSHAP_SEED_H_
