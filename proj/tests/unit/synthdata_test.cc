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

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fedshap/error.h"
#include "test_util.h"

namespace fedshap {
namespace {

using testing::SmallSamples;
using testing::SmallSource;

GeneratorSpec DefaultSpec(double share_a, std::uint64_t seed, double disparity = 0.0) {
  SourceParams p;
  p.share_a = share_a;
  p.disparity = disparity;
  return MakeGeneratorSpec(p, seed);
}

int CountA(const std::vector<Sample>& v) {
  return static_cast<int>(
      std::count_if(v.begin(), v.end(), [](const Sample& s) { return s.subgroup == Subgroup::kA; }));
}

TEST(GenerateTest, SameSeedGivesIdenticalSamples) {
  const GeneratorSpec spec = DefaultSpec(0.5, 17);
  EXPECT_EQ(Generate(spec, 300), Generate(spec, 300));
  EXPECT_NE(Generate(spec, 300), Generate(DefaultSpec(0.5, 18), 300));
}

TEST(GenerateTest, ShapeAndLabelDomain) {
  const std::vector<Sample> s = Generate(DefaultSpec(0.5, 1), 200);
  ASSERT_EQ(s.size(), 200u);
  for (const Sample& x : s) {
    ASSERT_EQ(x.features.size(), 20u);
    ASSERT_EQ(x.labels.size(), 8u);
    for (double f : x.features) EXPECT_TRUE(std::isfinite(f));
    for (auto y : x.labels) EXPECT_TRUE(y == 0 || y == 1);
  }
}

TEST(GenerateTest, EmpiricalShareTracksSpec) {
  const std::vector<Sample> s = Generate(DefaultSpec(0.435, 99), 35000);
  EXPECT_NEAR(SubgroupShare(s, Subgroup::kA), 0.435, 0.02);
}

TEST(GenerateTest, ZeroDisparityGivesMatchingLabelRates) {
  const std::vector<Sample> s = Generate(DefaultSpec(0.5, 4, 0.0), 40000);
  for (int l = 0; l < 8; ++l) {
    double pos[2] = {0, 0}, cnt[2] = {0, 0};
    for (const Sample& x : s) {
      const int g = static_cast<int>(x.subgroup);
      pos[g] += x.labels[l];
      cnt[g] += 1;
    }
    const double pa = pos[0] / cnt[0], pb = pos[1] / cnt[1];
    const double se = std::sqrt(pa * (1 - pa) / cnt[0] + pb * (1 - pb) / cnt[1]);
    EXPECT_LT(std::fabs(pa - pb), 4.5 * se) << "label " << l;
  }
}

TEST(GenerateTest, DisparityChangesSubgroupLabelMap) {
  const GeneratorSpec same = DefaultSpec(0.5, 1, 0.0);
  EXPECT_EQ(same.a.weights, same.b.weights);
  const GeneratorSpec diff = DefaultSpec(0.5, 1, 0.8);
  EXPECT_NE(diff.a.weights, diff.b.weights);
}

TEST(GenerateTest, InvalidSpecsAreConfigErrors) {
  GeneratorSpec spec = DefaultSpec(0.5, 1);
  EXPECT_THROW(Generate(spec, 0), ConfigError);
  GeneratorSpec bad = spec;
  bad.num_features = 0;
  EXPECT_THROW(Generate(bad, 10), ConfigError);
  bad = spec;
  bad.num_labels = -1;
  EXPECT_THROW(Generate(bad, 10), ConfigError);
  bad = spec;
  bad.a.label_noise = -0.1;
  EXPECT_THROW(Generate(bad, 10), ConfigError);
  bad = spec;
  bad.b.weights.pop_back();
  EXPECT_THROW(Generate(bad, 10), ConfigError);
  SourceParams p;
  p.disparity = -1.0;
  EXPECT_THROW(MakeGeneratorSpec(p, 1), ConfigError);
}

TEST(SplitRegimeTest, NamesRoundTrip) {
  for (SplitRegime r : {SplitRegime::kAsIs, SplitRegime::kEven5050, SplitRegime::kSkew7525,
                        SplitRegime::kPure1000})
    EXPECT_EQ(ParseSplitRegime(SplitRegimeName(r)), r);
  EXPECT_EQ(ParseSplitRegime("75/25"), SplitRegime::kSkew7525);
  EXPECT_FALSE(ParseSplitRegime("60/40").has_value());
}

SplitPlan Plan(SplitRegime regime, int clients = 2, int size = 1000) {
  SplitPlan p;
  p.regime = regime;
  p.num_clients = clients;
  p.per_client_size = size;
  return p;
}

TEST(SplitTest, Even5050GivesHalfSubgroupA) {
  const std::vector<Sample> pool = SmallSamples(5000, 1);
  for (const ClientDataset& c : Split(pool, Plan(SplitRegime::kEven5050), 3)) {
    EXPECT_EQ(CountA(c.train) + CountA(c.validation), 500);
    EXPECT_EQ(c.train.size() + c.validation.size(), 1000u);
  }
}

TEST(SplitTest, Pure1000GivesSingleSubgroupClients) {
  const std::vector<Sample> pool = SmallSamples(5000, 2);
  const auto clients = Split(pool, Plan(SplitRegime::kPure1000), 3);
  EXPECT_EQ(CountA(clients[0].train) + CountA(clients[0].validation), 1000);
  EXPECT_EQ(CountA(clients[1].train) + CountA(clients[1].validation), 0);
}

TEST(SplitTest, Skew7525PairSharesAreMirrored) {
  const std::vector<Sample> pool = SmallSamples(6000, 3);
  const auto clients = Split(pool, Plan(SplitRegime::kSkew7525, 4, 999), 3);
  for (int k = 0; k < 4; k += 2) {
    const int a0 = CountA(clients[k].train) + CountA(clients[k].validation);
    const int a1 = CountA(clients[k + 1].train) + CountA(clients[k + 1].validation);
    EXPECT_EQ(a0, 749);
    EXPECT_EQ(a0 + a1, 999);
  }
}

TEST(SplitTest, AsIsUsesSourceShare) {
  const std::vector<Sample> pool = SmallSamples(5000, 4);
  SplitPlan plan = Plan(SplitRegime::kAsIs);
  plan.as_is_share_a = 0.435;
  for (const ClientDataset& c : Split(pool, plan, 3))
    EXPECT_EQ(CountA(c.train) + CountA(c.validation), 435);
}

TEST(SplitTest, TrainFractionAndStratification) {
  const std::vector<Sample> pool = SmallSamples(5000, 5);
  SplitPlan plan = Plan(SplitRegime::kAsIs);
  plan.as_is_share_a = 0.435;
  for (const ClientDataset& c : Split(pool, plan, 3)) {
    EXPECT_EQ(c.train.size(), 800u);
    EXPECT_EQ(c.validation.size(), 200u);
    EXPECT_EQ(CountA(c.train), 348);
  }
}

TEST(SplitTest, NoSampleAppearsTwice) {
  const std::vector<Sample> pool = SmallSamples(3000, 6);
  std::set<std::vector<double>> seen;
  std::size_t total = 0;
  for (const ClientDataset& c : Split(pool, Plan(SplitRegime::kSkew7525, 2, 500), 3))
    for (const auto* part : {&c.train, &c.validation})
      for (const Sample& s : *part) {
        seen.insert(s.features);
        ++total;
      }
  EXPECT_EQ(seen.size(), total);
}

TEST(SplitTest, DeterministicPerSeed) {
  const std::vector<Sample> pool = SmallSamples(3000, 7);
  EXPECT_EQ(Split(pool, Plan(SplitRegime::kEven5050, 2, 500), 9),
            Split(pool, Plan(SplitRegime::kEven5050, 2, 500), 9));
}

TEST(SplitTest, DeficitIsNamed) {
  const std::vector<Sample> pool = SmallSamples(1200, 8, 0.3);
  try {
    Split(pool, Plan(SplitRegime::kPure1000, 2, 1000), 1);
    FAIL() << "expected SplitError";
  } catch (const SplitError& e) {
    EXPECT_NE(std::string(e.what()).find("subgroup A needs 1000"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("deficit"), std::string::npos);
  }
}

TEST(SplitTest, RejectsOddClientCount) {
  const std::vector<Sample> pool = SmallSamples(3000, 9);
  EXPECT_THROW(Split(pool, Plan(SplitRegime::kEven5050, 3, 100), 1), ConfigError);
}

ClientDataset OneClient(std::uint64_t seed, int size = 1000, int labels = 8) {
  return Split(SmallSamples(3 * size, seed, 0.5, 4, labels), Plan(SplitRegime::kEven5050, 2, size),
               seed)[0];
}

int CountDiffs(const ClientDataset& a, const ClientDataset& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.train.size(); ++i)
    for (std::size_t l = 0; l < a.train[i].labels.size(); ++l)
      d += a.train[i].labels[l] != b.train[i].labels[l];
  return d;
}

TEST(FlipLabelsTest, ExactCountOfFlippedEntries) {
  const ClientDataset ds = OneClient(1, 1250);  // 1000 train samples
  const ClientDataset flipped = FlipLabels(ds, 0.075, 4);
  EXPECT_EQ(CountDiffs(ds, flipped), 600);
  EXPECT_EQ(flipped.validation, ds.validation);
}

TEST(FlipLabelsTest, RatioZeroIsIdentityAndOneIsComplement) {
  const ClientDataset ds = OneClient(2, 200);
  EXPECT_EQ(FlipLabels(ds, 0.0, 1), ds);
  const ClientDataset all = FlipLabels(ds, 1.0, 1);
  EXPECT_EQ(CountDiffs(ds, all), static_cast<int>(ds.train.size() * 8));
}

TEST(FlipLabelsTest, SamePositionsTwiceRestores) {
  const ClientDataset ds = OneClient(3, 400);
  EXPECT_EQ(FlipLabels(FlipLabels(ds, 0.3, 11), 0.3, 11), ds);
}

TEST(FlipLabelsTest, RatioOutsideUnitIntervalIsRejected) {
  const ClientDataset ds = OneClient(4, 100);
  EXPECT_THROW(FlipLabels(ds, -0.01, 1), ConfigError);
  EXPECT_THROW(FlipLabels(ds, 1.5, 1), ConfigError);
}

TEST(FlipLabelsTest, PositionsAreUniform) {
  // Every position among 40 is hit equally often in expectation.
  std::vector<int> hits(40, 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (std::size_t p : FlipPositions(10, 4, 0.25, t)) ++hits[p];
  const double expected = trials * 10.0 / 40.0;
  for (int h : hits) EXPECT_NEAR(h, expected, 5 * std::sqrt(expected));
}

TEST(SamplesCsvTest, HeaderAndRowCount) {
  const std::vector<Sample> s = SmallSamples(3, 1, 0.5, 2, 2);
  std::ostringstream out;
  WriteSamplesCsv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "f0,f1,y0,y1,subgroup");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace fedshap
