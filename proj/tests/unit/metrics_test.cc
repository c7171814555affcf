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

#include "fedshap/metrics.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedshap/error.h"
#include "test_util.h"

namespace fedshap {
namespace {

using testing::Uniform;
using testing::UniformInt;

using Labels = std::vector<std::uint8_t>;

TEST(AurocTest, HandExample) {
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}), 0.75);
}

TEST(AurocTest, PerfectRankingAndAllTies) {
  EXPECT_EQ(Auroc(std::vector<double>{0.1, 0.2, 0.3, 0.9}, Labels{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(Auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, Labels{0, 1, 0, 1}), 0.5);
}

TEST(AurocTest, SingleClassIsDegenerate) {
  EXPECT_THROW(Auroc(std::vector<double>{0.1, 0.2}, Labels{1, 1}), DegenerateMetricError);
  EXPECT_THROW(Auroc(std::vector<double>{0.1}, Labels{1, 0}), ShapeError);
}

// Brute-force pair count oracle.
double PairAuroc(const std::vector<double>& s, const Labels& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

std::pair<std::vector<double>, Labels> RandomScores(Rng& rng) {
  const int n = UniformInt(rng, 2, 60);
  std::vector<double> s(n);
  Labels y(n);
  for (int i = 0; i < n; ++i) {
    s[i] = std::round(Uniform(rng, 0, 1) * 20) / 20;  // ties on purpose
    y[i] = UniformInt(rng, 0, 1);
  }
  y[0] = 0;
  y[1] = 1;
  return {s, y};
}

TEST(AurocPropertyTest, MatchesPairCountOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto [s, y] = RandomScores(rng);
    EXPECT_NEAR(Auroc(s, y), PairAuroc(s, y), 1e-12);
  }
}

TEST(AurocPropertyTest, InvariantUnderMonotoneTransform) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto [s, y] = RandomScores(rng);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3 * s[i]) - 7;
    EXPECT_EQ(Auroc(s, y), Auroc(t, y));
  }
}

TEST(AurocPropertyTest, ComplementLabelsSumToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto [s, y] = RandomScores(rng);
    Labels flipped(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
    EXPECT_NEAR(Auroc(s, y) + Auroc(s, flipped), 1.0, 1e-12);
  }
}

// n samples x L labels with scores and groups from lambdas.
template <typename ScoreFn, typename LabelFn, typename GroupFn>
ScoredTestSet Build(int n, int l, ScoreFn score, LabelFn label, GroupFn group) {
  ScoredTestSet ts;
  ts.num_labels = l;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < l; ++k) {
      ts.scores.push_back(score(i, k));
      ts.labels.push_back(label(i, k));
    }
    ts.groups.push_back(group(i));
  }
  return ts;
}

TEST(MacroAurocTest, MeanOfPerLabelValues) {
  // Label 0 perfectly ranked, label 1 all ties.
  const ScoredTestSet ts = Build(
      4, 2, [](int i, int k) { return k == 0 ? i * 0.1 : 0.5; },
      [](int i, int) { return static_cast<std::uint8_t>(i >= 2); },
      [](int) { return Subgroup::kA; });
  const MacroAurocResult r = MacroAuroc(ts);
  EXPECT_DOUBLE_EQ(r.value, 0.75);
  EXPECT_TRUE(r.excluded.empty());
}

TEST(MacroAurocTest, ConstantPerLabelValue) {
  const ScoredTestSet ts = Build(
      6, 3, [](int i, int) { return i * 0.1; },
      [](int i, int) { return static_cast<std::uint8_t>(i % 2); }, [](int) { return Subgroup::kA; });
  const MacroAurocResult r = MacroAuroc(ts);
  EXPECT_NEAR(r.value, r.per_label[0], 1e-15);
  EXPECT_EQ(r.per_label[0], r.per_label[2]);
}

TEST(MacroAurocTest, DegenerateColumnIsExcludedAndLogged) {
  const ScoredTestSet ts = Build(
      4, 3, [](int i, int) { return i * 0.1; },
      [](int i, int k) { return static_cast<std::uint8_t>(k == 1 ? 0 : i >= 2); },
      [](int) { return Subgroup::kA; });
  const MacroAurocResult r = MacroAuroc(ts);
  EXPECT_EQ(r.excluded, std::vector<int>{1});
  EXPECT_TRUE(std::isnan(r.per_label[1]));
  EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(MacroAurocTest, AllDegenerateIsMetricError) {
  const ScoredTestSet ts = Build(
      4, 2, [](int i, int) { return i * 0.1; }, [](int, int) { return std::uint8_t{1}; },
      [](int) { return Subgroup::kA; });
  EXPECT_THROW(MacroAuroc(ts), MetricError);
}

TEST(BiasTest, PerfectOnARandomOnB) {
  // Group A: scores follow labels. Group B: constant scores.
  const ScoredTestSet ts = Build(
      8, 2, [](int i, int) { return i < 4 ? (i % 2) * 0.9 : 0.3; },
      [](int i, int) { return static_cast<std::uint8_t>(i % 2); },
      [](int i) { return i < 4 ? Subgroup::kA : Subgroup::kB; });
  const BiasValue b = Bias(ts);
  EXPECT_DOUBLE_EQ(b.value, 0.5);
  EXPECT_EQ(b.favored, Favored::kA);
}

TEST(BiasTest, SwappingTagsNegatesExactly) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = UniformInt(rng, 8, 60);
    ScoredTestSet ts = Build(
        n, 3, [&](int, int) { return Uniform(rng, 0, 1); },
        [&](int i, int) { return static_cast<std::uint8_t>(i < 4 ? i % 2 : UniformInt(rng, 0, 1)); },
        [&](int i) { return i < 4 ? (i < 2 ? Subgroup::kA : Subgroup::kB) : Subgroup(UniformInt(rng, 0, 1)); });
    // Rows 0..3 guarantee both classes in both groups for every label.
    for (int k = 0; k < 3; ++k) {
      ts.labels[0 * 3 + k] = 0;
      ts.labels[1 * 3 + k] = 1;
      ts.labels[2 * 3 + k] = 0;
      ts.labels[3 * 3 + k] = 1;
    }
    const BiasValue b = Bias(ts);
    for (Subgroup& g : ts.groups) g = Other(g);
    const BiasValue swapped = Bias(ts);
    EXPECT_EQ(swapped.value, -b.value);
    if (b.value > 0) EXPECT_EQ(swapped.favored, Favored::kB);
  }
}

TEST(BiasTest, SubgroupIndependentPredictionsGiveNearZero) {
  Rng rng(6);
  const int n = 20000;
  std::vector<double> latent(n);
  for (double& v : latent) v = Uniform(rng, 0, 1);
  const ScoredTestSet ts = Build(
      n, 2, [&](int i, int k) { return latent[i] + 0.1 * k; },
      [&](int i, int) { return static_cast<std::uint8_t>(latent[i] + Uniform(rng, -0.4, 0.4) > 0.5); },
      [](int i) { return i % 2 == 0 ? Subgroup::kA : Subgroup::kB; });
  EXPECT_NEAR(Bias(ts).value, 0.0, 0.02);
}

TEST(BiasTest, MissingSubgroupIsMetricError) {
  const ScoredTestSet ts = Build(
      4, 1, [](int i, int) { return i * 0.1; },
      [](int i, int) { return static_cast<std::uint8_t>(i % 2); }, [](int) { return Subgroup::kA; });
  EXPECT_THROW(Bias(ts), MetricError);
}

TEST(BiasTest, ColumnDegenerateInOneSubgroupIsExcluded) {
  const ScoredTestSet ts = Build(
      8, 2, [](int i, int) { return (i % 4) * 0.2; },
      [](int i, int k) { return static_cast<std::uint8_t>(k == 1 && i >= 4 ? 0 : (i % 4) >= 2); },
      [](int i) { return i < 4 ? Subgroup::kA : Subgroup::kB; });
  const BiasValue b = Bias(ts);
  EXPECT_EQ(b.excluded, std::vector<int>{1});
  EXPECT_EQ(b.value, 0.0);
  EXPECT_EQ(b.favored, Favored::kNone);
}

TEST(MeanCiTest, HandExample) {
  const ConfidenceInterval ci = MeanCi(std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(ci.mean, 3.0);
  EXPECT_NEAR(ci.half_width, 1.9632431614775607, 1e-9);
}

TEST(MeanCiTest, ConstantValuesAndScaling) {
  EXPECT_EQ(MeanCi(std::vector<double>{2, 2, 2}).half_width, 0.0);
  const ConfidenceInterval a = MeanCi(std::vector<double>{1, 4, 2, 8});
  const ConfidenceInterval b = MeanCi(std::vector<double>{2, 8, 4, 16});
  EXPECT_NEAR(b.mean, 2 * a.mean, 1e-12);
  EXPECT_NEAR(b.half_width, 2 * a.half_width, 1e-12);
}

TEST(MeanCiTest, TooFewValuesIsStatsError) {
  EXPECT_THROW(MeanCi(std::vector<double>{1.0}), StatsError);
}

TEST(MeanCiTest, CoverageIsNearNominal) {
  Rng rng(7);
  std::normal_distribution<double> normal(3.0, 2.0);
  int covered = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(8);
    for (double& x : v) x = normal(rng);
    const ConfidenceInterval ci = MeanCi(v);
    covered += std::fabs(ci.mean - 3.0) <= ci.half_width;
  }
  const double rate = static_cast<double>(covered) / trials;
  EXPECT_GE(rate, 0.93);
  EXPECT_LE(rate, 0.97);
}

TEST(PairedTTestTest, HandExample) {
  const TTestResult r = PairedTTest(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 0, 0});
  EXPECT_NEAR(r.t, 3.872983346207417, 1e-12);
  EXPECT_NEAR(r.p_value, 0.030466291662170977, 1e-10);
  EXPECT_EQ(r.dof, 3);
}

TEST(PairedTTestTest, IdenticalSamplesGivePOne) {
  const std::vector<double> a = {0.3, 0.1, 0.7};
  EXPECT_EQ(PairedTTest(a, a).p_value, 1.0);
}

TEST(PairedTTestTest, ConstantNonzeroDifferenceIsFloored) {
  const TTestResult r = PairedTTest(std::vector<double>{2, 3, 4}, std::vector<double>{1, 2, 3});
  EXPECT_TRUE(r.floored);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LT(r.p_value, 1e-300);
}

TEST(PairedTTestTest, SwappingArgumentsKeepsP) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a[i] = Uniform(rng, 0, 1);
      b[i] = Uniform(rng, 0, 1);
    }
    EXPECT_NEAR(PairedTTest(a, b).p_value, PairedTTest(b, a).p_value, 1e-14);
  }
}

TEST(PairedTTestTest, InvalidInputsAreStatsErrors) {
  EXPECT_THROW(PairedTTest(std::vector<double>{1}, std::vector<double>{2}), StatsError);
  EXPECT_THROW(PairedTTest(std::vector<double>{1, 2}, std::vector<double>{2}), StatsError);
}

TEST(StudentTTest, QuantilesMatchReference) {
  const double dof[] = {1, 2, 10, 39};
  const double q[] = {12.706204736432095, 4.302652729696142, 2.2281388519649385,
                      2.0226909200367604};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(StudentTQuantile(0.975, dof[i]), q[i], 1e-8);
}

TEST(StudentTTest, TwoSidedTailsMatchReference) {
  const double dof[] = {1, 3, 7, 30};
  const double p[] = {0.2951672353008664, 0.1393259685588431, 0.08561932856297597,
                      0.0546250449629831};
  for (int i = 0; i < 4; ++i) {
    const double two_sided = 2.0 * (1.0 - StudentTCdf(2.0, dof[i]));
    EXPECT_NEAR(two_sided / p[i], 1.0, 1e-10);
  }
}

TEST(StudentTTest, CdfIsSymmetric) {
  for (double t : {0.3, 1.0, 4.0}) EXPECT_NEAR(StudentTCdf(t, 5) + StudentTCdf(-t, 5), 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(StudentTCdf(0.0, 3), 0.5);
}

TEST(PearsonTest, KnownValues) {
  const std::vector<double> x = {1, 2, 3, 4};
  EXPECT_NEAR(PearsonCorrelation(x, std::vector<double>{2, 4, 6, 8}), 1.0, 1e-15);
  EXPECT_NEAR(PearsonCorrelation(x, std::vector<double>{8, 6, 4, 2}), -1.0, 1e-15);
  EXPECT_TRUE(std::isnan(PearsonCorrelation(x, std::vector<double>{1, 1, 1, 1})));
}

}  // namespace
}  // namespace fedshap
