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

#include "fedshap/model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "fedshap/error.h"
#include "test_util.h"

namespace fedshap {
namespace {

using testing::SmallSamples;
using testing::Uniform;

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Sample MakeSample(std::vector<double> x, std::vector<std::uint8_t> y) {
  return Sample{std::move(x), std::move(y), Subgroup::kA};
}

TEST(ArchitectureTest, ParameterCounts) {
  EXPECT_EQ((Architecture{20, 16, 8}).NumParams(), 20u * 16 + 16 + 16 * 8 + 8);
  EXPECT_EQ((Architecture{20, 0, 8}).NumParams(), 20u * 8 + 8);
}

TEST(ModelParamsTest, RejectsWrongLengthAndNonFinite) {
  EXPECT_THROW(ModelParams(Architecture{2, 0, 1}, {1.0, 2.0}), ShapeError);
  EXPECT_THROW(ModelParams(Architecture{2, 0, 1}, {1.0, std::nan(""), 0.0}), ShapeError);
}

TEST(PredictTest, HandWeightsGiveClosedFormSigmoid) {
  const ModelParams m(Architecture{2, 0, 1}, {1.0, -1.0, 0.0});
  const std::vector<double> x = {2.0, 1.0};
  EXPECT_NEAR(PredictProba(m, x)[0], 0.7310585786, 1e-10);
}

TEST(PredictTest, ZeroWeightsGiveOneHalf) {
  for (int h : {0, 5}) {
    const ModelParams m = ModelParams::Zeros(Architecture{3, h, 4});
    for (double p : PredictProba(m, std::vector<double>{0.3, -2.0, 7.0})) EXPECT_EQ(p, 0.5);
  }
}

TEST(PredictTest, GrowingWeightDrivesProbabilityToOneMonotonically) {
  ModelParams m = ModelParams::Zeros(Architecture{1, 0, 1});
  const std::vector<double> x = {1.0};
  double last = 0.0;
  for (double w = 0.0; w <= 200.0; w += 5.0) {
    m.values[0] = w;
    const double p = PredictProba(m, x)[0];
    EXPECT_GE(p, last);
    EXPECT_LT(p, 1.0);
    last = p;
  }
  EXPECT_GT(last, 1.0 - 1e-6);
}

TEST(PredictTest, OutputsStayStrictlyInsideUnitInterval) {
  const ModelParams m(Architecture{1, 0, 2}, {1e6, -1e6, 0.0, 0.0});
  for (double p : PredictProba(m, std::vector<double>{1.0})) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(PredictTest, DimensionMismatchIsShapeError) {
  const ModelParams m = InitParams(Architecture{3, 4, 2}, 1);
  EXPECT_THROW(PredictProba(m, std::vector<double>{1.0, 2.0}), ShapeError);
  EXPECT_THROW(ExtractFeatures(m, std::vector<double>{1.0}), ShapeError);
}

TEST(ExtractFeaturesTest, LinearModelIsIdentity) {
  const ModelParams m = InitParams(Architecture{3, 0, 2}, 1);
  const std::vector<double> x = {0.5, -1.5, 2.0};
  EXPECT_EQ(ExtractFeatures(m, x), x);
}

TEST(ExtractFeaturesTest, HiddenWidthAndDeterminism) {
  const ModelParams m = InitParams(Architecture{3, 7, 2}, 9);
  const std::vector<double> x = {0.5, -1.5, 2.0};
  const std::vector<double> f = ExtractFeatures(m, x);
  EXPECT_EQ(f.size(), 7u);
  EXPECT_EQ(f, ExtractFeatures(m, x));
  for (double v : f) EXPECT_GE(v, 0.0);
}

// Central differences on random instances, linear and hidden.
TEST(GradientTest, MatchesFiniteDifferences) {
  Rng rng(2026);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = testing::UniformInt(rng, 1, 5);
    const int h = trial % 2 == 0 ? 0 : testing::UniformInt(rng, 1, 6);
    const int l = testing::UniformInt(rng, 1, 4);
    ModelParams m = InitParams(Architecture{d, h, l}, trial);
    for (double& v : m.values) v += Uniform(rng, -0.3, 0.3);
    std::vector<Sample> batch;
    for (int i = 0; i < 4; ++i) {
      Sample s;
      for (int j = 0; j < d; ++j) s.features.push_back(Uniform(rng, -2, 2));
      for (int k = 0; k < l; ++k) s.labels.push_back(testing::UniformInt(rng, 0, 1));
      batch.push_back(s);
    }
    const std::vector<double> g = LossGradient(m, batch);
    const double eps = 1e-5;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      ModelParams plus = m, minus = m;
      plus.values[i] += eps;
      minus.values[i] -= eps;
      const double fd = (MeanLoss(plus, batch) - MeanLoss(minus, batch)) / (2 * eps);
      const double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1e-4});
      EXPECT_LE(std::fabs(fd - g[i]) / denom, 1e-4) << "param " << i << " trial " << trial;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(TrainLocalTest, ZeroLearningRateLeavesParamsUnchanged) {
  const ModelParams m = InitParams(Architecture{6, 4, 3}, 3);
  const std::vector<Sample> data = SmallSamples(50, 1);
  EXPECT_EQ(TrainLocal(m, data, {1, 0.0, 8}, 5), m);
}

TEST(TrainLocalTest, SingleStepMatchesHandGradient) {
  // Linear, d=2, L=2, one sample: w -= lr * (p - y) / L * x.
  const ModelParams m(Architecture{2, 0, 2}, {0.2, -0.4, 0.1, 0.3, 0.05, -0.1});
  const Sample s = MakeSample({1.5, -0.5}, {1, 0});
  const double lr = 0.1;
  const ModelParams out = TrainLocal(m, std::vector<Sample>{s}, {1, lr, 1}, 0);
  std::vector<double> expect = m.values;
  for (int k = 0; k < 2; ++k) {
    const double z = m.values[2 * k] * 1.5 + m.values[2 * k + 1] * -0.5 + m.values[4 + k];
    const double e = (Sigmoid(z) - s.labels[k]) / 2.0;
    expect[2 * k] -= lr * e * 1.5;
    expect[2 * k + 1] -= lr * e * -0.5;
    expect[4 + k] -= lr * e;
  }
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(out.values[i], expect[i], 1e-10);
}

TEST(TrainLocalTest, SingleSampleLossNeverIncreases) {
  ModelParams m = InitParams(Architecture{3, 0, 2}, 4);
  const std::vector<Sample> one = {MakeSample({0.5, 1.0, -1.0}, {1, 0})};
  double last = MeanLoss(m, one);
  for (int epoch = 0; epoch < 200; ++epoch) {
    m = TrainLocal(m, one, {1, 0.5, 32}, epoch);
    const double loss = MeanLoss(m, one);
    EXPECT_LE(loss, last + 1e-15);
    last = loss;
  }
  EXPECT_LT(last, 0.05);
}

TEST(TrainLocalTest, BitReproducibleForSameSeed) {
  const ModelParams m = InitParams(Architecture{6, 4, 3}, 3);
  const std::vector<Sample> data = SmallSamples(200, 2);
  EXPECT_EQ(TrainLocal(m, data, {2, 0.1, 16}, 42), TrainLocal(m, data, {2, 0.1, 16}, 42));
  EXPECT_NE(TrainLocal(m, data, {2, 0.1, 16}, 42), TrainLocal(m, data, {2, 0.1, 16}, 43));
}

TEST(TrainLocalTest, NonFiniteLossCarriesContext) {
  const ModelParams m = InitParams(Architecture{2, 0, 1}, 1);
  std::vector<Sample> data(40, MakeSample({1.0, 1.0}, {1}));
  data[0].features[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    TrainLocal(m, data, {1, 0.1, 8}, 3);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 0);
    EXPECT_GE(e.batch(), 0);
    EXPECT_LT(e.batch(), 5);
  }
}

TEST(TrainLocalTest, BadOptionsAreConfigErrors) {
  const ModelParams m = InitParams(Architecture{2, 0, 1}, 1);
  const std::vector<Sample> data = {MakeSample({1.0, 1.0}, {1})};
  EXPECT_THROW(TrainLocal(m, data, {1, -0.1, 8}, 0), ConfigError);
  EXPECT_THROW(TrainLocal(m, data, {1, 0.1, 0}, 0), ConfigError);
  EXPECT_THROW(TrainLocal(m, std::vector<Sample>{}, {1, 0.1, 8}, 0), ConfigError);
}

TEST(MeanLossTest, ClippingKeepsLossFinite) {
  const ModelParams m(Architecture{1, 0, 1}, {1e6, 0.0});
  const std::vector<Sample> wrong = {MakeSample({1.0}, {0})};
  const double loss = MeanLoss(m, wrong);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -std::log(kProbabilityClip), 1e-6);
}

TEST(ParamsIoTest, BinaryRoundTripIsExact) {
  const ModelParams m = InitParams(Architecture{5, 3, 2}, 8);
  const std::string path = (std::filesystem::temp_directory_path() / "fedshap_params.bin").string();
  SaveParams(m, path);
  EXPECT_EQ(LoadParams(path), m);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadParams(path), IoError);
}

TEST(ParamsIoTest, CsvListsEveryParameter) {
  const ModelParams m = InitParams(Architecture{2, 0, 2}, 8);
  std::ostringstream out;
  WriteParamsCsv(out, m);
  const std::string s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(m.values.size()) + 2);
}

TEST(LogisticHeadTest, SeparableToySetIsFitPerfectly) {
  std::vector<double> x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 40; ++i) {
    const double v = -2.0 + 0.1 * i + (i >= 20 ? 0.5 : 0.0);
    x.push_back(v);
    x.push_back(0.3 * std::sin(i));
    y.push_back(i >= 20);
  }
  const LogisticHead head = FitLogisticHead(x, y, 40);
  int correct = 0;
  for (int i = 0; i < 40; ++i) {
    const double p = HeadPredict(head, std::span<const double>(x.data() + 2 * i, 2))[0];
    correct += (p > 0.5) == (y[i] == 1);
  }
  EXPECT_EQ(correct, 40);
}

TEST(LogisticHeadTest, SingleClassColumnIsConstant) {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
  const std::vector<std::uint8_t> y = {0, 1, 0, 0, 0, 1, 0, 1};  // column 0 all zero
  const LogisticHead head = FitLogisticHead(x, y, 4);
  EXPECT_EQ(head.DegenerateLabels(), std::vector<int>{0});
  for (double v : x) EXPECT_EQ(HeadPredict(head, std::vector<double>{v})[0], 0.0);
}

TEST(LogisticHeadTest, IdenticalDataGiveIdenticalHeads) {
  const ModelParams m = InitParams(Architecture{6, 4, 3}, 3);
  const std::vector<Sample> data = SmallSamples(100, 5);
  EXPECT_EQ(FitHeadOnSamples(m, data), FitHeadOnSamples(m, data));
}

}  // namespace
}  // namespace fedshap
