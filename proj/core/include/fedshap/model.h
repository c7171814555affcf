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

// The shared multi-label classifier: either linear (hidden == 0) or one
// ReLU hidden layer, sigmoid outputs, and binary cross-entropy averaged over
// samples and labels.
//
// Flat parameter layout:
//   hidden == 0:  W[L x d], b[L]
//   hidden  > 0:  W1[h x d], b1[h], W2[L x h], b2[L]

#ifndef FEDSHAP_MODEL_H_
#define FEDSHAP_MODEL_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedshap/synthdata.h"

namespace fedshap {

inline constexpr double kProbabilityClip = 1e-7;

struct Architecture {
  int inputs = 20;
  int hidden = 16;
  int outputs = 8;

  std::size_t NumParams() const;
  bool operator==(const Architecture&) const = default;
};

struct ModelParams {
  Architecture arch;
  std::vector<double> values;

  ModelParams() = default;
  ModelParams(Architecture a, std::vector<double> v);

  // Zero-initialized parameters of `a`.
  static ModelParams Zeros(Architecture a);

  bool operator==(const ModelParams&) const = default;
};

// Uniform Glorot initialization of weights, zero biases.
ModelParams InitParams(const Architecture& arch, std::uint64_t seed);

struct LocalTrainOptions {
  int epochs = 1;
  double lr = 0.1;
  int batch = 32;
};

// Mini-batch SGD over `train` in an order shuffled per epoch by `seed`.
// Throws TrainingError if a batch loss is not finite.
ModelParams TrainLocal(const ModelParams& params, std::span<const Sample> train,
                       const LocalTrainOptions& options, std::uint64_t seed);

std::vector<double> PredictLogits(const ModelParams& params, std::span<const double> x);
std::vector<double> PredictProba(const ModelParams& params, std::span<const double> x);

// Row-major |samples| x L probability matrix.
std::vector<double> ScoreSamples(const ModelParams& params, std::span<const Sample> samples);

// Penultimate-layer activations: the ReLU hidden layer, or x itself for a
// linear model.
std::vector<double> ExtractFeatures(const ModelParams& params, std::span<const double> x);

// Mean BCE over samples and labels with probabilities clipped to
// [kProbabilityClip, 1 - kProbabilityClip].
double MeanLoss(const ModelParams& params, std::span<const Sample> samples);

// Gradient of the mean BCE of `samples` with respect to the flat parameters.
std::vector<double> LossGradient(const ModelParams& params, std::span<const Sample> samples);

void SaveParams(const ModelParams& params, const std::string& path);
ModelParams LoadParams(const std::string& path);
void WriteParamsCsv(std::ostream& out, const ModelParams& params);

// Per-label logistic regressors over deep features. Inputs are standardized
// with the fitting data's mean/std; columns with one class become constants.
struct LabelRegressor {
  std::vector<double> weights;
  double bias = 0.0;
  bool degenerate = false;
  double constant = 0.0;  // predicted probability when degenerate

  bool operator==(const LabelRegressor&) const = default;
};

struct LogisticHead {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<LabelRegressor> regressors;

  std::size_t NumFeatures() const { return mean.size(); }
  std::size_t NumLabels() const { return regressors.size(); }
  std::vector<int> DegenerateLabels() const;
  bool operator==(const LogisticHead&) const = default;
};

struct HeadFitOptions {
  int iterations = 500;
  double lr = 0.5;
};

// `features` is row-major n x h, `labels` row-major n x L.
LogisticHead FitLogisticHead(std::span<const double> features,
                             std::span<const std::uint8_t> labels,
                             std::size_t num_samples, const HeadFitOptions& options = {});

std::vector<double> HeadLogits(const LogisticHead& head, std::span<const double> features);
std::vector<double> HeadPredict(const LogisticHead& head, std::span<const double> features);

// Extracts `params` features for every training sample of `train` and fits a
// head on them.
LogisticHead FitHeadOnSamples(const ModelParams& params, std::span<const Sample> train,
                              const HeadFitOptions& options = {});

}  // namespace fedshap

#endif  // FEDSHAP_MODEL_H_
