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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "fedshap/error.h"
#include "fedshap/seed.h"

namespace fedshap {
namespace {

constexpr char kParamsMagic[8] = {'F', 'S', 'H', 'P', 'A', 'R', 'A', 'M'};
constexpr std::uint32_t kParamsVersion = 1;

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double OpenUnit(double p) {
  static const double lo = std::numeric_limits<double>::denorm_min();
  static const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

double Bce(double p, std::uint8_t y) {
  const double q = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
  return y ? -std::log(q) : -std::log(1.0 - q);
}

void CheckInput(const Architecture& arch, std::size_t size) {
  if (size != static_cast<std::size_t>(arch.inputs))
    throw ShapeError("input has " + std::to_string(size) + " features, model expects " +
                     std::to_string(arch.inputs));
}

// Views into the flat parameter vector.
struct Layout {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  explicit Layout(const Architecture& a) {
    const auto d = static_cast<std::size_t>(a.inputs);
    const auto h = static_cast<std::size_t>(a.hidden);
    const auto l = static_cast<std::size_t>(a.outputs);
    if (h == 0) {
      w2 = 0;
      b2 = l * d;
    } else {
      w1 = 0;
      b1 = h * d;
      w2 = b1 + h;
      b2 = w2 + l * h;
    }
  }
};

// Forward pass keeping the hidden pre-activations for backprop.
struct Forward {
  std::vector<double> hidden_pre;  // empty for linear
  std::vector<double> hidden;      // relu(hidden_pre), or x for linear
  std::vector<double> logits;
};

void RunForward(const ModelParams& m, std::span<const double> x, Forward& f) {
  const Architecture& a = m.arch;
  const Layout lay(a);
  const double* p = m.values.data();
  const int d = a.inputs, h = a.hidden, l = a.outputs;
  std::span<const double> input = x;
  if (h > 0) {
    f.hidden_pre.assign(h, 0.0);
    f.hidden.assign(h, 0.0);
    for (int i = 0; i < h; ++i) {
      const double* w = p + lay.w1 + static_cast<std::size_t>(i) * d;
      double s = p[lay.b1 + i];
      for (int j = 0; j < d; ++j) s += w[j] * x[j];
      f.hidden_pre[i] = s;
      f.hidden[i] = s < 0.0 ? 0.0 : s;  // NaN passes through
    }
    input = f.hidden;
  } else {
    f.hidden.assign(x.begin(), x.end());
  }
  const int in = h > 0 ? h : d;
  f.logits.assign(l, 0.0);
  for (int k = 0; k < l; ++k) {
    const double* w = p + lay.w2 + static_cast<std::size_t>(k) * in;
    double s = p[lay.b2 + k];
    for (int j = 0; j < in; ++j) s += w[j] * input[j];
    f.logits[k] = s;
  }
}

// Accumulates scale * d(loss of one sample)/d(params) into `grad` and
// returns the sample loss (mean over labels).
double Backward(const ModelParams& m, const Sample& s, const Forward& f, double scale,
                std::vector<double>& grad, std::vector<double>& scratch) {
  const Architecture& a = m.arch;
  const Layout lay(a);
  const int d = a.inputs, h = a.hidden, l = a.outputs;
  const int in = h > 0 ? h : d;
  const double inv_l = 1.0 / l;
  double loss = 0.0;
  if (h > 0) scratch.assign(h, 0.0);
  for (int k = 0; k < l; ++k) {
    const double prob = Sigmoid(f.logits[k]);
    loss += Bce(prob, s.labels[k]);
    const double dz = (prob - s.labels[k]) * inv_l * scale;
    const std::size_t row = lay.w2 + static_cast<std::size_t>(k) * in;
    for (int j = 0; j < in; ++j) grad[row + j] += dz * f.hidden[j];
    grad[lay.b2 + k] += dz;
    if (h > 0) {
      const double* w = m.values.data() + row;
      for (int j = 0; j < h; ++j) scratch[j] += w[j] * dz;
    }
  }
  if (h > 0) {
    for (int i = 0; i < h; ++i) {
      if (f.hidden_pre[i] <= 0.0) continue;
      const double da = scratch[i];
      const std::size_t row = lay.w1 + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) grad[row + j] += da * s.features[j];
      grad[lay.b1 + i] += da;
    }
  }
  return loss * inv_l;
}

void CheckParams(const ModelParams& m) {
  if (m.arch.inputs <= 0 || m.arch.outputs <= 0 || m.arch.hidden < 0)
    throw ShapeError("invalid architecture");
  if (m.values.size() != m.arch.NumParams())
    throw ShapeError("parameter vector has " + std::to_string(m.values.size()) +
                     " entries, architecture needs " + std::to_string(m.arch.NumParams()));
}

}  // namespace

std::size_t Architecture::NumParams() const {
  const auto d = static_cast<std::size_t>(inputs);
  const auto h = static_cast<std::size_t>(hidden);
  const auto l = static_cast<std::size_t>(outputs);
  return h == 0 ? l * d + l : h * d + h + l * h + l;
}

ModelParams::ModelParams(Architecture a, std::vector<double> v)
    : arch(a), values(std::move(v)) {
  CheckParams(*this);
  for (double x : values)
    if (!std::isfinite(x)) throw ShapeError("parameter vector has a non-finite entry");
}

ModelParams ModelParams::Zeros(Architecture a) {
  return ModelParams(a, std::vector<double>(a.NumParams(), 0.0));
}

ModelParams InitParams(const Architecture& arch, std::uint64_t seed) {
  ModelParams m = ModelParams::Zeros(arch);
  Rng rng(seed);
  const Layout lay(arch);
  auto fill = [&](std::size_t offset, int fan_out, int fan_in) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < static_cast<std::size_t>(fan_out) * fan_in; ++i)
      m.values[offset + i] = u(rng);
  };
  if (arch.hidden > 0) {
    fill(lay.w1, arch.hidden, arch.inputs);
    fill(lay.w2, arch.outputs, arch.hidden);
  } else {
    fill(lay.w2, arch.outputs, arch.inputs);
  }
  return m;
}

ModelParams TrainLocal(const ModelParams& params, std::span<const Sample> train,
                       const LocalTrainOptions& options, std::uint64_t seed) {
  CheckParams(params);
  if (!(options.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (options.batch <= 0) throw ConfigError("batch size must be positive");
  if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (train.empty()) throw ConfigError("TrainLocal: empty training set");

  ModelParams m = params;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  Forward f;
  std::vector<double> grad(m.values.size());
  std::vector<double> scratch;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + options.batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train[order[k]];
        CheckInput(m.arch, s.features.size());
        RunForward(m, s.features, f);
        loss += Backward(m, s, f, scale, grad, scratch) * scale;
      }
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_index),
                            epoch, batch_index);
      for (std::size_t i = 0; i < grad.size(); ++i) m.values[i] -= options.lr * grad[i];
    }
  }
  return m;
}

std::vector<double> PredictLogits(const ModelParams& params, std::span<const double> x) {
  CheckParams(params);
  CheckInput(params.arch, x.size());
  Forward f;
  RunForward(params, x, f);
  return f.logits;
}

std::vector<double> PredictProba(const ModelParams& params, std::span<const double> x) {
  std::vector<double> out = PredictLogits(params, x);
  for (double& z : out) z = OpenUnit(Sigmoid(z));
  return out;
}

std::vector<double> ScoreSamples(const ModelParams& params, std::span<const Sample> samples) {
  CheckParams(params);
  const auto l = static_cast<std::size_t>(params.arch.outputs);
  std::vector<double> out(samples.size() * l);
  Forward f;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CheckInput(params.arch, samples[i].features.size());
    RunForward(params, samples[i].features, f);
    for (std::size_t k = 0; k < l; ++k) out[i * l + k] = OpenUnit(Sigmoid(f.logits[k]));
  }
  return out;
}

std::vector<double> ExtractFeatures(const ModelParams& params, std::span<const double> x) {
  CheckParams(params);
  CheckInput(params.arch, x.size());
  Forward f;
  RunForward(params, x, f);
  return f.hidden;
}

double MeanLoss(const ModelParams& params, std::span<const Sample> samples) {
  CheckParams(params);
  if (samples.empty()) throw ConfigError("MeanLoss: empty sample set");
  Forward f;
  double total = 0.0;
  for (const Sample& s : samples) {
    CheckInput(params.arch, s.features.size());
    RunForward(params, s.features, f);
    double loss = 0.0;
    for (int k = 0; k < params.arch.outputs; ++k) loss += Bce(Sigmoid(f.logits[k]), s.labels[k]);
    total += loss / params.arch.outputs;
  }
  return total / static_cast<double>(samples.size());
}

std::vector<double> LossGradient(const ModelParams& params, std::span<const Sample> samples) {
  CheckParams(params);
  if (samples.empty()) throw ConfigError("LossGradient: empty sample set");
  std::vector<double> grad(params.values.size(), 0.0);
  std::vector<double> scratch;
  Forward f;
  const double scale = 1.0 / static_cast<double>(samples.size());
  for (const Sample& s : samples) {
    CheckInput(params.arch, s.features.size());
    RunForward(params, s.features, f);
    Backward(params, s, f, scale, grad, scratch);
  }
  return grad;
}

void SaveParams(const ModelParams& params, const std::string& path) {
  CheckParams(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kParamsMagic, sizeof(kParamsMagic));
  const std::uint32_t version = kParamsVersion;
  const std::int32_t dims[3] = {params.arch.inputs, params.arch.hidden, params.arch.outputs};
  const std::uint64_t count = params.values.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw IoError("failed writing " + path);
}

ModelParams LoadParams(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::int32_t dims[3];
  std::uint64_t count = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0)
    throw IoError(path + " is not a parameter file");
  if (version != kParamsVersion)
    throw IoError(path + ": unsupported parameter file version " + std::to_string(version));
  Architecture arch{dims[0], dims[1], dims[2]};
  if (count != arch.NumParams()) throw IoError(path + ": parameter count mismatch");
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IoError(path + ": truncated parameter file");
  return ModelParams(arch, std::move(values));
}

void WriteParamsCsv(std::ostream& out, const ModelParams& params) {
  out << "# inputs=" << params.arch.inputs << " hidden=" << params.arch.hidden
      << " outputs=" << params.arch.outputs << "\nindex,value\n";
  char buf[40];
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, params.values[i]);
    out << buf;
  }
}

std::vector<int> LogisticHead::DegenerateLabels() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < regressors.size(); ++k)
    if (regressors[k].degenerate) out.push_back(static_cast<int>(k));
  return out;
}

LogisticHead FitLogisticHead(std::span<const double> features,
                             std::span<const std::uint8_t> labels, std::size_t n,
                             const HeadFitOptions& options) {
  if (n == 0) throw ConfigError("FitLogisticHead: need at least one sample");
  if (features.size() % n != 0 || labels.size() % n != 0)
    throw ShapeError("FitLogisticHead: features/labels not divisible by sample count");
  const std::size_t h = features.size() / n;
  const std::size_t l = labels.size() / n;

  LogisticHead head;
  head.mean.assign(h, 0.0);
  head.scale.assign(h, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) head.mean[j] += features[i * h + j];
  for (double& m : head.mean) m /= static_cast<double>(n);
  std::vector<double> var(h, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) {
      const double c = features[i * h + j] - head.mean[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < h; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    head.scale[j] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<double> x(n * h);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j)
      x[i * h + j] = (features[i * h + j] - head.mean[j]) / head.scale[j];

  head.regressors.resize(l);
  std::vector<double> residual(n);
  std::vector<double> grad(h);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < l; ++k) {
    LabelRegressor& r = head.regressors[k];
    r.weights.assign(h, 0.0);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) positives += labels[i * l + k] != 0;
    if (positives == 0 || positives == n) {
      r.degenerate = true;
      r.constant = positives == 0 ? 0.0 : 1.0;
      continue;
    }
    for (int it = 0; it < options.iterations; ++it) {
      double grad_b = 0.0;
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * h;
        double z = r.bias;
        for (std::size_t j = 0; j < h; ++j) z += r.weights[j] * xi[j];
        const double e = Sigmoid(z) - (labels[i * l + k] != 0 ? 1.0 : 0.0);
        grad_b += e;
        for (std::size_t j = 0; j < h; ++j) grad[j] += e * xi[j];
      }
      r.bias -= options.lr * grad_b * inv_n;
      for (std::size_t j = 0; j < h; ++j) r.weights[j] -= options.lr * grad[j] * inv_n;
    }
  }
  return head;
}

std::vector<double> HeadLogits(const LogisticHead& head, std::span<const double> features) {
  if (features.size() != head.NumFeatures())
    throw ShapeError("head expects " + std::to_string(head.NumFeatures()) + " features, got " +
                     std::to_string(features.size()));
  std::vector<double> out(head.NumLabels());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const LabelRegressor& r = head.regressors[k];
    if (r.degenerate) {
      const double c = std::clamp(r.constant, kProbabilityClip, 1.0 - kProbabilityClip);
      out[k] = std::log(c / (1.0 - c));
      continue;
    }
    double z = r.bias;
    for (std::size_t j = 0; j < features.size(); ++j)
      z += r.weights[j] * (features[j] - head.mean[j]) / head.scale[j];
    out[k] = z;
  }
  return out;
}

std::vector<double> HeadPredict(const LogisticHead& head, std::span<const double> features) {
  std::vector<double> out = HeadLogits(head, features);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const LabelRegressor& r = head.regressors[k];
    out[k] = r.degenerate ? r.constant : Sigmoid(out[k]);
  }
  return out;
}

LogisticHead FitHeadOnSamples(const ModelParams& params, std::span<const Sample> train,
                              const HeadFitOptions& options) {
  if (train.empty()) throw ConfigError("FitHeadOnSamples: empty training set");
  std::vector<double> features;
  std::vector<std::uint8_t> labels;
  for (const Sample& s : train) {
    const std::vector<double> f = ExtractFeatures(params, s.features);
    features.insert(features.end(), f.begin(), f.end());
    labels.insert(labels.end(), s.labels.begin(), s.labels.end());
  }
  return FitLogisticHead(features, labels, train.size(), options);
}

}  // namespace fedshap
