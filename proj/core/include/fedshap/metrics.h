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

#ifndef FEDSHAP_METRICS_H_
#define FEDSHAP_METRICS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "fedshap/synthdata.h"

namespace fedshap {

// Predicted probabilities, true labels and subgroup tags of a test set.
// `scores` and `labels` are row-major n x num_labels.
struct ScoredTestSet {
  int num_labels = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<Subgroup> groups;

  std::size_t size() const { return groups.size(); }
};

// Throws ShapeError if `scores` is not |samples| x L.
ScoredTestSet MakeScoredTestSet(std::span<const Sample> samples, std::vector<double> scores);

// Mann-Whitney AUROC; tied scores count one half. Throws
// DegenerateMetricError if `labels` holds a single class.
double Auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MacroAurocResult {
  double value = 0.0;
  std::vector<double> per_label;  // NaN for excluded columns
  std::vector<int> excluded;      // single-class columns
};

// Unweighted mean of per-label AUROCs over non-degenerate columns. Throws
// MetricError if every column is degenerate.
MacroAurocResult MacroAuroc(const ScoredTestSet& ts);

enum class Favored { kA, kB, kNone };

struct BiasValue {
  double value = 0.0;  // macro AUROC(A) - macro AUROC(B)
  Favored favored = Favored::kNone;
  std::vector<int> excluded;  // columns single-class in either subgroup
};

// Columns are excluded when degenerate in either subgroup, so swapping the
// tags negates the value exactly. Throws MetricError if a subgroup is absent
// or no column is usable.
BiasValue Bias(const ScoredTestSet& ts);

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

// Student-t interval with n - 1 degrees of freedom. Throws StatsError for
// fewer than two values.
ConfidenceInterval MeanCi(std::span<const double> values, double level = 0.95);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  int dof = 0;
  bool floored = false;  // zero-variance, nonzero-mean differences
};

// Two-sided paired t-test on a - b.
TTestResult PairedTTest(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b), continued fraction, rel. acc. 1e-10.
double RegularizedIncompleteBeta(double a, double b, double x);
double StudentTCdf(double t, double dof);
double StudentTQuantile(double p, double dof);

double Mean(std::span<const double> values);
double SampleStdDev(std::span<const double> values);
double PearsonCorrelation(std::span<const double> x, std::span<const double> y);

}  // namespace fedshap

#endif  // FEDSHAP_METRICS_H_
