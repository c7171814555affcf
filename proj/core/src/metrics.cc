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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedshap/error.h"

namespace fedshap {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// AUROC of column k restricted to `rows`; NaN if the column is single-class.
double ColumnAuroc(const ScoredTestSet& ts, std::span<const std::size_t> rows, int k,
                   std::vector<double>& scratch_scores, std::vector<std::uint8_t>& scratch_labels) {
  const auto l = static_cast<std::size_t>(ts.num_labels);
  scratch_scores.clear();
  scratch_labels.clear();
  for (std::size_t r : rows) {
    scratch_scores.push_back(ts.scores[r * l + k]);
    scratch_labels.push_back(ts.labels[r * l + k]);
  }
  std::size_t pos = 0;
  for (std::uint8_t y : scratch_labels) pos += y != 0;
  if (pos == 0 || pos == scratch_labels.size()) return kNaN;
  return Auroc(scratch_scores, scratch_labels);
}

bool HasBothClasses(const ScoredTestSet& ts, std::span<const std::size_t> rows, int k) {
  const auto l = static_cast<std::size_t>(ts.num_labels);
  bool pos = false, neg = false;
  for (std::size_t r : rows) {
    (ts.labels[r * l + k] ? pos : neg) = true;
    if (pos && neg) return true;
  }
  return false;
}

}  // namespace

ScoredTestSet MakeScoredTestSet(std::span<const Sample> samples, std::vector<double> scores) {
  ScoredTestSet ts;
  if (samples.empty()) throw ShapeError("MakeScoredTestSet: empty test set");
  ts.num_labels = static_cast<int>(samples.front().labels.size());
  if (scores.size() != samples.size() * ts.num_labels)
    throw ShapeError("MakeScoredTestSet: score matrix does not match samples x labels");
  ts.scores = std::move(scores);
  ts.labels.reserve(ts.scores.size());
  ts.groups.reserve(samples.size());
  for (const Sample& s : samples) {
    if (s.labels.size() != static_cast<std::size_t>(ts.num_labels))
      throw ShapeError("MakeScoredTestSet: ragged label vectors");
    ts.labels.insert(ts.labels.end(), s.labels.begin(), s.labels.end());
    ts.groups.push_back(s.subgroup);
  }
  return ts;
}

double Auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("Auroc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y != 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DegenerateMetricError("AUROC undefined: labels contain a single class");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based average ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

MacroAurocResult MacroAuroc(const ScoredTestSet& ts) {
  std::vector<std::size_t> rows(ts.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  MacroAurocResult out;
  out.per_label.assign(ts.num_labels, kNaN);
  std::vector<double> s;
  std::vector<std::uint8_t> y;
  double sum = 0.0;
  int used = 0;
  for (int k = 0; k < ts.num_labels; ++k) {
    const double v = ColumnAuroc(ts, rows, k, s, y);
    if (std::isnan(v)) {
      out.excluded.push_back(k);
      continue;
    }
    out.per_label[k] = v;
    sum += v;
    ++used;
  }
  if (used == 0) throw MetricError("macro AUROC undefined: every label column is single-class");
  out.value = sum / used;
  return out;
}

BiasValue Bias(const ScoredTestSet& ts) {
  std::vector<std::size_t> rows_a, rows_b;
  for (std::size_t i = 0; i < ts.size(); ++i)
    (ts.groups[i] == Subgroup::kA ? rows_a : rows_b).push_back(i);
  if (rows_a.empty() || rows_b.empty())
    throw MetricError("bias undefined: test set lacks subgroup " +
                      std::string(rows_a.empty() ? "A" : "B"));
  BiasValue out;
  std::vector<double> s;
  std::vector<std::uint8_t> y;
  double sum_a = 0.0, sum_b = 0.0;
  int used = 0;
  for (int k = 0; k < ts.num_labels; ++k) {
    if (!HasBothClasses(ts, rows_a, k) || !HasBothClasses(ts, rows_b, k)) {
      out.excluded.push_back(k);
      continue;
    }
    sum_a += ColumnAuroc(ts, rows_a, k, s, y);
    sum_b += ColumnAuroc(ts, rows_b, k, s, y);
    ++used;
  }
  if (used == 0) throw MetricError("bias undefined: no label column has both classes in both subgroups");
  out.value = sum_a / used - sum_b / used;
  out.favored = out.value > 0.0 ? Favored::kA : out.value < 0.0 ? Favored::kB : Favored::kNone;
  return out;
}

double Mean(std::span<const double> values) {
  if (values.empty()) throw StatsError("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double SampleStdDev(std::span<const double> values) {
  if (values.size() < 2) throw StatsError("standard deviation needs at least two values");
  const double m = Mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double PearsonCorrelation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw StatsError("Pearson correlation needs two equal-length samples of size >= 2");
  const double mx = Mean(x), my = Mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

double RegularizedIncompleteBeta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw StatsError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - RegularizedIncompleteBeta(b, a, 1.0 - x);

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  // Modified Lentz evaluation of the continued fraction.
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    f *= c * d;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_front) * f / a;
}

double StudentTCdf(double t, double dof) {
  if (!(dof > 0.0)) throw StatsError("t distribution needs dof > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * RegularizedIncompleteBeta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double StudentTQuantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw StatsError("t quantile needs p in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -StudentTQuantile(1.0 - p, dof);
  double lo = 0.0, hi = 1.0;
  while (StudentTCdf(hi, dof) < p) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (StudentTCdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ConfidenceInterval MeanCi(std::span<const double> values, double level) {
  if (values.size() < 2) throw StatsError("confidence interval needs at least two values");
  if (!(level > 0.0 && level < 1.0)) throw StatsError("confidence level must lie in (0, 1)");
  ConfidenceInterval ci;
  ci.mean = Mean(values);
  const double sd = SampleStdDev(values);
  const double n = static_cast<double>(values.size());
  const double tq = StudentTQuantile(0.5 + 0.5 * level, n - 1.0);
  ci.half_width = tq * sd / std::sqrt(n);
  return ci;
}

TTestResult PairedTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StatsError("paired t-test needs equal-length samples");
  if (a.size() < 2) throw StatsError("paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TTestResult r;
  r.dof = static_cast<int>(d.size()) - 1;
  const double m = Mean(d);
  const double sd = SampleStdDev(d);
  if (sd == 0.0) {
    if (m == 0.0) {
      r.t = 0.0;
      r.p_value = 1.0;
    } else {
      r.t = m > 0 ? INFINITY : -INFINITY;
      r.p_value = std::numeric_limits<double>::min();
      r.floored = true;
    }
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
  const double dof = r.dof;
  r.p_value = RegularizedIncompleteBeta(0.5 * dof, 0.5, dof / (dof + r.t * r.t));
  if (r.p_value < std::numeric_limits<double>::min()) {
    r.p_value = std::numeric_limits<double>::min();
    r.floored = true;
  }
  return r;
}

}  // namespace fedshap
