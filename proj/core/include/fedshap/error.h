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

#ifndef FEDSHAP_ERROR_H_
#define FEDSHAP_ERROR_H_

#include <stdexcept>
#include <string>

namespace fedshap {

// Base of every error thrown by the library. `kind()` is a stable,
// machine-readable tag used by the CLI's JSON error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define FEDSHAP_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(tag, message) {}    \
  };

FEDSHAP_DEFINE_ERROR(ConfigError, "config")
FEDSHAP_DEFINE_ERROR(SplitError, "split")
FEDSHAP_DEFINE_ERROR(ShapeError, "shape")
FEDSHAP_DEFINE_ERROR(DegenerateMetricError, "degenerate_metric")
FEDSHAP_DEFINE_ERROR(MetricError, "metric")
FEDSHAP_DEFINE_ERROR(StatsError, "stats")
FEDSHAP_DEFINE_ERROR(ValuationError, "valuation")
FEDSHAP_DEFINE_ERROR(DomainError, "domain")
FEDSHAP_DEFINE_ERROR(AllocationError, "allocation")
FEDSHAP_DEFINE_ERROR(IoError, "io")
FEDSHAP_DEFINE_ERROR(ExperimentError, "experiment")

#undef FEDSHAP_DEFINE_ERROR

// Raised by local SGD when the loss stops being finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& message, int epoch, int batch)
      : Error("training", message), epoch_(epoch), batch_(batch) {}

  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace fedshap

#endif  // FEDSHAP_ERROR_H_
