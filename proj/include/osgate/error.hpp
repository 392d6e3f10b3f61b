/* Copyright 2026 The osgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace osgate {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: wrong dimensions, out-of-range parameters, bad flags.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A file could not be parsed as the expected container (bad magic, truncated,
// unsupported version).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A record violates a type invariant. Carries the offending record index when
// one exists.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<std::size_t> record_index = std::nullopt)
      : Error(record_index ? what + " (record " + std::to_string(*record_index) + ")"
                           : what),
        record_index_(record_index) {}

  std::optional<std::size_t> record_index() const { return record_index_; }

 private:
  std::optional<std::size_t> record_index_;
};

// Record dimensions disagree with the dataset manifest.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A model set does not cover every class.
class CompletenessError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numerical failure while fitting a density (non-PD covariance, too few samples).
class FitError : public Error {
 public:
  using Error::Error;
};

// Missing or unusable configuration (empty calibration reference, etc).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A metric is not defined on the given inputs (e.g. AUROC with no OOD scores).
// Reports record these as absent rather than zero.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace osgate
