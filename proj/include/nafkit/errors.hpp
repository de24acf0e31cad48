/*
 * Copyright 2026 The nafkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef NAFKIT_ERRORS_HPP
#define NAFKIT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nafkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition on shapes, sizes or arguments violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation was asked to evaluate at a pole (log of a nonpositive value,
// division by zero) or produced a non-finite value.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

// The sigmoidal pre-logit of a transformer left its representable range.
class SaturationError : public NumericDomainError {
 public:
  static constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

  SaturationError(const std::string& what, double magnitude, std::size_t row = kNoRow)
      : NumericDomainError(what), magnitude_(magnitude), row_(row) {}
  /// |x| at which the pre-logit saturated.
  double magnitude() const { return magnitude_; }
  /// Batch row of the offending input, when raised from batched ops.
  std::size_t row() const { return row_; }

 private:
  double magnitude_;
  std::size_t row_;
};

// Bisection could not bracket the requested value.
class RangeError : public NumericDomainError {
 public:
  using NumericDomainError::NumericDomainError;
};

// A closure expected to be deterministic returned different values.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

// Malformed or mismatched input data (CSV rows, checkpoints, dimensions).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace nafkit

#endif  // NAFKIT_ERRORS_HPP
