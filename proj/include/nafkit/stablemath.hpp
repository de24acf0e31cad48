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

// Log-space primitives. Every multiplicative chain in the flows (sigmoid
// products, softmax weights, Jacobian products) is evaluated through these.

#ifndef NAFKIT_STABLEMATH_HPP
#define NAFKIT_STABLEMATH_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "nafkit/errors.hpp"

namespace nafkit {

/// Offset added inside softplus so that softplus(x) > 0 in floating point.
inline constexpr double kSoftplusDelta = 1e-6;

/// softplus^{-1}(1) = log(e - 1); shifts softness pre-activations at
/// initialization so that softplus gives a ~= 1.
inline constexpr double kSoftplusInvOne = 0.54132485461291810;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(v_i)), shifted by the maximum. All -inf gives -inf.
inline double logsumexp(std::span<const double> v) {
  if (v.empty()) throw DomainError("logsumexp: empty vector");
  const double hi = *std::max_element(v.begin(), v.end());
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return std::log(acc) + hi;
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) + kSoftplusDelta;
}

inline double logsigmoid(double x) { return -softplus(-x); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline std::vector<double> logsoftmax(std::span<const double> v) {
  const double lse = logsumexp(v);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= lse;
  return out;
}

inline std::vector<double> softmax(std::span<const double> v) {
  auto out = logsoftmax(v);
  for (double& x : out) x = std::exp(x);
  return out;
}

/// Dense row-major matrix of natural logarithms of a nonnegative matrix.
/// -inf encodes a structural zero.
class LogMatrix {
 public:
  LogMatrix() = default;
  LogMatrix(std::size_t rows, std::size_t cols, double fill = kNegInf)
      : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

  /// Entry-wise log of a nonnegative matrix given row-major.
  static LogMatrix from_linear(std::size_t rows, std::size_t cols,
                               std::span<const double> values) {
    if (values.size() != rows * cols) throw DomainError("LogMatrix: size mismatch");
    LogMatrix m(rows, cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] < 0 || std::isnan(values[i]))
        throw DomainError("LogMatrix: negative entry");
      m.entries_[i] = std::log(values[i]);
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
  std::span<const double> entries() const { return entries_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

/// Logarithmic matrix product: result(i,k) = logsumexp_j(a(i,j) + b(j,k)),
/// i.e. log(exp(a) . exp(b)).
inline LogMatrix log_matmul(const LogMatrix& a, const LogMatrix& b) {
  if (a.cols() != b.rows()) throw DomainError("log_matmul: inner dimension mismatch");
  LogMatrix out(a.rows(), b.cols());
  std::vector<double> terms(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < b.cols(); ++k) {
      for (std::size_t j = 0; j < a.cols(); ++j) terms[j] = a(i, j) + b(j, k);
      out(i, k) = logsumexp(terms);
    }
  }
  return out;
}

}  // namespace nafkit

#endif  // NAFKIT_STABLEMATH_HPP
