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

// Constructive approximation of a monotone CDF-like map S: [r0, r1] -> [0, 1]
// by a staircase of n steps and by a superposition of n sigmoids, with the
// sup-norm error measured on a grid.

#ifndef NAFKIT_UNIVERSAL_HPP
#define NAFKIT_UNIVERSAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nafkit/errors.hpp"
#include "nafkit/stablemath.hpp"
#include "nafkit/transformer.hpp"

namespace nafkit {

struct MonotoneTarget {
  std::string name;
  std::function<double(double)> eval;
  std::function<double(double)> inverse;  // optional; bisection otherwise
  double r0 = 0.0;
  double r1 = 1.0;

  /// Bisection on [r0, r1] to width 1e-12 when no inverse is supplied.
  double inv(double y) const {
    if (inverse) return inverse(y);
    double lo = r0, hi = r1;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (eval(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  void validate() const {
    if (!(r1 > r0)) throw DomainError("MonotoneTarget " + name + ": empty interval");
    if (std::abs(eval(r0)) > 1e-9 || std::abs(eval(r1) - 1.0) > 1e-9)
      throw DomainError("MonotoneTarget " + name + ": S(r0) != 0 or S(r1) != 1");
    double prev = eval(r0);
    for (int i = 1; i <= 1000; ++i) {
      const double v = eval(r0 + (r1 - r0) * i / 1000.0);
      if (!(v > prev)) throw DomainError("MonotoneTarget " + name + ": not strictly increasing");
      prev = v;
    }
  }
};

inline MonotoneTarget identity_target() {
  return {"identity", [](double x) { return x; }, [](double y) { return y; }, 0.0, 1.0};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Phi^{-1} by bisection; only used off the hot path.
inline double normal_quantile(double u) {
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// CDF of N(0, 1) truncated to [-4, 4].
inline MonotoneTarget truncated_normal_target() {
  const double lo = normal_cdf(-4.0), z = normal_cdf(4.0) - lo;
  MonotoneTarget t;
  t.name = "normal-cdf";
  t.r0 = -4.0;
  t.r1 = 4.0;
  t.eval = [lo, z](double x) { return (normal_cdf(x) - lo) / z; };
  t.inverse = [lo, z](double y) { return normal_quantile(lo + y * z); };
  return t;
}

/// Random mixture of 1..5 scaled sigmoids on [r0, r1] plus a faint linear
/// ramp, affinely normalized so that S(r0) = 0 and S(r1) = 1. Without the
/// ramp a narrow sigmoid rounds to a constant away from its center and the
/// target stops being strictly increasing in double precision. Inverted by
/// bisection.
inline MonotoneTarget random_sigmoid_target(std::uint64_t seed, double r0 = -3.0, double r1 = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, 5);
  std::uniform_real_distribution<double> weight(0.1, 1.0), center(r0, r1), scale(0.05, 1.5);
  const int k = count(rng);
  std::vector<double> c(k), mu(k), s(k);
  for (int i = 0; i < k; ++i) {
    c[i] = weight(rng);
    mu[i] = center(rng);
    s[i] = scale(rng);
  }
  auto raw = [c, mu, s, r0, r1](double x) {
    double v = 0.1 * (x - r0) / (r1 - r0);
    for (std::size_t i = 0; i < c.size(); ++i) v += c[i] * sigmoid((x - mu[i]) / s[i]);
    return v;
  };
  const double lo = raw(r0), span = raw(r1) - lo;
  MonotoneTarget t;
  t.name = "random-" + std::to_string(seed);
  t.r0 = r0;
  t.r1 = r1;
  t.eval = [raw, lo, span, r0, r1](double x) {
    if (x <= r0) return 0.0;
    if (x >= r1) return 1.0;
    return (raw(x) - lo) / span;
  };
  return t;
}

struct StepApprox {
  std::vector<double> w;  // simplex
  std::vector<double> b;  // strictly increasing

  /// sum_j w_j 1{x >= b_j}
  double operator()(double x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
      if (x >= b[j]) s += w[j];
    return s;
  }
};

/// Levels y_j = j / (n + 1); b_j = S^{-1}(y_j). Targets t_j = y_j for j < n
/// and t_n = 1, so w_j = t_j - t_{j-1} is 1/(n+1) except w_n = 2/(n+1).
inline StepApprox build_step_approx(const MonotoneTarget& target, std::size_t n) {
  if (n == 0) throw DomainError("build_step_approx: n must be >= 1");
  StepApprox s;
  const double h = 1.0 / static_cast<double>(n + 1);
  double prev_t = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const double y = static_cast<double>(j) * h;
    const double t = j < n ? y : 1.0;
    s.b.push_back(target.inv(y));
    s.w.push_back(t - prev_t);
    prev_t = t;
  }
  for (std::size_t j = 1; j < n; ++j)
    if (!(s.b[j] > s.b[j - 1]))
      throw DomainError("build_step_approx: target " + target.name + " has a flat region (non-invertible)");
  return s;
}

/// DSF pre-logit sum_j w_j sigmoid(a_j x + b_j).
inline double dsf_prelogit(double x, const DsfParams& p) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += p.w[j] * sigmoid(p.a[j] * x + p.b[j]);
  return s;
}

/// Same (w, b) as the staircase with common temperature
/// tau = kappa / logit(1 - eps0), kappa the smallest gap between biases.
/// Returned as DSF parameters a = 1 / tau, b = -b_j / tau.
inline DsfParams build_sigmoid_approx(const MonotoneTarget& target, std::size_t n, double eps0) {
  if (n < 2) throw DomainError("build_sigmoid_approx: n must be >= 2");
  if (!(eps0 > 0.0 && eps0 < 0.5)) throw DomainError("build_sigmoid_approx: eps0 outside (0, 0.5)");
  const StepApprox st = build_step_approx(target, n);
  double kappa = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < n; ++j) kappa = std::min(kappa, st.b[j] - st.b[j - 1]);
  if (!(kappa > 0.0)) throw DomainError("build_sigmoid_approx: duplicate biases");
  const double tau = kappa / logit(1.0 - eps0);
  DsfParams p;
  p.w = st.w;
  for (double bj : st.b) {
    p.a.push_back(1.0 / tau);
    p.b.push_back(-bj / tau);
  }
  return p;
}

inline DsfParams build_sigmoid_approx(const MonotoneTarget& target, std::size_t n) {
  return build_sigmoid_approx(target, n, 1.0 / (2.0 * static_cast<double>(n + 1)));
}

/// Evenly spaced grid on [r0, r1], endpoints included.
inline std::vector<double> certify_grid(const MonotoneTarget& target, std::size_t grid_size) {
  if (grid_size < 101) throw DomainError("certify: grid size must be >= 101");
  std::vector<double> g(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i)
    g[i] = target.r0 + (target.r1 - target.r0) * static_cast<double>(i) / static_cast<double>(grid_size - 1);
  return g;
}

/// max_x |approx(x) - S(x)| over the grid.
inline double certify(const MonotoneTarget& target, const std::function<double(double)>& approx,
                      std::size_t grid_size) {
  double worst = 0.0;
  for (double x : certify_grid(target, grid_size)) worst = std::max(worst, std::abs(approx(x) - target.eval(x)));
  return worst;
}

inline double certify(const MonotoneTarget& target, const StepApprox& steps, std::size_t grid_size) {
  return certify(target, std::function<double(double)>(std::cref(steps)), grid_size);
}

inline double certify(const MonotoneTarget& target, const DsfParams& params, std::size_t grid_size) {
  return certify(target, [&params](double x) { return dsf_prelogit(x, params); }, grid_size);
}

/// Staircase bound 1/(n+1).
inline double step_bound(std::size_t n) { return 1.0 / static_cast<double>(n + 1); }

/// Conservative sigmoid bound 3/(n+1) (staircase error plus twice it).
inline double sigmoid_bound(std::size_t n) { return 3.0 / static_cast<double>(n + 1); }

/// S(u) = sigmoid(Phi^{-1}(u)) on [0, 1]: then logit(S(U)) ~ N(0, 1) for
/// uniform U.
inline MonotoneTarget gaussian_logit_target() {
  MonotoneTarget t;
  t.name = "gaussian-logit";
  t.r0 = 0.0;
  t.r1 = 1.0;
  t.eval = [](double u) { return sigmoid(normal_quantile(u)); };
  t.inverse = [](double y) { return normal_cdf(logit(y)); };
  return t;
}

struct KsResult {
  std::size_t n_sigmoids = 0;
  std::size_t samples = 0;
  double statistic = 0.0;
};

/// Maps uniform draws through logit(S_n(u)) for S_n built against
/// gaussian_logit_target and reports the Kolmogorov-Smirnov distance to
/// N(0, 1). No bound is claimed.
inline KsResult ks_demo(std::size_t n, std::size_t samples, std::uint64_t seed) {
  const DsfParams p = build_sigmoid_approx(gaussian_logit_target(), n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> y(samples);
  for (double& v : y) v = logit(dsf_prelogit(unif(rng), p));
  std::sort(y.begin(), y.end());
  double d = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double f = normal_cdf(y[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / samples - f), std::abs(f - static_cast<double>(i) / samples)});
  }
  return {n, samples, d};
}

}  // namespace nafkit

#endif  // NAFKIT_UNIVERSAL_HPP
