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

// Toy targets: Gaussian mixtures on a grid, a four-mode energy and the
// posterior over the frequency of a sine wave. Log-densities are graph
// closures so that energy fitting can differentiate through them.

#ifndef NAFKIT_TARGETS_HPP
#define NAFKIT_TARGETS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nafkit/diffgraph.hpp"
#include "nafkit/errors.hpp"
#include "nafkit/tensor.hpp"

namespace nafkit {

struct TargetSpec {
  using LogDensity = std::function<Value(Graph&, Value)>;  // (B, m) -> (B)
  using Sampler = std::function<Tensor(std::size_t, std::mt19937_64&)>;

  std::string name;
  std::size_t dim = 1;
  LogDensity log_density;
  Sampler sampler;  // empty when no exact sampler exists
  std::vector<std::vector<double>> modes;
  bool normalized = true;
  std::vector<std::pair<std::string, double>> constants;  // recorded in run configs

  bool has_sampler() const { return static_cast<bool>(sampler); }

  /// Bounded support, for targets that declare support_lo / support_hi.
  std::optional<std::pair<double, double>> support() const {
    std::optional<double> lo, hi;
    for (const auto& [k, v] : constants) {
      if (k == "support_lo") lo = v;
      if (k == "support_hi") hi = v;
    }
    if (lo && hi) return std::make_pair(*lo, *hi);
    return std::nullopt;
  }

  /// Evaluation without gradients; y is (B, m).
  std::vector<double> log_prob(const Tensor& y) const {
    if (y.rank() != 2 || y.shape[1] != dim)
      throw DataError("target " + name + ": expected points of dimension " + std::to_string(dim));
    Graph g;
    return log_density(g, g.constant(y)).data().data;
  }

  double log_prob(std::span<const double> point) const {
    return log_prob(Tensor(Shape{1, point.size()}, std::vector<double>(point.begin(), point.end())))[0];
  }

  Tensor sample(std::size_t n, std::mt19937_64& rng) const {
    if (!sampler) throw DomainError("target " + name + " has no exact sampler");
    return sampler(n, rng);
  }
};

/// Equal-weight mixture of isotropic Gaussians with common sd; means is K x m.
inline TargetSpec gaussian_mixture(std::string name, std::vector<std::vector<double>> means, double sd) {
  if (means.empty()) throw DomainError("gaussian_mixture: no components");
  if (!(sd > 0.0)) throw DomainError("gaussian_mixture: sd must be positive");
  const std::size_t m = means[0].size(), k = means.size();
  Tensor mu(Shape{k, m});
  for (std::size_t c = 0; c < k; ++c) {
    if (means[c].size() != m) throw DomainError("gaussian_mixture: ragged means");
    for (std::size_t j = 0; j < m; ++j) mu.at(c, j) = means[c][j];
  }
  const double norm = -0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi * sd * sd) -
                      std::log(static_cast<double>(k));
  TargetSpec t;
  t.name = std::move(name);
  t.dim = m;
  t.modes = means;
  t.log_density = [mu, sd, norm](Graph& g, Value y) {
    Value diff = unsqueeze_middle(y) - g.constant(mu);  // (B, K, m)
    return logsumexp_last(sum_last(diff * diff) * (-0.5 / (sd * sd))) + norm;
  };
  t.sampler = [means, sd, m, k](std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::normal_distribution<double> nd(0.0, sd);
    Tensor out(Shape{n, m});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = pick(rng);
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) = means[c][j] + nd(rng);
    }
    return out;
  };
  t.constants = {{"sd", sd}, {"components", static_cast<double>(k)}};
  return t;
}

/// k x k grid of modes over [-5, 5]^2, endpoints included; k = 1 sits at 0.
inline TargetSpec gaussian_grid(std::size_t k, double sd = 0.5) {
  if (k == 0) throw DomainError("gaussian_grid: k = 0");
  std::vector<double> axis(k, 0.0);
  for (std::size_t i = 0; i < k && k > 1; ++i)
    axis[i] = -5.0 + 10.0 * static_cast<double>(i) / static_cast<double>(k - 1);
  std::vector<std::vector<double>> means;
  for (double a : axis)
    for (double b : axis) means.push_back({a, b});
  TargetSpec t = gaussian_mixture("grid-k" + std::to_string(k), std::move(means), sd);
  t.constants.emplace_back("k", static_cast<double>(k));
  t.constants.emplace_back("range_lo", -5.0);
  t.constants.emplace_back("range_hi", 5.0);
  return t;
}

/// Invented stand-in for a four-mode energy: sd 0.5 at (+-2, +-2).
inline TargetSpec four_mode_energy() {
  TargetSpec t = gaussian_mixture("four-mode", {{-2.0, -2.0}, {-2.0, 2.0}, {2.0, -2.0}, {2.0, 2.0}}, 0.5);
  t.constants.emplace_back("mode_offset", 2.0);
  return t;
}

inline constexpr double kSineNoiseVar = 0.125;
inline constexpr double kSineBarrier = 1e6;

/// Unnormalized posterior over f with a uniform prior on [0, 2] and three
/// observations y = 0 at t = 0, 5/6, 10/6 under N(sin(2 pi f t), 0.125).
/// Outside [0, 2] a quadratic barrier replaces the hard zero.
inline TargetSpec sine_posterior() {
  TargetSpec t;
  t.name = "sine-posterior";
  t.dim = 1;
  t.normalized = false;
  t.modes = {{0.0}, {0.6}, {1.2}, {1.8}};
  const std::vector<double> ts{0.0, 5.0 / 6.0, 10.0 / 6.0};
  t.log_density = [ts](Graph& g, Value y) {
    const std::size_t b = y.shape().at(0);
    Value f = reshape(y, Shape{b});
    const double c = -0.5 * std::log(2.0 * std::numbers::pi * kSineNoiseVar);
    Value ll = g.constant(Tensor(Shape{b}, 3.0 * c));
    for (double ti : ts) {
      Value s = sin(f * (2.0 * std::numbers::pi * ti));
      ll = ll + s * s * (-0.5 / kSineNoiseVar);
    }
    // clamp(f) is a constant: the barrier's gradient is -2e6 (f - clamp(f)).
    Tensor clamped = f.data();
    for (double& v : clamped.data) v = std::clamp(v, 0.0, 2.0);
    Value dist = f - g.constant(std::move(clamped));
    return ll - dist * dist * kSineBarrier;
  };
  t.constants = {{"noise_var", kSineNoiseVar}, {"barrier", kSineBarrier}, {"support_lo", 0.0}, {"support_hi", 2.0}};
  return t;
}

inline const std::vector<std::string>& target_names() {
  static const std::vector<std::string> names{"grid-k2", "grid-k5", "grid-k10", "four-mode", "sine-posterior"};
  return names;
}

inline std::string target_registry_listing() {
  std::string s;
  for (const auto& n : target_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

inline TargetSpec make_target(const std::string& name) {
  if (name == "grid-k2") return gaussian_grid(2);
  if (name == "grid-k5") return gaussian_grid(5);
  if (name == "grid-k10") return gaussian_grid(10);
  if (name == "four-mode") return four_mode_energy();
  if (name == "sine-posterior") return sine_posterior();
  throw DomainError("unknown target '" + name + "'; available: " + target_registry_listing());
}

/// Fraction of samples within `radius` (Euclidean) of each declared mode.
inline std::vector<double> count_modes(const Tensor& samples, const TargetSpec& target, double radius) {
  if (target.modes.empty()) throw DomainError("count_modes: target " + target.name + " declares no modes");
  if (!(radius > 0.0)) throw DomainError("count_modes: radius must be positive");
  if (samples.rank() != 2 || samples.shape[1] != target.dim)
    throw DataError("count_modes: sample dimension does not match target");
  const std::size_t n = samples.shape[0], m = target.dim;
  std::vector<double> frac(target.modes.size(), 0.0);
  if (n == 0) return frac;
  for (std::size_t c = 0; c < target.modes.size(); ++c) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double d = samples.at(i, j) - target.modes[c][j];
        d2 += d * d;
      }
      if (d2 <= radius * radius) ++hits;
    }
    frac[c] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return frac;
}

}  // namespace nafkit

#endif  // NAFKIT_TARGETS_HPP
