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

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "nafkit/targets.hpp"

using namespace nafkit;

namespace {

double lp(const TargetSpec& t, std::vector<double> p) { return t.log_prob(std::span<const double>(p)); }

Tensor grid2d(double lo, double hi, std::size_t n) {
  Tensor x(Shape{n * n, 2});
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      x.at(i * n + j, 0) = lo + h * i;
      x.at(i * n + j, 1) = lo + h * j;
    }
  return x;
}

double trapezoid2d(const TargetSpec& t, double lo, double hi, std::size_t n) {
  const auto v = t.log_prob(grid2d(lo, hi, n));
  const double h = (hi - lo) / static_cast<double>(n - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0, wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      s += wi * wj * std::exp(v[i * n + j]);
    }
  return s * h * h;
}

// Pearson statistic of quadrant counts against equal probabilities.
double quadrant_chi2(const Tensor& x) {
  std::array<double, 4> c{};
  for (std::size_t i = 0; i < x.shape[0]; ++i) c[(x.at(i, 0) > 0 ? 2 : 0) + (x.at(i, 1) > 0 ? 1 : 0)] += 1.0;
  const double e = static_cast<double>(x.shape[0]) / 4.0;
  double chi = 0.0;
  for (double v : c) chi += (v - e) * (v - e) / e;
  return chi;
}

// 0.999 quantile of chi-square with 3 degrees of freedom.
constexpr double kChi2Dof3Q999 = 16.266;

std::vector<double> sine_grid(std::size_t n) {
  const TargetSpec t = sine_posterior();
  Tensor f(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) f.data[i] = 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  return t.log_prob(f);
}

}  // namespace

TEST(GaussianGrid, SingleModeAtOrigin) {
  for (double sd : {0.5, 1.0, 2.0}) {
    const TargetSpec t = gaussian_grid(1, sd);
    EXPECT_NEAR(lp(t, {0.0, 0.0}), -std::log(2.0 * std::numbers::pi * sd * sd), 1e-12);
  }
}

TEST(GaussianGrid, ModePlacement) {
  const TargetSpec t2 = gaussian_grid(2);
  ASSERT_EQ(t2.modes.size(), 4u);
  for (const auto& m : t2.modes) {
    EXPECT_EQ(std::abs(m[0]), 5.0);
    EXPECT_EQ(std::abs(m[1]), 5.0);
  }
  const TargetSpec t5 = gaussian_grid(5);
  ASSERT_EQ(t5.modes.size(), 25u);
  EXPECT_DOUBLE_EQ(t5.modes[1][1], -2.5);
  EXPECT_EQ(gaussian_grid(10).modes.size(), 100u);
  EXPECT_THROW(gaussian_grid(0), DomainError);
  EXPECT_THROW(gaussian_grid(2, 0.0), DomainError);
}

TEST(GaussianGrid, SymmetricUnderSignFlips) {
  const TargetSpec t = gaussian_grid(2, 0.5);
  const double ref = lp(t, {1.3, 2.7});
  EXPECT_NEAR(lp(t, {-1.3, 2.7}), ref, 1e-12);
  EXPECT_NEAR(lp(t, {1.3, -2.7}), ref, 1e-12);
  EXPECT_NEAR(lp(t, {-1.3, -2.7}), ref, 1e-12);
}

TEST(GaussianGrid, ExactSamplerQuadrantFrequencies) {
  const TargetSpec t = gaussian_grid(2, 0.5);
  std::mt19937_64 rng(1);
  const Tensor x = t.sample(100000, rng);
  std::array<double, 4> c{};
  for (std::size_t i = 0; i < x.shape[0]; ++i) c[(x.at(i, 0) > 0 ? 2 : 0) + (x.at(i, 1) > 0 ? 1 : 0)] += 1.0;
  for (double v : c) EXPECT_NEAR(v / 1e5, 0.25, 0.01);
  EXPECT_LT(quadrant_chi2(x), kChi2Dof3Q999);
}

TEST(GaussianGrid, SamplerMatchesDensityPerCell) {
  // k = 5: each draw is assigned to the nearest mean; cells must be equally likely
  const TargetSpec t = gaussian_grid(5, 0.5);
  std::mt19937_64 rng(2);
  const Tensor x = t.sample(100000, rng);
  std::vector<double> c(25, 0.0);
  for (std::size_t i = 0; i < x.shape[0]; ++i) {
    const auto ix = static_cast<std::size_t>(std::clamp(std::lround((x.at(i, 0) + 5.0) / 2.5), 0L, 4L));
    const auto iy = static_cast<std::size_t>(std::clamp(std::lround((x.at(i, 1) + 5.0) / 2.5), 0L, 4L));
    c[ix * 5 + iy] += 1.0;
  }
  const double e = 1e5 / 25.0;
  double chi = 0.0;
  for (double v : c) chi += (v - e) * (v - e) / e;
  EXPECT_LT(chi, 51.18);  // chi-square, 24 dof, 0.999 quantile
}

TEST(GaussianGrid, IntegratesToOne) {
  EXPECT_NEAR(trapezoid2d(gaussian_grid(1), -9.0, 9.0, 601), 1.0, 1e-3);
  EXPECT_NEAR(trapezoid2d(gaussian_grid(2), -9.0, 9.0, 601), 1.0, 1e-3);
  EXPECT_NEAR(trapezoid2d(gaussian_grid(5), -8.0, 8.0, 401), 1.0, 1e-3);
  EXPECT_NEAR(trapezoid2d(gaussian_grid(10), -8.0, 8.0, 401), 1.0, 1e-3);
}

TEST(FourMode, SymmetryAndModes) {
  const TargetSpec t = four_mode_energy();
  EXPECT_NEAR(lp(t, {2.0, 2.0}), lp(t, {-2.0, -2.0}), 1e-12);
  for (const auto& m : t.modes) EXPECT_LT(lp(t, {0.0, 0.0}), lp(t, m));

  const std::size_t n = 101;
  const Tensor g = grid2d(-4.0, 4.0, n);
  const auto v = t.log_prob(g);
  double best = -1e300;
  for (double x : v) best = std::max(best, x);
  std::size_t maxima = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < best - 1e-9) continue;
    ++maxima;
    double nearest = 1e9;
    for (const auto& m : t.modes)
      nearest = std::min(nearest, std::hypot(g.at(i, 0) - m[0], g.at(i, 1) - m[1]));
    EXPECT_LE(nearest, 0.1);
  }
  EXPECT_EQ(maxima, 4u);
}

TEST(FourMode, SamplerMatchesDensity) {
  const TargetSpec t = four_mode_energy();
  std::mt19937_64 rng(3);
  EXPECT_LT(quadrant_chi2(t.sample(100000, rng)), kChi2Dof3Q999);
}

TEST(SinePosterior, MaximalAtZeroFrequency) {
  const TargetSpec t = sine_posterior();
  const double c = -0.5 * std::log(2.0 * std::numbers::pi * 0.125);
  EXPECT_NEAR(lp(t, {0.0}), 3.0 * c, 1e-12);
  for (double v : sine_grid(2001)) EXPECT_LE(v, 3.0 * c + 1e-12);
}

TEST(SinePosterior, DeclaredModesShareTheMaximum) {
  const TargetSpec t = sine_posterior();
  EXPECT_NEAR(lp(t, {0.6}), lp(t, {1.8}), 1e-9);
  EXPECT_NEAR(lp(t, {1.2}), lp(t, {0.0}), 1e-9);
  EXPECT_EQ(t.modes.size(), 4u);
}

TEST(SinePosterior, GridSearchFindsTheDeclaredModes) {
  // The likelihood also has shallow local maxima between the declared modes
  // (near 0.3, 0.9, 1.5 and the right edge); they sit 4 nats or more below.
  const auto v = sine_grid(2001);
  const double top = v[0];
  std::vector<double> dominant;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool left = i == 0 || v[i] >= v[i - 1];
    const bool right = i + 1 == v.size() || v[i] >= v[i + 1];
    if (!(left && right)) continue;
    const double f = 2.0 * static_cast<double>(i) / 2000.0;
    if (v[i] > top - 1.0)
      dominant.push_back(f);
    else
      EXPECT_LT(v[i], top - 3.9) << "f = " << f;
  }
  ASSERT_EQ(dominant.size(), 4u);
  const double expect[] = {0.0, 0.6, 1.2, 1.8};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(dominant[k], expect[k], 0.05);
}

TEST(SinePosterior, QuadraticBarrierOutsideTheSupport) {
  const TargetSpec t = sine_posterior();
  auto lik = [](double f) {
    const double c = -0.5 * std::log(2.0 * std::numbers::pi * 0.125);
    double s = 3.0 * c;
    for (double ti : {0.0, 5.0 / 6.0, 10.0 / 6.0}) {
      const double v = std::sin(2.0 * std::numbers::pi * f * ti);
      s -= v * v / (2.0 * 0.125);
    }
    return s;
  };
  EXPECT_NEAR(lp(t, {-0.1}), lik(-0.1) - 1e6 * 0.01, 1e-6);
  EXPECT_NEAR(lp(t, {2.05}), lik(2.05) - 1e6 * 0.0025, 1e-6);
  EXPECT_NEAR(lp(t, {1.0}), lik(1.0), 1e-12);
  ASSERT_TRUE(t.support().has_value());
  EXPECT_EQ(t.support()->first, 0.0);
  EXPECT_EQ(t.support()->second, 2.0);
  EXPECT_FALSE(gaussian_grid(2).support().has_value());
  EXPECT_FALSE(t.has_sampler());
  std::mt19937_64 rng(4);
  EXPECT_THROW(t.sample(1, rng), DomainError);
}

TEST(SinePosterior, BarrierGradient) {
  const TargetSpec t = sine_posterior();
  Parameter f("f", Tensor(Shape{1, 1}, -0.1));
  Graph g;
  g.backward(sum(t.log_density(g, g.param(f))));
  // d/df of the barrier is -2e6 * (f - 0) = 2e5; the likelihood part is O(10)
  EXPECT_NEAR(f.grad.data[0], 2e5, 100.0);
}

TEST(CountModes, Examples) {
  const TargetSpec t = four_mode_energy();
  Tensor at_one(Shape{10, 2});
  for (std::size_t i = 0; i < 10; ++i) {
    at_one.at(i, 0) = 2.0;
    at_one.at(i, 1) = -2.0;
  }
  const auto f = count_modes(at_one, t, 0.1);
  for (std::size_t c = 0; c < 4; ++c) {
    const bool hit = t.modes[c] == std::vector<double>{2.0, -2.0};
    EXPECT_EQ(f[c], hit ? 1.0 : 0.0);
  }

  const TargetSpec g = gaussian_grid(2, 0.5);
  std::mt19937_64 rng(5);
  for (double v : count_modes(g.sample(10000, rng), g, 1.5)) EXPECT_NEAR(v, 0.25, 0.02);

  Tensor u(Shape{100000, 2});
  std::uniform_real_distribution<double> ud(-6.0, 6.0);
  for (double& v : u.data) v = ud(rng);
  const double area = std::numbers::pi * 0.25 / 144.0;
  for (double v : count_modes(u, t, 0.5)) EXPECT_NEAR(v, area, 0.003);
}

TEST(CountModes, Errors) {
  TargetSpec bare;
  bare.name = "bare";
  bare.dim = 1;
  EXPECT_THROW(count_modes(Tensor(Shape{1, 1}, 0.0), bare, 1.0), DomainError);
  EXPECT_THROW(count_modes(Tensor(Shape{1, 2}, 0.0), four_mode_energy(), 0.0), DomainError);
  EXPECT_THROW(count_modes(Tensor(Shape{1, 3}, 0.0), four_mode_energy(), 1.0), DataError);
}

TEST(Registry, NamesAndErrors) {
  for (const auto& n : target_names()) EXPECT_EQ(make_target(n).name, n);
  EXPECT_EQ(make_target("grid-k10").modes.size(), 100u);
  try {
    make_target("banana");
    FAIL();
  } catch (const DomainError& e) {
    const std::string w = e.what();
    for (const auto& n : target_names()) EXPECT_NE(w.find(n), std::string::npos);
  }
  EXPECT_THROW(four_mode_energy().log_prob(Tensor(Shape{1, 3}, 0.0)), DataError);
}
