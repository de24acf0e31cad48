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

// Randomized properties of whole stacks, swept over kinds, dimensions and
// seeds.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include "nafkit/targets.hpp"
#include "nafkit/testing.hpp"
#include "nafkit/training.hpp"

using namespace nafkit;

namespace {

struct Case {
  TransformerKind kind;
  std::size_t m;
  std::uint64_t seed;
};

std::vector<Case> cases() {
  std::vector<Case> c;
  for (TransformerKind k : nafkit::testing::all_kinds())
    for (std::size_t m : {1, 2, 3})
      for (std::uint64_t s = 0; s < 4; ++s) c.push_back({k, m, 100 * m + s});
  return c;
}

FlowStack build(const Case& c, std::size_t layers = 2, double jitter = 0.5) {
  FlowStack s = FlowStack::uniform_spec(c.m, TransformerSpec{c.kind, 6, 2}, layers, {12});
  std::mt19937_64 rng(c.seed);
  s.identity_init(rng);
  nafkit::testing::jitter_parameters(s, rng, jitter);
  return s;
}

Tensor draws(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.5);
  Tensor x(Shape{n, m});
  for (double& v : x.data) v = nd(rng);
  return x;
}

class StackProperty : public ::testing::TestWithParam<Case> {};

std::string case_name(const ::testing::TestParamInfo<Case>& info) {
  std::string k = kind_name(info.param.kind);
  for (char& ch : k)
    if (ch == '-') ch = '_';
  return k + "_m" + std::to_string(info.param.m) + "_s" + std::to_string(info.param.seed);
}

}  // namespace

TEST_P(StackProperty, InverseUndoesForward) {
  const FlowStack s = build(GetParam());
  const Tensor x = draws(64, GetParam().m, GetParam().seed + 1);
  Graph g;
  const Tensor z = s.forward(g, g.constant(x)).y.data();
  const Tensor back = s.inverse(z);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back.data[i], x.data[i], 1e-6);
}

TEST_P(StackProperty, RowsAreEvaluatedIndependently) {
  const FlowStack s = build(GetParam());
  const std::size_t m = GetParam().m;
  const Tensor x = draws(16, m, GetParam().seed + 2);
  const auto batch = s.log_density(x);
  const auto chunked = s.log_density(x, 3);
  EXPECT_EQ(batch, chunked);
  for (std::size_t i = 0; i < 16; ++i) {
    Tensor row(Shape{1, m}, std::vector<double>(x.data.begin() + i * m, x.data.begin() + (i + 1) * m));
    EXPECT_NEAR(s.log_density(row)[0], batch[i], 1e-12);
    EXPECT_TRUE(std::isfinite(batch[i]));
  }
}

TEST_P(StackProperty, LaterCoordinatesDoNotMoveEarlierOutputsOfOneLayer) {
  const FlowStack s = build(GetParam(), 1);
  const std::size_t m = GetParam().m;
  if (m == 1) GTEST_SKIP() << "no later coordinates";
  const FlowLayer& layer = s.layers()[0];
  Tensor x = draws(1, m, GetParam().seed + 3);
  Graph g;
  const Tensor y0 = layer.forward(g, g.constant(x)).y.data();
  const std::size_t last = layer.order().back();
  x.data[last] += 0.7;
  const Tensor y1 = layer.forward(g, g.constant(x)).y.data();
  for (std::size_t j = 0; j < m; ++j)
    if (j != last) {
      EXPECT_EQ(y0.data[j], y1.data[j]);
    }
  EXPECT_NE(y0.data[last], y1.data[last]);
}

TEST_P(StackProperty, LogDensityGradientsMatchFiniteDifferences) {
  const Case c = GetParam();
  if (c.seed % 4 != 0) GTEST_SKIP() << "one seed per kind and dimension";
  FlowStack s = FlowStack::uniform_spec(c.m, TransformerSpec{c.kind, 3, 2}, 2, {6});
  std::mt19937_64 rng(c.seed);
  s.identity_init(rng);
  nafkit::testing::jitter_parameters(s, rng, 0.3);
  const Tensor x = draws(4, c.m, c.seed + 4);
  const double err = check_gradients([&](Graph& g) { return mle_loss(g, s, x); }, s.parameters(), 1e-5);
  EXPECT_LE(err, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Sweep, StackProperty, ::testing::ValuesIn(cases()), case_name);

TEST(EnergyProperty, GradientsMatchFiniteDifferencesForEveryKind) {
  const TargetSpec t = four_mode_energy();
  for (TransformerKind k : nafkit::testing::all_kinds()) {
    FlowStack s = FlowStack::uniform_spec(2, TransformerSpec{k, 3, 2}, 2, {6});
    std::mt19937_64 rng(7);
    s.identity_init(rng);
    nafkit::testing::jitter_parameters(s, rng, 0.3);
    const Tensor noise = s.sample_base(8, rng);
    const double err =
        check_gradients([&](Graph& g) { return energy_loss_frozen(g, s, t, noise); }, s.parameters(), 1e-5);
    EXPECT_LE(err, 1e-3) << kind_name(k);
  }
}

TEST(TransformerProperty, RandomTransformersAreMonotoneWithConsistentLogdet) {
  std::mt19937_64 rng(8);
  for (TransformerKind k : nafkit::testing::all_kinds())
    for (int trial = 0; trial < 200; ++trial) {
      const ScalarTransformer st = nafkit::testing::random_transformer(k, rng);
      double prev = -1e300;
      for (int i = 0; i <= 200; ++i) {
        const double x = -6.0 + 0.06 * i;
        const TransformResult r = st.forward(x);
        EXPECT_GT(r.y, prev) << kind_name(k);
        prev = r.y;
        if (i % 40 == 0) {
          const double fd = nafkit::testing::central_diff(st, x);
          EXPECT_NEAR(r.logdet, std::log(fd), 1e-4 * std::max(1.0, std::abs(r.logdet))) << kind_name(k);
        }
      }
    }
}

TEST(TargetProperty, GridDensityIsPermutationInvariant) {
  const TargetSpec t = gaussian_grid(5);
  std::mt19937_64 rng(9);
  const Tensor x = draws(50, 2, 10);
  Tensor swapped(x.shape);
  for (std::size_t i = 0; i < 50; ++i) {
    swapped.at(i, 0) = x.at(i, 1);
    swapped.at(i, 1) = x.at(i, 0);
  }
  const auto a = t.log_prob(x), b = t.log_prob(swapped);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}
