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

#include <cmath>
#include <random>
#include <vector>

#include "nafkit/conditioner.hpp"
#include "nafkit/flow.hpp"

using namespace nafkit;

namespace {

// reach(j, t) = number of paths from input j to output column t through the
// per-dimension masks.
std::vector<std::vector<double>> reachability(const MaskSet& ms, std::size_t m) {
  std::vector<std::vector<double>> r(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> v(m, 0.0);
    v[j] = 1.0;
    for (const Tensor& mask : ms.masks) {
      std::vector<double> next(mask.shape[1], 0.0);
      for (std::size_t a = 0; a < mask.shape[0]; ++a)
        for (std::size_t b = 0; b < mask.shape[1]; ++b) next[b] += v[a] * mask.at(a, b);
      v = std::move(next);
    }
    r[j] = v;
  }
  return r;
}

void randomize(const MadeConditioner& made, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  for (std::size_t l = 0; l < made.layer_count(); ++l) {
    for (double& w : made.weight(l).value.data) w = nd(rng);
    for (double& b : made.bias(l).value.data) b = nd(rng);
  }
}

std::vector<std::size_t> identity_order(std::size_t m) {
  std::vector<std::size_t> o(m);
  for (std::size_t i = 0; i < m; ++i) o[i] = i;
  return o;
}

}  // namespace

TEST(BuildMasks, ZeroDimensionIsDomainError) { EXPECT_THROW(build_masks(0, {4}, {}), DomainError); }

TEST(BuildMasks, RejectsBadArguments) {
  EXPECT_THROW(build_masks(2, {}, {0, 1}), DomainError);
  EXPECT_THROW(build_masks(2, {0}, {0, 1}), DomainError);
  EXPECT_THROW(build_masks(2, {4}, {0, 0}), DomainError);
  EXPECT_THROW(build_masks(2, {4}, {0}), DomainError);
}

TEST(BuildMasks, SingleDimensionIsUnconditioned) {
  const MaskSet ms = build_masks(1, {8, 4}, {0});
  for (const Tensor& mask : ms.masks)
    for (double v : mask.data) EXPECT_EQ(v, 0.0);
}

TEST(BuildMasks, ReachabilityIsStrictlyAutoregressive) {
  for (std::size_t m : {2, 3, 4, 5}) {
    for (const auto& hidden : std::vector<std::vector<std::size_t>>{{8}, {3, 7}, {16}}) {
      std::vector<std::size_t> order = identity_order(m);
      std::mt19937_64 rng(m);
      std::shuffle(order.begin(), order.end(), rng);
      const MaskSet ms = build_masks(m, hidden, order);
      std::vector<std::size_t> rank(m);
      for (std::size_t r = 0; r < m; ++r) rank[order[r]] = r;
      const auto reach = reachability(ms, m);
      const bool wide = *std::min_element(hidden.begin(), hidden.end()) + 1 >= m;
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t t = 0; t < m; ++t) {
          if (rank[j] < rank[t]) {
            // a hidden layer narrower than m - 1 drops some degrees, and
            // with them some allowed paths
            if (wide) {
              EXPECT_GT(reach[j][t], 0.0) << "m=" << m << " j=" << j << " t=" << t;
            }
          } else {
            EXPECT_EQ(reach[j][t], 0.0) << "m=" << m << " j=" << j << " t=" << t;
          }
        }
    }
  }
}

TEST(BuildMasks, DegreesCycleAndNoDeadUnits) {
  const MaskSet ms = build_masks(3, {8}, {0, 1, 2});
  const std::vector<std::size_t> expect{1, 2, 1, 2, 1, 2, 1, 2};
  EXPECT_EQ(ms.hidden_degrees[0], expect);
  for (std::size_t k = 0; k < 8; ++k) {
    double incoming = 0.0;
    for (std::size_t j = 0; j < 3; ++j) incoming += ms.masks[0].at(j, k);
    EXPECT_GT(incoming, 0.0);
  }
}

TEST(ConditionerForward, AutoregressiveUnderPerturbation) {
  std::mt19937_64 rng(1);
  MadeConditioner made(2, {16}, 3, {0, 1});
  randomize(made, rng, 0.7);
  const Tensor base = conditioner_forward(std::vector<double>{0.4, -0.2}, made);
  const Tensor moved = conditioner_forward(std::vector<double>{0.4, 0.8}, made);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(base.data[i], moved.data[i]);
  const Tensor moved1 = conditioner_forward(std::vector<double>{1.4, -0.2}, made);
  bool block2_changed = false;
  for (std::size_t p = 0; p < 3; ++p) {
    EXPECT_EQ(base.at(0, p), moved1.at(0, p));
    block2_changed = block2_changed || base.at(1, p) != moved1.at(1, p);
  }
  EXPECT_TRUE(block2_changed);
}

TEST(ConditionerForward, ZeroWeightsGiveOutputBiases) {
  MadeConditioner made(3, {8}, 2, {0, 1, 2});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto& beta = made.bias(1).value.data;
  for (double& b : beta) b = nd(rng);
  for (const auto& x : std::vector<std::vector<double>>{{0, 0, 0}, {5, -3, 1}, {-2, 2, 9}}) {
    const Tensor out = conditioner_forward(x, made);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.data[i], beta[i]);
  }
}

TEST(ConditionerForward, NonFiniteInputIsDomainError) {
  MadeConditioner made(2, {4}, 2, {0, 1});
  EXPECT_THROW(conditioner_forward(std::vector<double>{NAN, 0.0}, made), DomainError);
  EXPECT_THROW(conditioner_forward(std::vector<double>{0.0, INFINITY}, made), DomainError);
  EXPECT_THROW(conditioner_forward(std::vector<double>{0.0}, made), DomainError);
}

TEST(ConditionerForward, FiniteDifferenceJacobianIsBlockStrictlyLowerTriangular) {
  std::mt19937_64 rng(3);
  const std::size_t m = 4, width = 5;
  MadeConditioner made(m, {32}, width, {0, 1, 2, 3});
  randomize(made, rng, 0.5);
  std::vector<double> x{0.3, -0.7, 1.1, 0.2};
  const double h = 1e-6;
  for (std::size_t s = 0; s < m; ++s) {
    auto xp = x, xm = x;
    xp[s] += h;
    xm[s] -= h;
    const Tensor fp = conditioner_forward(xp, made), fm = conditioner_forward(xm, made);
    for (std::size_t t = 0; t < m; ++t) {
      double mag = 0.0;
      for (std::size_t p = 0; p < width; ++p) mag = std::max(mag, std::abs(fp.at(t, p) - fm.at(t, p)) / (2 * h));
      if (s < t) {
        EXPECT_GT(mag, 1e-8) << "s=" << s << " t=" << t;
      } else {
        EXPECT_EQ(mag, 0.0) << "s=" << s << " t=" << t;
      }
    }
  }
}

TEST(ApplyCwn, Examples) {
  const Tensor u = apply_cwn(Tensor(Shape{2, 2}, 0.0), std::vector<double>{0.0, 0.0});
  for (double v : u.data) EXPECT_DOUBLE_EQ(v, 0.5);
  const Tensor w = apply_cwn(Tensor(Shape{1, 2}, 0.0), std::vector<double>{std::log(3.0), 0.0});
  EXPECT_NEAR(w.at(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(w.at(0, 1), 0.25, 1e-15);
  const Tensor v = Tensor::matrix(2, 3, {0.1, -2.0, 3.0, 1.0, 0.0, -1.0});
  const Tensor a = apply_cwn(v, std::vector<double>{0.0, 0.0, 0.0});
  const Tensor b = apply_cwn(v, std::vector<double>{4.2, 4.2, 4.2});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-15);
}

TEST(ApplyCwn, LengthMismatchIsDomainError) {
  EXPECT_THROW(apply_cwn(Tensor(Shape{2, 3}, 0.0), std::vector<double>{0.0, 0.0}), DomainError);
}

TEST(ApplyCwn, RowsSumToOneAndMatchRescaledExponentials) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int t = 0; t < 100; ++t) {
    Tensor v(Shape{4, 6});
    for (double& x : v.data) x = u(rng);
    std::vector<double> eta(6);
    for (double& x : eta) x = u(rng);
    const Tensor out = apply_cwn(v, eta);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 6; ++j) s += out.at(i, j);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  // exp(v_ij) * exp(eta_j), normalized per row
  const Tensor v = Tensor::matrix(1, 3, {0.5, -0.25, 1.0});
  const std::vector<double> eta{0.3, 1.2, -0.4};
  const Tensor out = apply_cwn(v, eta);
  double z = 0.0;
  for (std::size_t j = 0; j < 3; ++j) z += std::exp(v.at(0, j)) * std::exp(eta[j]);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out.at(0, j), std::exp(v.at(0, j)) * std::exp(eta[j]) / z, 1e-15);
}

TEST(IdentityInit, WeightsSmallHiddenBiasesZero) {
  std::mt19937_64 rng(5);
  MadeConditioner made(3, {32}, block_width(TransformerSpec{TransformerKind::kDsf, 16, 2}), {0, 1, 2});
  identity_init(made, rng, 0.0);
  for (std::size_t l = 0; l < made.layer_count(); ++l) {
    for (double w : made.weight(l).value.data) EXPECT_LE(std::abs(w), 0.001);
    for (double b : made.bias(l).value.data) EXPECT_EQ(b, 0.0);
  }
  std::mt19937_64 rng2(5);
  identity_init(made, rng2);
  for (double b : made.bias(made.layer_count() - 1).value.data) EXPECT_LE(std::abs(b), 1e-3);
  for (double b : made.bias(0).value.data) EXPECT_EQ(b, 0.0);
}

TEST(IdentityInit, SoftnessPreActivationIsTheShift) {
  const TransformerSpec spec{TransformerKind::kDsf, 16, 2};
  FlowLayer layer(1, spec, {0}, {8}, "l");
  std::mt19937_64 rng(6);
  layer.identity_init(rng, 0.0);
  const Tensor pp = layer.pseudo_params(Tensor(Shape{1, 1}, 0.7));
  for (std::size_t j = 0; j < spec.d; ++j) {
    EXPECT_DOUBLE_EQ(pp.data[spec.d + j], kSoftplusInvOne);
    EXPECT_NEAR(softplus(pp.data[spec.d + j]), 1.000001, 1e-9);
  }
  EXPECT_NEAR(kSoftplusInvOne, 0.5413, 1e-4);
}

TEST(IdentityInit, DsfLayerIsNearIdentity) {
  const TransformerSpec spec{TransformerKind::kDsf, 16, 2};
  FlowLayer layer(1, spec, {0}, {64}, "l");
  std::mt19937_64 rng(7);
  layer.identity_init(rng);
  Tensor x(Shape{61, 1});
  for (std::size_t i = 0; i < 61; ++i) x.data[i] = -3.0 + 0.1 * static_cast<double>(i);
  Graph g;
  const LayerOutput out = layer.forward(g, g.constant(x));
  for (std::size_t i = 0; i < 61; ++i) {
    EXPECT_LE(std::abs(out.y.data().data[i] - x.data[i]), 0.05);
    EXPECT_LE(std::abs(out.logdet.data().data[i]), 0.05);
  }
}

TEST(IdentityInit, StackedFlowIsNearIdentityUpToFourDimensions) {
  for (TransformerKind k : {TransformerKind::kAffineExp, TransformerKind::kAffineGate, TransformerKind::kDsf,
                            TransformerKind::kDdsf}) {
    for (std::size_t m = 1; m <= 4; ++m) {
      FlowStack stack = FlowStack::uniform_spec(m, TransformerSpec{k, 16, 2}, 1, {64});
      std::mt19937_64 rng(8 + m);
      stack.identity_init(rng);
      std::uniform_real_distribution<double> u(-3.0, 3.0);
      Tensor x(Shape{50, m});
      for (double& v : x.data) v = u(rng);
      Graph g;
      const Tensor y = stack.forward(g, g.constant(x)).y.data();
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(y.data[i] - x.data[i]), 0.1) << kind_name(k);
    }
  }
}

TEST(Cwn, DdsfOutputWidthIsLinearInDepthAndWidth) {
  for (std::size_t d : {4, 16, 64}) {
    for (std::size_t L : {1, 2, 3}) {
      const std::size_t w = block_width(TransformerSpec{TransformerKind::kDdsf, d, L});
      EXPECT_LE(w, 4 * L * d + 4) << "d=" << d << " L=" << L;
      if (d >= 16 && L >= 2) {
        EXPECT_LT(w, L * d * d);
      }
    }
  }
}
