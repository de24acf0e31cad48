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
#include <functional>
#include <random>
#include <vector>

#include "nafkit/flow.hpp"
#include "nafkit/testing.hpp"
#include "nafkit/transformer.hpp"

using namespace nafkit;

namespace {

std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

DsfParams dsf(std::vector<double> w, std::vector<double> a, std::vector<double> b) {
  return DsfParams{std::move(w), std::move(a), std::move(b)};
}

// Plain-double reference of the DSF map, without any log-space tricks.
double naive_dsf(double x, const DsfParams& p) {
  double d = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) d += p.w[j] / (1.0 + std::exp(-(p.a[j] * x + p.b[j])));
  return std::log(d / (1.0 - d));
}

}  // namespace

TEST(Affine, Examples) {
  const auto e = affine_forward(7.0, {0.0, 0.0}, AffineKind::kExp);
  EXPECT_DOUBLE_EQ(e.y, 7.0);
  EXPECT_DOUBLE_EQ(e.logdet, 0.0);
  const auto s = affine_forward(2.0, {3.0, 50.0}, AffineKind::kGate);
  EXPECT_NEAR(s.y, 2.0, 1e-12);
  EXPECT_NEAR(s.logdet, 0.0, 1e-6 + 1e-12);
  const auto h = affine_forward(2.0, {4.0, 0.0}, AffineKind::kGate);
  EXPECT_DOUBLE_EQ(h.y, 3.0);
  EXPECT_NEAR(h.logdet, -std::log(2.0), 1e-6 + 1e-12);
  // finite-difference derivative
  auto f = [](double x) { return affine_forward(x, {4.0, 0.0}, AffineKind::kGate).y; };
  EXPECT_NEAR(std::log(nafkit::testing::central_diff(f, 2.0)), -std::log(2.0), 1e-8);
}

TEST(Dsf, SingleUnitIsIdentity) {
  for (double x : {-4.0, -0.3, 0.0, 2.5}) {
    const auto r = dsf_forward(x, dsf({1.0}, {1.0}, {0.0}));
    EXPECT_NEAR(r.y, x, 1e-12);
    EXPECT_NEAR(r.logdet, 0.0, 1e-5);
  }
}

TEST(Dsf, IdenticalComponentsCollapse) {
  const auto r = dsf_forward(1.7, dsf({0.5, 0.5}, {1.0, 1.0}, {0.0, 0.0}));
  EXPECT_NEAR(r.y, 1.7, 1e-12);
  EXPECT_NEAR(r.logdet, 0.0, 1e-5);
}

TEST(Dsf, TwoUnitsAgainstFiniteDifferences) {
  const DsfParams p = dsf({0.5, 0.5}, {2.0, 1.0}, {0.0, 0.0});
  const auto r = dsf_forward(0.0, p);
  EXPECT_NEAR(r.y, 0.0, 1e-12);
  const double fd = nafkit::testing::central_diff([&](double x) { return naive_dsf(x, p); }, 0.0);
  EXPECT_NEAR(fd, 1.5, 1e-8);
  EXPECT_NEAR(r.logdet, std::log(fd), 1e-5);
  EXPECT_NEAR(r.logdet, 0.405465, 1e-5);
}

TEST(Dsf, MatchesNaiveEvaluation) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const ScalarTransformer st = nafkit::testing::random_transformer(TransformerKind::kDsf, rng);
    for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
      EXPECT_NEAR(dsf_forward(x, st.dsf).y, naive_dsf(x, st.dsf), 1e-8);
      EXPECT_NEAR(dsf_output(x, st.dsf), naive_dsf(x, st.dsf), 1e-8);
    }
  }
}

TEST(Dsf, InvalidParametersAreDomainErrors) {
  EXPECT_THROW(dsf(std::vector<double>{0.5, 0.6}, {1.0, 1.0}, {0.0, 0.0}).validate(), DomainError);
  EXPECT_THROW(dsf(std::vector<double>{0.5, 0.5}, {1.0, -1.0}, {0.0, 0.0}).validate(), DomainError);
  EXPECT_THROW(dsf(std::vector<double>{1.0}, {1.0, 1.0}, {0.0}).validate(), DomainError);
}

TEST(Dsf, NoSaturationInTheNominalRegime) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> ub(-10.0, 10.0), ua(0.01, 10.0), ux(-30.0, 30.0);
  for (int t = 0; t < 500; ++t) {
    DsfParams p;
    std::vector<double> pre(8);
    for (double& v : pre) v = ub(rng);
    p.w = softmax(pre);
    for (int j = 0; j < 8; ++j) {
      p.a.push_back(ua(rng));
      p.b.push_back(ub(rng));
    }
    const double x = ux(rng);
    EXPECT_NO_THROW({
      const auto r = dsf_forward(x, p);
      EXPECT_TRUE(std::isfinite(r.y));
      EXPECT_TRUE(std::isfinite(r.logdet));
    });
  }
}

#ifndef NAFKIT_NO_SATURATION_CLAMP
TEST(Dsf, ExtremeInputRaisesSaturationWithMagnitude) {
  try {
    dsf_forward(1e4, dsf({1.0}, {1.0}, {0.0}));
    FAIL() << "expected a saturation error";
  } catch (const SaturationError& e) {
    EXPECT_DOUBLE_EQ(e.magnitude(), 1e4);
  }
  EXPECT_THROW(dsf_forward(-1e4, dsf({0.5, 0.5}, {1.0, 2.0}, {0.0, 1.0})), SaturationError);
}

TEST(Ddsf, ExtremeInputRaisesSaturationWithLayer) {
  const std::vector<DdsfLayerParams> p{DdsfLayerParams::identity(1, 3), DdsfLayerParams::identity(3, 1)};
  try {
    ddsf_forward(-1e4, p);
    FAIL() << "expected a saturation error";
  } catch (const SaturationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}
#endif

TEST(Ddsf, IdentityLayersGiveIdentity) {
  const std::vector<DdsfLayerParams> one{DdsfLayerParams::identity(1, 1)};
  const std::vector<DdsfLayerParams> two{DdsfLayerParams::identity(1, 1), DdsfLayerParams::identity(1, 1)};
  const std::vector<DdsfLayerParams> wide{DdsfLayerParams::identity(1, 16), DdsfLayerParams::identity(16, 1)};
  for (double x : {-2.0, 0.0, 0.4, 3.0}) {
    for (const auto* p : {&one, &two, &wide}) {
      const auto r = ddsf_forward(x, *p);
      EXPECT_NEAR(r.y, x, 1e-5);
      EXPECT_NEAR(r.logdet, 0.0, 1e-5);
    }
  }
}

TEST(Ddsf, SingleLayerMatchesDsf) {
  DdsfLayerParams p = DdsfLayerParams::identity(1, 1);
  p.a = {1.7};
  p.b = {-0.4};
  const auto a = ddsf_forward(0.9, std::vector<DdsfLayerParams>{p});
  const auto b = dsf_forward(0.9, dsf({1.0}, {1.7}, {-0.4}));
  EXPECT_NEAR(a.y, b.y, 1e-12);
  EXPECT_NEAR(a.logdet, b.logdet, 1e-12);
}

TEST(Ddsf, NarrowTwoLayerAgainstFiniteDifferences) {
  std::mt19937_64 rng(20260);
  const ScalarTransformer st = nafkit::testing::random_transformer(TransformerKind::kDdsf, rng, 2, 2);
  ASSERT_EQ(st.ddsf.size(), 2u);
  EXPECT_EQ(st.ddsf[0].out, 2u);
  const double fd = nafkit::testing::central_diff([&](double x) { return ddsf_output(x, st.ddsf); }, 0.3);
  EXPECT_NEAR(ddsf_forward(0.3, st.ddsf).logdet, std::log(fd), 1e-5);
}

TEST(Ddsf, WidthMismatchIsDomainError) {
  const std::vector<DdsfLayerParams> p{DdsfLayerParams::identity(1, 3), DdsfLayerParams::identity(2, 1)};
  EXPECT_THROW(ddsf_forward(0.0, p), DomainError);
  EXPECT_THROW(ddsf_widths(4, 0), DomainError);
  EXPECT_EQ(ddsf_widths(4, 3), (std::vector<std::size_t>{1, 4, 4, 1}));
}

TEST(Invert, Examples) {
  const DsfParams id = DsfParams::identity(16);
  EXPECT_NEAR(invert(0.37, [&](double x) { return dsf_output(x, id); }), 0.37, 1e-10);
  EXPECT_NEAR(invert(5.0, [](double x) { return affine_forward(x, {1.0, std::log(2.0)}, AffineKind::kExp).y; }), 2.0,
              1e-10);
  const DsfParams p = dsf({0.5, 0.5}, {2.0, 1.0}, {0.0, 0.0});
  EXPECT_NEAR(invert(0.0, [&](double x) { return dsf_output(x, p); }), 0.0, 1e-10);
}

TEST(Invert, BracketExpandsFromAFarHint) {
  auto f = [](double x) { return 3.0 * x - 7.0; };
  EXPECT_NEAR(invert(1e5, f, {-1.0, 1.0}), (1e5 + 7.0) / 3.0, 1e-7);
  EXPECT_NEAR(invert(-2e5, f, {100.0, 101.0}), (-2e5 + 7.0) / 3.0, 1e-7);
}

TEST(Invert, UnreachableValueIsRangeError) {
  auto bounded = [](double x) { return std::tanh(x); };
  EXPECT_THROW(invert(2.0, bounded), RangeError);
  EXPECT_THROW(invert(NAN, bounded), RangeError);
}

TEST(Invert, RoundTripAllKinds) {
  for (TransformerKind k : nafkit::testing::all_kinds()) {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> ux(-4.0, 4.0);
    for (int t = 0; t < 1000; ++t) {
      const ScalarTransformer st = nafkit::testing::random_transformer(k, rng);
      const double x = ux(rng);
      const double y = st(x);
      ASSERT_NEAR(invert(y, std::cref(st), {y - 1.0, y + 1.0}), x, 1e-8) << kind_name(k) << " t=" << t;
    }
  }
}

TEST(CheckMonotone, Examples) {
  const DsfParams id = DsfParams::identity(4);
  auto f = [&](double x) { return dsf_output(x, id); };
  EXPECT_TRUE(check_monotone(f, std::vector<double>{-3.0, 0.0, 3.0}));
  DsfParams bad = dsf({0.5, 0.5}, {1.0, -3.0}, {0.0, 0.0});
  EXPECT_FALSE(check_monotone([&](double x) { return dsf_output(x, bad); }, grid(-5.0, 5.0, 201)));
  EXPECT_THROW(check_monotone(f, std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(check_monotone(f, std::vector<double>{1.0, 0.0}), DomainError);
}

TEST(CheckMonotone, RandomValidParametersAllKinds) {
  const auto g = grid(-5.0, 5.0, 201);
  for (TransformerKind k : nafkit::testing::all_kinds()) {
    std::mt19937_64 rng(34);
    for (int t = 0; t < 1000; ++t) {
      const ScalarTransformer st = nafkit::testing::random_transformer(k, rng);
      ASSERT_TRUE(check_monotone(std::cref(st), g)) << kind_name(k) << " seed index " << t;
    }
  }
}

TEST(Logdet, MatchesFiniteDifferencesAllKinds) {
  const auto xs = grid(-3.0, 3.0, 13);
  for (TransformerKind k : nafkit::testing::all_kinds()) {
    std::mt19937_64 rng(35);
    for (int t = 0; t < 100; ++t) {
      const ScalarTransformer st = nafkit::testing::random_transformer(k, rng);
      for (double x : xs) {
        const double fd = nafkit::testing::central_diff(std::cref(st), x);
        ASSERT_LE(std::abs(std::exp(st.forward(x).logdet) - fd) / fd, 1e-4) << kind_name(k) << " x=" << x;
      }
    }
  }
}

TEST(Logdet, IdentityPseudoParametersAreExact) {
  for (double x : grid(-3.0, 3.0, 25)) {
    const auto a = dsf_forward(x, DsfParams::identity(16));
    EXPECT_NEAR(a.y, x, 1e-5);
    EXPECT_NEAR(a.logdet, 0.0, 1e-5);
    const std::vector<DdsfLayerParams> p{DdsfLayerParams::identity(1, 16), DdsfLayerParams::identity(16, 1)};
    const auto b = ddsf_forward(x, p);
    EXPECT_NEAR(b.y, x, 1e-5);
    EXPECT_NEAR(b.logdet, 0.0, 1e-5);
  }
}

TEST(Kinds, NamesRoundTrip) {
  for (TransformerKind k : nafkit::testing::all_kinds()) EXPECT_EQ(parse_kind(kind_name(k)), k);
  EXPECT_EQ(parse_kind("affine"), TransformerKind::kAffineExp);
  EXPECT_THROW(parse_kind("relu"), DomainError);
}
