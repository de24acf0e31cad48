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

#include "selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "nafkit/nafkit.hpp"
#include "nafkit/testing.hpp"

using namespace nafkit;

namespace {

struct Row {
  std::string suite;
  std::string property;
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// ---- stablemath: closed-form identities at extreme arguments

void suite_stablemath(std::uint64_t seed, std::vector<Row>& rows) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-800.0, 800.0);
  double worst_sig = 0.0, worst_sp = 0.0, worst_lse = 0.0;
  bool finite = true;
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng);
    // logsigmoid(x) - logsigmoid(-x) = x
    worst_sig = std::max(worst_sig, std::abs(logsigmoid(x) - logsigmoid(-x) - x) / std::max(1.0, std::abs(x)));
    // softplus(x) - softplus(-x) = x, delta cancels
    worst_sp = std::max(worst_sp, std::abs(softplus(x) - softplus(-x) - x) / std::max(1.0, std::abs(x)));
    const std::vector<double> v{x, x - 1.0, x + 2.0};
    const double ref = x + 2.0 + std::log1p(std::exp(-2.0) + std::exp(-3.0));
    worst_lse = std::max(worst_lse, std::abs(logsumexp(v) - ref) / std::max(1.0, std::abs(ref)));
    finite = finite && std::isfinite(logsigmoid(x)) && std::isfinite(softplus(x));
  }
  rows.push_back({"stablemath", "logsigmoid(x) - logsigmoid(-x) = x on [-800, 800]", worst_sig < 1e-12,
                  fmt("max rel err %.3g", worst_sig)});
  rows.push_back({"stablemath", "softplus(x) - softplus(-x) = x", worst_sp < 1e-12, fmt("max rel err %.3g", worst_sp)});
  rows.push_back({"stablemath", "logsumexp shift identity", worst_lse < 1e-12, fmt("max rel err %.3g", worst_lse)});
  rows.push_back({"stablemath", "no overflow at |x| <= 800", finite, finite ? "finite" : "non-finite value"});
  const double lse_inf = logsumexp(std::vector<double>{kNegInf, kNegInf});
  rows.push_back({"stablemath", "logsumexp of all -inf is -inf", lse_inf == kNegInf, fmt("%.3g", lse_inf)});
  const double sp0 = softplus(-1e6);
  rows.push_back({"stablemath", "softplus floor is the delta", std::abs(sp0 - kSoftplusDelta) < 1e-18,
                  fmt("softplus(-1e6) = %.6g", sp0)});
}

// ---- monotone: strict increase of random transformers

std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

void suite_monotone(std::uint64_t seed, std::vector<Row>& rows) {
  const auto g = grid(-5.0, 5.0, 201);
  for (TransformerKind k : testing::all_kinds()) {
    std::mt19937_64 rng(seed);
    std::size_t bad = 0;
    for (int i = 0; i < 250; ++i) {
      const ScalarTransformer st = testing::random_transformer(k, rng);
      if (!check_monotone(std::cref(st), g)) ++bad;
    }
    rows.push_back({"monotone", std::string(kind_name(k)) + " strictly increasing on [-5, 5]", bad == 0,
                    fmt("%.0f / 250 violations", static_cast<double>(bad))});
  }
}

// ---- logdet: exp(logdet) vs central differences, and the saturation guard

void suite_logdet(std::uint64_t seed, std::vector<Row>& rows) {
  const auto xs = grid(-3.0, 3.0, 7);
  for (TransformerKind k : testing::all_kinds()) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const ScalarTransformer st = testing::random_transformer(k, rng);
      for (double x : xs) {
        const double fd = testing::central_diff(std::cref(st), x);
        const double an = std::exp(st.forward(x).logdet);
        worst = std::max(worst, std::abs(an - fd) / std::abs(fd));
      }
    }
    rows.push_back({"logdet", std::string(kind_name(k)) + " exp(logdet) matches finite differences", worst <= 1e-4,
                    fmt("max rel err %.3g", worst)});
  }
  // Extreme inputs must either raise a saturation error or give a finite
  // log-det; a silent -inf/NaN is the failure mode the guard exists for.
  std::size_t silent = 0, raised = 0;
  for (double x : {-1e4, -2e3, 2e3, 1e4}) {
    for (TransformerKind k : {TransformerKind::kDsf, TransformerKind::kDdsf}) {
      std::mt19937_64 rng(seed);
      const ScalarTransformer st = testing::random_transformer(k, rng);
      try {
        if (!std::isfinite(st.forward(x).logdet)) ++silent;
      } catch (const SaturationError&) {
        ++raised;
      }
    }
  }
  rows.push_back({"logdet", "extreme |x| is reported, never a silent non-finite log-det", silent == 0,
                  fmt("%.0f silent non-finite, %.0f saturation errors", static_cast<double>(silent),
                      static_cast<double>(raised))});
}

// ---- gradients: autodiff vs central differences on small stacks

void suite_gradients(std::uint64_t seed, std::vector<Row>& rows) {
  std::mt19937_64 rng(seed);
  for (TransformerKind k : testing::all_kinds()) {
    TransformerSpec spec{k, 4, 2};
    FlowStack stack = FlowStack::uniform_spec(2, spec, 2, {8});
    stack.identity_init(rng);
    testing::jitter_parameters(stack, rng, 0.3);
    Tensor batch(Shape{6, 2});
    std::normal_distribution<double> nd(0.0, 1.5);
    for (double& v : batch.data) v = nd(rng);
    const double err = check_gradients([&](Graph& g) { return mle_loss(g, stack, batch); }, stack.parameters(), 1e-6);
    rows.push_back({"gradients", std::string(kind_name(k)) + " mle_loss parameter gradients", err <= 1e-3,
                    fmt("max rel err %.3g", err)});
  }
  TransformerSpec spec{TransformerKind::kDsf, 4, 1};
  FlowStack stack = FlowStack::uniform_spec(2, spec, 1, {8});
  stack.identity_init(rng);
  testing::jitter_parameters(stack, rng, 0.3);
  const TargetSpec target = four_mode_energy();
  Tensor noise(Shape{6, 2});
  std::normal_distribution<double> nd(0.0, 1.0);
  for (double& v : noise.data) v = nd(rng);
  const double err = check_gradients([&](Graph& g) { return energy_loss_frozen(g, stack, target, noise); },
                                     stack.parameters(), 1e-6);
  rows.push_back({"gradients", "dsf energy_loss (frozen noise) parameter gradients", err <= 1e-3,
                  fmt("max rel err %.3g", err)});
}

// ---- roundtrip: invert(forward(x)) = x

void suite_roundtrip(std::uint64_t seed, std::vector<Row>& rows) {
  for (TransformerKind k : testing::all_kinds()) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-4.0, 4.0);
    double worst = 0.0;
    for (int i = 0; i < 250; ++i) {
      const ScalarTransformer st = testing::random_transformer(k, rng);
      const double x = ux(rng);
      const double y = st(x);
      worst = std::max(worst, std::abs(invert(y, std::cref(st), {y - 1.0, y + 1.0}) - x));
    }
    rows.push_back({"roundtrip", std::string(kind_name(k)) + " scalar inverse", worst <= 1e-8,
                    fmt("max |x - inv(f(x))| %.3g", worst)});
  }
  std::mt19937_64 rng(seed);
  FlowStack stack = FlowStack::uniform_spec(2, TransformerSpec{TransformerKind::kDsf, 8, 1}, 2, {16});
  stack.identity_init(rng);
  testing::jitter_parameters(stack, rng, 0.2);
  const Tensor x = stack.sample(200, seed);
  Graph g;
  const Tensor z = stack.forward(g, g.constant(x)).y.data();
  const Tensor back = stack.inverse(z);
  double worst = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - x.data[i]));
  for (double lp : stack.log_density(x)) finite = finite && std::isfinite(lp);
  rows.push_back({"roundtrip", "2-layer dsf stack inverse(forward(x)) = x", worst <= 1e-8,
                  fmt("max err %.3g", worst)});
  rows.push_back({"roundtrip", "sample -> log-density finite", finite, finite ? "200 samples" : "non-finite"});
}

// ---- lemma1: step construction certificate

void suite_lemma1(std::uint64_t seed, std::vector<Row>& rows) {
  const double e6 = certify(identity_target(), build_step_approx(identity_target(), 6), 10000);
  rows.push_back({"lemma1", "identity, n = 6: error <= 1/7", e6 <= 1.0 / 7.0 + 1e-9, fmt("error %.6g", e6)});
  std::size_t bad = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const MonotoneTarget target = random_sigmoid_target(seed + t);
    for (std::size_t n : {1, 4, 9, 19, 49}) {
      const double err = certify(target, build_step_approx(target, n), 2001);
      worst_ratio = std::max(worst_ratio, err / step_bound(n));
      if (err > step_bound(n) + 1e-9) ++bad;
    }
  }
  rows.push_back({"lemma1", "20 random targets, n in {1,4,9,19,49}: error <= 1/(n+1)", bad == 0,
                  fmt("worst error / bound %.4f", worst_ratio)});
  std::size_t not_simplex = 0;
  for (std::size_t n : {1, 6, 49}) {
    const StepApprox s = build_step_approx(truncated_normal_target(), n);
    double sum = 0.0;
    for (double w : s.w) {
      sum += w;
      if (!(w > 0.0)) ++not_simplex;
    }
    if (std::abs(sum - 1.0) > 1e-12) ++not_simplex;
  }
  rows.push_back({"lemma1", "step weights lie on the simplex", not_simplex == 0, "n in {1, 6, 49}"});
}

struct Suite {
  const char* name;
  void (*run)(std::uint64_t, std::vector<Row>&);
};

const std::vector<Suite>& suites() {
  static const std::vector<Suite> s{{"stablemath", suite_stablemath}, {"monotone", suite_monotone},
                                    {"logdet", suite_logdet},         {"gradients", suite_gradients},
                                    {"roundtrip", suite_roundtrip},   {"lemma1", suite_lemma1}};
  return s;
}

}  // namespace

std::string selftest_suite_listing() {
  std::string s;
  for (const auto& x : suites()) s += (s.empty() ? "" : " | ") + std::string(x.name);
  return s;
}

int run_selftest(const std::string& suite, std::uint64_t seed, std::ostream& out) {
  std::vector<Row> rows;
  bool found = false;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& s : suites()) {
    if (suite != "all" && suite != s.name) continue;
    found = true;
    try {
      s.run(seed, rows);
    } catch (const std::exception& e) {
      rows.push_back({s.name, "suite completed", false, e.what()});
    }
  }
  if (!found) {
    out << "unknown suite '" << suite << "' (all | " << selftest_suite_listing() << ")\n";
    return 2;
  }
  std::size_t failed = 0;
  char line[512];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-4s  %-11s %-62s %s\n", r.pass ? "PASS" : "FAIL", r.suite.c_str(),
                  r.property.c_str(), r.detail.c_str());
    out << line;
    if (!r.pass) ++failed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::snprintf(line, sizeof line, "%zu passed, %zu failed (seed %llu, %.1f s)\n", rows.size() - failed, failed,
                static_cast<unsigned long long>(seed), secs);
  out << line;
  if (failed)
    for (const auto& r : rows)
      if (!r.pass) out << "failed: " << r.suite << ": " << r.property << " (seed " << seed << ")\n";
  return failed ? 4 : 0;
}
