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

// Random valid parameterizations and finite-difference helpers shared by the
// self-test suites and the test binaries.

#ifndef NAFKIT_TESTING_HPP
#define NAFKIT_TESTING_HPP

#include <cmath>
#include <random>
#include <vector>

#include "nafkit/flow.hpp"
#include "nafkit/transformer.hpp"

namespace nafkit::testing {

inline std::vector<TransformerKind> all_kinds() {
  return {TransformerKind::kAffineExp, TransformerKind::kAffineGate, TransformerKind::kDsf, TransformerKind::kDdsf};
}

/// Pre-activations drawn from N(0, 1) (biases and affine shifts N(0, 2)),
/// then activated exactly as the conditioner output would be.
inline ScalarTransformer random_transformer(TransformerKind kind, std::mt19937_64& rng, std::size_t d = 16,
                                            std::size_t layers = 2) {
  std::normal_distribution<double> n1(0.0, 1.0), n2(0.0, 2.0);
  auto draw = [&](std::size_t k, std::normal_distribution<double>& nd) {
    std::vector<double> v(k);
    for (double& x : v) x = nd(rng);
    return v;
  };
  ScalarTransformer st;
  st.kind = kind;
  switch (kind) {
    case TransformerKind::kAffineExp:
    case TransformerKind::kAffineGate:
      st.affine = {n2(rng), n1(rng)};
      break;
    case TransformerKind::kDsf:
      st.dsf = DsfParams::from_pre(draw(d, n1), draw(d, n1), draw(d, n2));
      break;
    case TransformerKind::kDdsf: {
      const auto widths = ddsf_widths(d, layers);
      for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        DdsfLayerParams p;
        p.in = in;
        p.out = out;
        p.u = Tensor(Shape{out, in});
        p.w = Tensor(Shape{out, out});
        for (std::size_t i = 0; i < out; ++i) {
          const auto u = softmax(draw(in, n1));
          const auto w = softmax(draw(out, n1));
          for (std::size_t j = 0; j < in; ++j) p.u.at(i, j) = u[j];
          for (std::size_t j = 0; j < out; ++j) p.w.at(i, j) = w[j];
        }
        for (double v : draw(out, n1)) p.a.push_back(softplus(v));
        p.b = draw(out, n2);
        st.ddsf.push_back(std::move(p));
      }
      break;
    }
  }
  return st;
}

/// Central difference of a scalar map.
template <typename F>
double central_diff(const F& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Perturbs every statistical parameter by N(0, scale) so that a stack
/// leaves the near-identity regime.
inline void jitter_parameters(const FlowStack& stack, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  const ParameterList params = stack.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    for (double& v : params[i].value.data) v += nd(rng);
}

/// Numeric Jacobian dy/dx of one flow layer at a single point (m x m,
/// entry (i, j) = dy_i / dx_j).
inline Tensor layer_jacobian(const FlowLayer& layer, const std::vector<double>& x, double h = 1e-6) {
  const std::size_t m = x.size();
  auto eval = [&](const std::vector<double>& p) {
    Graph g;
    return layer.forward(g, g.constant(Tensor(Shape{1, m}, p))).y.data().data;
  };
  Tensor jac(Shape{m, m});
  for (std::size_t j = 0; j < m; ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const auto yp = eval(xp), ym = eval(xm);
    for (std::size_t i = 0; i < m; ++i) jac.at(i, j) = (yp[i] - ym[i]) / (2.0 * h);
  }
  return jac;
}

}  // namespace nafkit::testing

#endif  // NAFKIT_TESTING_HPP
