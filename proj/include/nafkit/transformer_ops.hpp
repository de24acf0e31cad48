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

// Differentiable transformers over N independent rows. Inputs x have shape
// (N); pseudo-parameters are pre-activation (N, width) slices of conditioner
// output. Every multiplicative chain is formed in log space so that the
// log-derivative gradients come out of the graph directly.

#ifndef NAFKIT_TRANSFORMER_OPS_HPP
#define NAFKIT_TRANSFORMER_OPS_HPP

#include <cmath>
#include <cstdio>
#include <span>
#include <vector>

#include "nafkit/diffgraph.hpp"
#include "nafkit/transformer.hpp"

namespace nafkit::ops {

struct Transformed {
  Value y;       // (N)
  Value logdet;  // (N) log dy/dx per row
};

/// Throws SaturationError naming the first row whose pre-logit saturated.
inline void check_saturation_rows(Value x, Value log_d, Value log_1md, std::size_t layer = 0) {
#ifndef NAFKIT_NO_SATURATION_CLAMP
  const auto& a = log_d.data().data;
  const auto& b = log_1md.data().data;
  const std::size_t width = log_d.shape().size() > 1 ? log_d.shape().back() : 1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= kLogSaturation) || !(b[i] >= kLogSaturation)) {
      const std::size_t row = i / width;
      const double mag = std::abs(x.data().data[row]);
      char buf[128];
      if (layer)
        std::snprintf(buf, sizeof buf, "pre-logit saturated in layer %zu at |x| = %.6g", layer, mag);
      else
        std::snprintf(buf, sizeof buf, "pre-logit saturated at |x| = %.6g", mag);
      throw SaturationError(buf, mag, row);
    }
  }
#else
  (void)x, (void)log_d, (void)log_1md, (void)layer;
#endif
}

inline Transformed affine_exp(Value x, Value mu, Value s) { return {mu + exp(s) * x, s}; }

inline Transformed affine_gate(Value x, Value mu, Value s) {
  Value g = sigmoid(s);
  return {g * x + (1.0 - g) * mu, logsigmoid(s)};
}

/// DSF with w = softmax(w_pre), a = softplus(a_pre); all (N, d).
inline Transformed dsf(Value x, Value w_pre, Value a_pre, Value b) {
  Value log_w = logsoftmax_last(w_pre);
  Value a = softplus(a_pre);
  Value c = a * unsqueeze_last(x) + b;
  Value ls = logsigmoid(c);
  Value lsn = logsigmoid(-c);
  Value log_d = logsumexp_last(log_w + ls);
  Value log_1md = logsumexp_last(log_w + lsn);
  check_saturation_rows(x, log_d, log_1md);
  Value y = log_d - log_1md;
  Value logdet = logsumexp_last(log_w + log(a) + ls + lsn) - log_d - log_1md;
  return {y, logdet};
}

/// One DDSF layer's inputs. eta_u (N, in), eta_w (N, out), a_pre and b
/// (N, out) come from the conditioner; v_u (out, in) and v_w (out, out) are
/// statistical parameters.
struct DdsfLayerInputs {
  Value eta_u;
  Value eta_w;
  Value a_pre;
  Value b;
  Value v_u;
  Value v_w;
};

/// h (N, in) and g = log dh/dx (N, in) are pushed through each layer:
///   log u = logsoftmax(v_u + eta_u),   log w = logsoftmax(v_w + eta_w)
///   C = a * (u . h) + b,   h' = log D - log(1 - D)
///   g' = -log D - log(1-D) + lse_k(log w_ik + log a_k + ls(C_k) + ls(-C_k) + lse_j(log u_kj + g_j))
inline Transformed ddsf(Value x, std::span<const DdsfLayerInputs> layers) {
  Graph& gr = x.graph();
  const std::size_t n = x.shape().at(0);
  Value h = unsqueeze_last(x);
  Value g = gr.constant(Tensor(Shape{n, 1}, 0.0));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DdsfLayerInputs& p = layers[l];
    Value log_u = logsoftmax_last(p.v_u + unsqueeze_middle(p.eta_u));  // (N, out, in)
    Value log_w = logsoftmax_last(p.v_w + unsqueeze_middle(p.eta_w));  // (N, out, out)
    Value uh = sum_last(exp(log_u) * unsqueeze_middle(h));             // (N, out)
    Value a = softplus(p.a_pre);
    Value c = a * uh + p.b;
    Value ls = logsigmoid(c);
    Value lsn = logsigmoid(-c);
    Value log_d = logsumexp_last(log_w + unsqueeze_middle(ls));
    Value log_1md = logsumexp_last(log_w + unsqueeze_middle(lsn));
    check_saturation_rows(x, log_d, log_1md, l + 1);
    Value inner = logsumexp_last(log_u + unsqueeze_middle(g));  // (N, out)
    Value slope = log(a) + ls + lsn + inner;
    g = logsumexp_last(log_w + unsqueeze_middle(slope)) - log_d - log_1md;
    h = log_d - log_1md;
  }
  const Shape flat{n};
  return {reshape(h, flat), reshape(g, flat)};
}

}  // namespace nafkit::ops

#endif  // NAFKIT_TRANSFORMER_OPS_HPP
