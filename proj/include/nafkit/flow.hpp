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

// Autoregressive flow layers (conditioner + transformer) and stacks of them.
//
// A stack is a single map f evaluated in one direction only: forward() is
// used both to map data to noise (density estimation, log_density) and to
// map noise to samples (energy fitting, transform_noise). The inverse is
// computed numerically, dimension by dimension, for sampling.

#ifndef NAFKIT_FLOW_HPP
#define NAFKIT_FLOW_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nafkit/conditioner.hpp"
#include "nafkit/diffgraph.hpp"
#include "nafkit/parallel.hpp"
#include "nafkit/transformer.hpp"
#include "nafkit/transformer_ops.hpp"

namespace nafkit {

struct TransformerSpec {
  TransformerKind kind = TransformerKind::kDsf;
  std::size_t d = 16;       // hidden sigmoid units (DSF, DDSF)
  std::size_t layers = 2;   // DDSF depth L
};

/// Offsets of one DDSF layer's pseudo-parameters inside a block.
struct DdsfSlots {
  std::size_t in, out;
  std::size_t eta_u, eta_w, a, b;
};

inline std::vector<DdsfSlots> ddsf_slots(const TransformerSpec& spec) {
  const auto widths = ddsf_widths(spec.d, spec.layers);
  std::vector<DdsfSlots> slots;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    DdsfSlots s{widths[l], widths[l + 1], 0, 0, 0, 0};
    s.eta_u = off;
    s.eta_w = s.eta_u + s.in;
    s.a = s.eta_w + s.out;
    s.b = s.a + s.out;
    off = s.b + s.out;
    slots.push_back(s);
  }
  return slots;
}

/// Pseudo-parameters per dimension. Affine: (mu, s). DSF: (w_pre, a_pre, b)
/// each of length d. DDSF: per layer (eta_u, eta_w, a_pre, b), i.e.
/// O(L d) rather than O(L d^2).
inline std::size_t block_width(const TransformerSpec& spec) {
  switch (spec.kind) {
    case TransformerKind::kAffineExp:
    case TransformerKind::kAffineGate:
      return 2;
    case TransformerKind::kDsf:
      return 3 * spec.d;
    case TransformerKind::kDdsf: {
      const auto s = ddsf_slots(spec).back();
      return s.b + s.out;
    }
  }
  return 0;
}

/// Constant pre-activation shift within one block: softplus^{-1}(1) on the
/// softness slots of DSF/DDSF, kGateInitOffset on the gate.
inline std::vector<double> block_shift(const TransformerSpec& spec) {
  std::vector<double> shift(block_width(spec), 0.0);
  switch (spec.kind) {
    case TransformerKind::kAffineExp:
      break;
    case TransformerKind::kAffineGate:
      shift[1] = kGateInitOffset;
      break;
    case TransformerKind::kDsf:
      for (std::size_t j = 0; j < spec.d; ++j) shift[spec.d + j] = kSoftplusInvOne;
      break;
    case TransformerKind::kDdsf:
      for (const auto& s : ddsf_slots(spec))
        for (std::size_t j = 0; j < s.out; ++j) shift[s.a + j] = kSoftplusInvOne;
      break;
  }
  return shift;
}

/// A transformer with activated parameters for one (point, dimension).
struct ScalarTransformer {
  TransformerKind kind = TransformerKind::kDsf;
  AffineParams affine;
  DsfParams dsf;
  std::vector<DdsfLayerParams> ddsf;

  double operator()(double x) const {
    switch (kind) {
      case TransformerKind::kAffineExp: return affine_forward(x, affine, AffineKind::kExp).y;
      case TransformerKind::kAffineGate: return affine_forward(x, affine, AffineKind::kGate).y;
      case TransformerKind::kDsf: return dsf_output(x, dsf);
      case TransformerKind::kDdsf: return ddsf_output(x, ddsf);
    }
    return 0.0;
  }

  TransformResult forward(double x) const {
    switch (kind) {
      case TransformerKind::kAffineExp: return affine_forward(x, affine, AffineKind::kExp);
      case TransformerKind::kAffineGate: return affine_forward(x, affine, AffineKind::kGate);
      case TransformerKind::kDsf: return dsf_forward(x, dsf);
      case TransformerKind::kDdsf: return ddsf_forward(x, ddsf);
    }
    return {0.0, 0.0};
  }
};

struct LayerOutput {
  Value y;              // (B, m)
  Value logdet_per_dim; // (B, m)
  Value logdet;         // (B)
};

class FlowLayer {
 public:
  FlowLayer(std::size_t m, TransformerSpec spec, std::vector<std::size_t> order,
            std::vector<std::size_t> hidden, const std::string& prefix)
      : spec_(spec), made_(m, std::move(hidden), block_width(spec), std::move(order), prefix + ".made") {
    const auto shift = block_shift(spec_);
    Tensor full(Shape{m * shift.size()});
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < shift.size(); ++p) full[j * shift.size() + p] = shift[p];
    made_.set_output_shift(std::move(full));
    if (spec_.kind == TransformerKind::kDdsf) {
      std::size_t l = 0;
      for (const auto& s : ddsf_slots(spec_)) {
        v_u_.push_back(std::make_unique<Parameter>(prefix + ".ddsf.v_u" + std::to_string(l), Tensor(Shape{s.out, s.in})));
        v_w_.push_back(std::make_unique<Parameter>(prefix + ".ddsf.v_w" + std::to_string(l), Tensor(Shape{s.out, s.out})));
        ++l;
      }
    }
  }

  std::size_t dim() const { return made_.dim(); }
  const TransformerSpec& spec() const { return spec_; }
  const std::vector<std::size_t>& order() const { return made_.order(); }
  const MadeConditioner& conditioner() const { return made_; }

  ParameterList parameters() const {
    ParameterList list = made_.parameters();
    for (std::size_t l = 0; l < v_u_.size(); ++l) {
      list.add(*v_u_[l]);
      list.add(*v_w_[l]);
    }
    return list;
  }

  template <typename Rng>
  void identity_init(Rng& rng, double bias_spread = 1e-3) {
    nafkit::identity_init(made_, rng, bias_spread);
    for (auto* group : {&v_u_, &v_w_})
      for (auto& p : *group) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
  }

  /// Overwrites the DSF output biases so that, while the conditioner weights
  /// are near zero, every dimension starts as a staircase onto (lo, hi): one
  /// unit held on with weight sigmoid(lo), one held off with weight
  /// 1 - sigmoid(hi), and d - 2 equal steps of the given softness at
  /// `centers` (base-space coordinates).
  void staircase_init(double lo, double hi, std::span<const double> centers, double softness) {
    if (spec_.kind != TransformerKind::kDsf) throw DomainError("staircase init: only for dsf layers");
    const std::size_t d = spec_.d;
    if (d < 3) throw DomainError("staircase init: needs d >= 3");
    if (centers.size() != d - 2) throw DomainError("staircase init: need d - 2 centers");
    if (!(lo < hi) || !(softness > 0.0)) throw DomainError("staircase init: need lo < hi and softness > 0");
    auto a_pre = [](double a) { return std::log(std::expm1(a - kSoftplusDelta)) - kSoftplusInvOne; };
    const double w_on = sigmoid(lo), w_off = 1.0 - sigmoid(hi), w_step = (1.0 - w_on - w_off) / static_cast<double>(d - 2);
    const std::size_t width = made_.block_width();
    auto& bias = made_.bias(made_.layer_count() - 1).value.data;
    for (std::size_t j = 0; j < dim(); ++j) {
      double* blk = &bias[j * width];
      for (std::size_t k = 0; k < d; ++k) {
        const bool step = k >= 2;
        blk[k] = std::log(k == 0 ? w_on : k == 1 ? w_off : w_step);
        blk[d + k] = a_pre(step ? softness : 1.0);
        blk[2 * d + k] = step ? -softness * centers[k - 2] : k == 0 ? 50.0 : -50.0;
      }
    }
  }

  /// y_t = tau(c(x_{<t}), x_t) for every t in one conditioner pass.
  LayerOutput forward(Graph& g, Value x) const {
    const Shape& s = x.shape();
    const std::size_t b = s.at(0), m = dim(), n = b * m, width = made_.block_width();
    Value raw = reshape(made_.forward(g, x), Shape{n, width});
    Value xf = reshape(x, Shape{n});
    ops::Transformed t;
    try {
      switch (spec_.kind) {
        case TransformerKind::kAffineExp:
        case TransformerKind::kAffineGate: {
          Value mu = reshape(slice_last(raw, 0, 1), Shape{n});
          Value sp = reshape(slice_last(raw, 1, 2), Shape{n});
          t = spec_.kind == TransformerKind::kAffineExp ? ops::affine_exp(xf, mu, sp) : ops::affine_gate(xf, mu, sp);
          break;
        }
        case TransformerKind::kDsf: {
          const std::size_t d = spec_.d;
          t = ops::dsf(xf, slice_last(raw, 0, d), slice_last(raw, d, 2 * d), slice_last(raw, 2 * d, 3 * d));
          break;
        }
        case TransformerKind::kDdsf: {
          std::vector<ops::DdsfLayerInputs> in;
          std::size_t l = 0;
          for (const auto& sl : ddsf_slots(spec_)) {
            in.push_back({slice_last(raw, sl.eta_u, sl.eta_u + sl.in), slice_last(raw, sl.eta_w, sl.eta_w + sl.out),
                          slice_last(raw, sl.a, sl.a + sl.out), slice_last(raw, sl.b, sl.b + sl.out),
                          g.param(*v_u_[l]), g.param(*v_w_[l])});
            ++l;
          }
          t = ops::ddsf(xf, in);
          break;
        }
      }
    } catch (const SaturationError& e) {
      if (e.row() == SaturationError::kNoRow) throw;
      throw SaturationError(std::string(e.what()) + " (point " + std::to_string(e.row() / m) + ", dimension " +
                                std::to_string(e.row() % m) + ")",
                            e.magnitude(), e.row() / m);
    }
    Value per_dim = reshape(t.logdet, Shape{b, m});
    return {reshape(t.y, Shape{b, m}), per_dim, sum_last(per_dim)};
  }

  /// Activated scalar transformer from one pseudo-parameter block.
  ScalarTransformer scalar_transformer(std::span<const double> block) const {
    ScalarTransformer st;
    st.kind = spec_.kind;
    switch (spec_.kind) {
      case TransformerKind::kAffineExp:
      case TransformerKind::kAffineGate:
        st.affine = {block[0], block[1]};
        break;
      case TransformerKind::kDsf: {
        const std::size_t d = spec_.d;
        st.dsf = DsfParams::from_pre(block.subspan(0, d), block.subspan(d, d), block.subspan(2 * d, d));
        break;
      }
      case TransformerKind::kDdsf: {
        std::size_t l = 0;
        for (const auto& sl : ddsf_slots(spec_)) {
          DdsfLayerParams p;
          p.in = sl.in;
          p.out = sl.out;
          p.u = apply_cwn(v_u_[l]->value, block.subspan(sl.eta_u, sl.in));
          p.w = apply_cwn(v_w_[l]->value, block.subspan(sl.eta_w, sl.out));
          for (std::size_t j = 0; j < sl.out; ++j) {
            p.a.push_back(softplus(block[sl.a + j]));
            p.b.push_back(block[sl.b + j]);
          }
          st.ddsf.push_back(std::move(p));
          ++l;
        }
        break;
      }
    }
    return st;
  }

  /// Pseudo-parameter blocks for a batch, without gradient tracking.
  Tensor pseudo_params(const Tensor& x) const {
    Graph g;
    return made_.forward(g, g.constant(x)).data();
  }

  /// Solves forward(x) = y dimension by dimension in the layer's order; the
  /// conditioner sees only coordinates already recovered.
  Tensor inverse(const Tensor& y) const {
    const std::size_t b = y.shape.at(0), m = dim(), width = made_.block_width();
    Tensor x(Shape{b, m}, 0.0);
    for (std::size_t j : order()) {
      const Tensor params = pseudo_params(x);
      parallel_for(b, [&](std::size_t i) {
        const ScalarTransformer st =
            scalar_transformer(std::span<const double>(&params.data[(i * m + j) * width], width));
        const double target = y.at(i, j);
        x.at(i, j) = invert(target, std::cref(st), {target - 1.0, target + 1.0});
      });
    }
    return x;
  }

 private:
  TransformerSpec spec_;
  MadeConditioner made_;
  std::vector<std::unique_ptr<Parameter>> v_u_;
  std::vector<std::unique_ptr<Parameter>> v_w_;
};

enum class BaseKind { kStandardNormal, kUniform };

inline const char* base_name(BaseKind b) { return b == BaseKind::kUniform ? "uniform" : "normal"; }

inline BaseKind parse_base(const std::string& s) {
  if (s == "normal" || s == "standard-normal") return BaseKind::kStandardNormal;
  if (s == "uniform") return BaseKind::kUniform;
  throw DomainError("unknown base distribution '" + s + "' (normal, uniform)");
}

struct StackOutput {
  Value y;       // (B, m)
  Value logdet;  // (B)
};

struct NoiseOutput {
  Value y;       // (B, m)
  Value log_q;   // (B)
};

/// Layer i uses the identity order when i is even and the reversed order
/// when i is odd.
inline std::vector<std::size_t> layer_order(std::size_t m, std::size_t i) {
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = i % 2 == 0 ? j : m - 1 - j;
  return order;
}

class FlowStack {
 public:
  struct LayerConfig {
    TransformerSpec spec;
    std::vector<std::size_t> order;
  };

  FlowStack(std::size_t m, std::vector<LayerConfig> layers, std::vector<std::size_t> hidden = {64},
            BaseKind base = BaseKind::kStandardNormal)
      : m_(m), hidden_(std::move(hidden)), base_(base) {
    if (m == 0) throw DomainError("FlowStack: m = 0");
    if (layers.empty()) throw DomainError("FlowStack: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers_.emplace_back(m, layers[i].spec, layers[i].order, hidden_, "layer" + std::to_string(i));
  }

  /// n_layers layers of one transformer spec with alternating order.
  static FlowStack uniform_spec(std::size_t m, TransformerSpec spec, std::size_t n_layers,
                                std::vector<std::size_t> hidden = {64},
                                BaseKind base = BaseKind::kStandardNormal) {
    std::vector<LayerConfig> cfg;
    for (std::size_t i = 0; i < n_layers; ++i) cfg.push_back({spec, layer_order(m, i)});
    return FlowStack(m, std::move(cfg), std::move(hidden), base);
  }

  std::size_t dim() const { return m_; }
  BaseKind base() const { return base_; }
  const std::vector<std::size_t>& hidden_sizes() const { return hidden_; }
  const std::vector<FlowLayer>& layers() const { return layers_; }
  std::vector<FlowLayer>& layers() { return layers_; }

  ParameterList parameters() const {
    ParameterList list;
    for (const auto& l : layers_) list.append(l.parameters());
    return list;
  }

  template <typename Rng>
  void identity_init(Rng& rng, double bias_spread = 1e-3) {
    for (auto& l : layers_) l.identity_init(rng, bias_spread);
  }

  StackOutput forward(Graph& g, Value x) const {
    check_input(x.shape());
    Value y = x;
    Value total;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      LayerOutput out = layers_[i].forward(g, y);
      y = out.y;
      total = i == 0 ? out.logdet : total + out.logdet;
    }
    return {y, total};
  }

  /// log p_0(z) per row for z (B, m).
  Value base_log_prob(Graph& g, Value z) const {
    const std::size_t b = z.shape().at(0);
    if (base_ == BaseKind::kStandardNormal) {
      const double c = -0.5 * static_cast<double>(m_) * std::log(2.0 * std::numbers::pi);
      return sum_last(z * z) * -0.5 + c;
    }
    Tensor lp(Shape{b}, 0.0);
    const auto& zd = z.data().data;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < m_; ++j)
        if (!(zd[i * m_ + j] > 0.0 && zd[i * m_ + j] < 1.0)) lp[i] = kNegInf;
    return g.constant(std::move(lp));
  }

  /// log p(x) = log p_0(f(x)) + sum of layer log-dets; f maps data to noise.
  Value log_density(Graph& g, Value x) const {
    StackOutput out = forward(g, x);
    return base_log_prob(g, out.y) + out.logdet;
  }

  /// Evaluation without gradients, in chunks.
  std::vector<double> log_density(const Tensor& x, std::size_t chunk = 4096) const {
    check_input(x.shape);
    const std::size_t n = x.shape[0];
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t len = std::min(chunk, n - start);
      Tensor part(Shape{len, m_},
                  std::vector<double>(x.data.begin() + start * m_, x.data.begin() + (start + len) * m_));
      Graph g;
      Value lp = log_density(g, g.constant(std::move(part)));
      out.insert(out.end(), lp.data().data.begin(), lp.data().data.end());
    }
    return out;
  }

  /// y = f(x) and log q(y) = log p_X(x) - log|df/dx| for base draws x.
  NoiseOutput transform_noise(Graph& g, Value x) const {
    Value lp = base_log_prob(g, x);
    StackOutput out = forward(g, x);
    return {out.y, lp - out.logdet};
  }

  template <typename Rng>
  Tensor sample_base(std::size_t n, Rng& rng) const {
    Tensor z(Shape{n, m_});
    if (base_ == BaseKind::kStandardNormal) {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (double& v : z.data) v = nd(rng);
    } else {
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      for (double& v : z.data) {
        do v = ud(rng);
        while (v <= 0.0);
      }
    }
    return z;
  }

  /// f^{-1}(z): layer inverses in reverse order.
  Tensor inverse(const Tensor& z) const {
    check_input(z.shape);
    Tensor x = z;
    for (std::size_t i = layers_.size(); i-- > 0;) x = layers_[i].inverse(x);
    return x;
  }

  /// Draws base noise and maps it through f^{-1} (density-estimation mode).
  Tensor sample(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return inverse(sample_base(n, rng));
  }

 private:
  void check_input(const Shape& s) const {
    if (s.size() != 2 || s[1] != m_)
      throw DataError("flow: expected points of dimension " + std::to_string(m_) + ", got shape " + shape_str(s));
  }

  std::size_t m_;
  std::vector<std::size_t> hidden_;
  BaseKind base_;
  std::vector<FlowLayer> layers_;
};

}  // namespace nafkit

#endif  // NAFKIT_FLOW_HPP
