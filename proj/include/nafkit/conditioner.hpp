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

// Masked autoregressive conditioner. One dense pass maps x (B x m) to the
// pseudo-parameter blocks of all m dimensions, laid out as B x (m * width)
// with block j occupying columns [j * width, (j + 1) * width).

#ifndef NAFKIT_CONDITIONER_HPP
#define NAFKIT_CONDITIONER_HPP

#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nafkit/diffgraph.hpp"
#include "nafkit/errors.hpp"
#include "nafkit/stablemath.hpp"
#include "nafkit/tensor.hpp"

namespace nafkit {

/// Degrees and 0/1 masks. masks[0] is m x H1, masks[l] is H_l x H_{l+1},
/// masks.back() is H_last x m (one column per output dimension; expanded to
/// the block width by the conditioner).
struct MaskSet {
  std::vector<std::size_t> order;
  std::vector<std::size_t> input_degrees;
  std::vector<std::vector<std::size_t>> hidden_degrees;
  std::vector<Tensor> masks;
};

/// Input j gets degree rank(j) + 1 under `order`; hidden units cycle through
/// 1..m-1. A hidden unit of degree k sees inputs of degree <= k and the
/// output of rank-r dimension sees hidden units of degree < r + 1.
inline MaskSet build_masks(std::size_t m, const std::vector<std::size_t>& hidden_sizes,
                           std::vector<std::size_t> order) {
  if (m == 0) throw DomainError("build_masks: m = 0");
  if (hidden_sizes.empty()) throw DomainError("build_masks: no hidden layer");
  for (std::size_t h : hidden_sizes)
    if (h == 0) throw DomainError("build_masks: hidden size 0");
  if (order.size() != m) throw DomainError("build_masks: order length != m");
  std::vector<bool> seen(m, false);
  for (std::size_t j : order) {
    if (j >= m || seen[j]) throw DomainError("build_masks: order is not a permutation");
    seen[j] = true;
  }

  MaskSet ms;
  ms.order = order;
  ms.input_degrees.resize(m);
  for (std::size_t r = 0; r < m; ++r) ms.input_degrees[order[r]] = r + 1;

  for (std::size_t h : hidden_sizes) {
    std::vector<std::size_t> deg(h);
    for (std::size_t k = 0; k < h; ++k) deg[k] = m > 1 ? (k % (m - 1)) + 1 : 1;
    ms.hidden_degrees.push_back(std::move(deg));
  }

  // A single dimension is unconditioned: nothing may feed its block.
  const bool connect = m > 1;
  auto make = [&](const std::vector<std::size_t>& from, const std::vector<std::size_t>& to, bool strict) {
    Tensor mask(Shape{from.size(), to.size()});
    if (!connect) return mask;
    for (std::size_t i = 0; i < from.size(); ++i)
      for (std::size_t k = 0; k < to.size(); ++k)
        mask.at(i, k) = (strict ? from[i] < to[k] : from[i] <= to[k]) ? 1.0 : 0.0;
    return mask;
  };
  ms.masks.push_back(make(ms.input_degrees, ms.hidden_degrees[0], false));
  for (std::size_t l = 1; l < ms.hidden_degrees.size(); ++l)
    ms.masks.push_back(make(ms.hidden_degrees[l - 1], ms.hidden_degrees[l], false));
  ms.masks.push_back(make(ms.hidden_degrees.back(), ms.input_degrees, true));
  return ms;
}

/// MADE with tanh hidden units. Statistical parameters are heap-held so that
/// ParameterList pointers survive moves of the owning model.
class MadeConditioner {
 public:
  MadeConditioner(std::size_t m, std::vector<std::size_t> hidden, std::size_t block_width,
                  std::vector<std::size_t> order, const std::string& prefix = "made")
      : m_(m), width_(block_width), hidden_(std::move(hidden)), shift_(Shape{m * block_width}) {
    if (block_width == 0) throw DomainError("MadeConditioner: zero block width");
    masks_ = build_masks(m, hidden_, std::move(order));
    // Expand the per-dimension output mask to whole blocks.
    Tensor& last = masks_.masks.back();
    Tensor expanded(Shape{last.shape[0], m * width_});
    for (std::size_t k = 0; k < last.shape[0]; ++k)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t p = 0; p < width_; ++p) expanded.at(k, j * width_ + p) = last.at(k, j);
    last = std::move(expanded);

    std::size_t in = m;
    for (std::size_t l = 0; l <= hidden_.size(); ++l) {
      const std::size_t out = l < hidden_.size() ? hidden_[l] : m * width_;
      weights_.push_back(std::make_unique<Parameter>(prefix + ".w" + std::to_string(l), Tensor(Shape{in, out})));
      biases_.push_back(std::make_unique<Parameter>(prefix + ".b" + std::to_string(l), Tensor(Shape{out})));
      in = out;
    }
  }

  std::size_t dim() const { return m_; }
  std::size_t block_width() const { return width_; }
  const std::vector<std::size_t>& hidden_sizes() const { return hidden_; }
  const std::vector<std::size_t>& order() const { return masks_.order; }
  const MaskSet& masks() const { return masks_; }

  /// Constant added to the raw outputs (not trainable), e.g. softplus^{-1}(1)
  /// on softness slots.
  const Tensor& output_shift() const { return shift_; }
  void set_output_shift(Tensor shift) {
    if (shift.size() != m_ * width_) throw DomainError("set_output_shift: size mismatch");
    shift_ = std::move(shift);
    shift_.shape = Shape{m_ * width_};
  }

  Parameter& weight(std::size_t l) const { return *weights_.at(l); }
  Parameter& bias(std::size_t l) const { return *biases_.at(l); }
  std::size_t layer_count() const { return weights_.size(); }

  ParameterList parameters() const {
    ParameterList list;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      list.add(*weights_[l]);
      list.add(*biases_[l]);
    }
    return list;
  }

  /// x: B x m  ->  B x (m * width).
  Value forward(Graph& g, Value x) const {
    const Shape& s = x.shape();
    if (s.size() != 2 || s[1] != m_) throw DomainError("conditioner: input shape " + shape_str(s));
    Value h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Value w = g.param(*weights_[l]) * g.constant(masks_.masks[l]);
      h = matmul(h, w) + g.param(*biases_[l]);
      if (l + 1 < weights_.size()) h = tanh(h);
    }
    return h + g.constant(shift_);
  }

 private:
  std::size_t m_;
  std::size_t width_;
  std::vector<std::size_t> hidden_;
  MaskSet masks_;
  Tensor shift_;
  std::vector<std::unique_ptr<Parameter>> weights_;
  std::vector<std::unique_ptr<Parameter>> biases_;
};

/// Evaluates the conditioner on one point; returns an m x width tensor of
/// pseudo-parameter blocks (row j is the block for dimension j).
inline Tensor conditioner_forward(std::span<const double> x, const MadeConditioner& made) {
  if (x.size() != made.dim()) throw DomainError("conditioner_forward: input length != m");
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("conditioner_forward: non-finite input");
  Graph g;
  Value out = made.forward(g, g.constant(Tensor(Shape{1, x.size()}, std::vector<double>(x.begin(), x.end()))));
  return Tensor(Shape{made.dim(), made.block_width()}, out.data().data);
}

/// Conditional normalized weight exponentiation: row-wise softmax of
/// (v + eta broadcast over rows). v is rows x cols, eta has length cols.
inline Tensor apply_cwn(const Tensor& v, std::span<const double> eta) {
  if (v.rank() != 2 || eta.size() != v.shape[1]) throw DomainError("apply_cwn: eta length != columns");
  const std::size_t rows = v.shape[0], cols = v.shape[1];
  Tensor u(v.shape);
  std::vector<double> row(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) row[j] = v.at(i, j) + eta[j];
    const auto sm = softmax(row);
    for (std::size_t j = 0; j < cols; ++j) u.at(i, j) = sm[j];
  }
  return u;
}

/// All weights ~ Uniform(-0.001, 0.001); hidden biases zero. Output biases
/// are drawn from Uniform(-bias_spread, bias_spread): with exact zeros the d
/// units of an unconditioned dimension (the first in the order, or every
/// dimension when m = 1) receive identical gradients forever. Pass 0 for
/// exactly zero output biases. Combined with the softness shift this makes
/// the induced flow a near-identity.
template <typename Rng>
void identity_init(const MadeConditioner& made, Rng& rng, double bias_spread = 1e-3) {
  std::uniform_real_distribution<double> unif(-0.001, 0.001);
  const std::size_t last = made.layer_count() - 1;
  for (std::size_t l = 0; l < made.layer_count(); ++l) {
    for (double& w : made.weight(l).value.data) w = unif(rng);
    auto& b = made.bias(l).value.data;
    if (l == last && bias_spread > 0.0) {
      std::uniform_real_distribution<double> spread(-bias_spread, bias_spread);
      for (double& v : b) v = spread(rng);
    } else {
      std::fill(b.begin(), b.end(), 0.0);
    }
  }
}

}  // namespace nafkit

#endif  // NAFKIT_CONDITIONER_HPP
