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

// Losses for both KL directions, Adam, and the two training loops.

#ifndef NAFKIT_TRAINING_HPP
#define NAFKIT_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nafkit/diffgraph.hpp"
#include "nafkit/errors.hpp"
#include "nafkit/flow.hpp"
#include "nafkit/targets.hpp"

namespace nafkit {

struct TrainConfig {
  std::string loss = "mle";  // mle | energy
  std::size_t steps = 1000;
  std::size_t batch = 256;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> grad_clip = 10.0;  // global L2 norm
  std::optional<double> polyak;            // EMA decay; off by default

  void validate() const {
    if (loss != "mle" && loss != "energy") throw DomainError("TrainConfig: loss must be mle or energy");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("TrainConfig: lr must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw DomainError("TrainConfig: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw DomainError("TrainConfig: eps must be positive");
    if (batch == 0) throw DomainError("TrainConfig: batch must be >= 1");
    if (grad_clip && !(*grad_clip > 0.0)) throw DomainError("TrainConfig: grad_clip must be positive");
    if (polyak && !(*polyak >= 0.0 && *polyak < 1.0)) throw DomainError("TrainConfig: polyak decay in [0, 1)");
  }
};

/// -(1/n) sum log p(x_i).
inline Value mle_loss(Graph& g, const FlowStack& stack, const Tensor& batch) {
  if (batch.rank() != 2 || batch.shape[0] == 0) throw DataError("mle_loss: empty batch");
  return -mean(stack.log_density(g, g.constant(batch)));
}

/// (1/n) sum [log p_X(x_i) - logdet_i - log p_target(f(x_i))] on given noise.
inline Value energy_loss_frozen(Graph& g, const FlowStack& stack, const TargetSpec& target, const Tensor& noise) {
  if (target.dim != stack.dim()) throw DataError("energy_loss: target and flow dimensions differ");
  NoiseOutput out = stack.transform_noise(g, g.constant(noise));
  Value lt = target.log_density(g, out.y);
  const auto& v = lt.data().data;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw NumericDomainError("energy_loss: non-finite target log-density at sample " + std::to_string(i));
  return mean(out.log_q - lt);
}

inline Value energy_loss(Graph& g, const FlowStack& stack, const TargetSpec& target, std::size_t n,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return energy_loss_frozen(g, stack, target, stack.sample_base(n, rng));
}

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

/// Global L2 norm of all gradients; throws on a non-finite entry.
inline double grad_norm(const ParameterList& params) {
  double s = 0.0;
  for (const Parameter* p : params)
    for (double gv : p->grad.data) {
      if (!std::isfinite(gv)) throw NumericDomainError("non-finite gradient in parameter " + p->name);
      s += gv * gv;
    }
  return std::sqrt(s);
}

/// One bias-corrected Adam update from the gradients held in `params`.
inline void adam_step(const ParameterList& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DomainError("adam_step: state does not match parameters");
  const double norm = grad_norm(params);
  const double scale = cfg.grad_clip && norm > *cfg.grad_clip ? *cfg.grad_clip / norm : 1.0;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  std::size_t k = 0;
  for (Parameter* p : params) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double gi = p->grad.data[i] * scale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      p->value.data[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
    ++k;
  }
}

/// Exponential moving average of parameter values.
class PolyakAverage {
 public:
  PolyakAverage(const ParameterList& params, double decay) : decay_(decay) {
    for (const Parameter* p : params) avg_.push_back(p->value.data);
  }
  void update(const ParameterList& params) {
    std::size_t k = 0;
    for (const Parameter* p : params) {
      for (std::size_t i = 0; i < avg_[k].size(); ++i)
        avg_[k][i] = decay_ * avg_[k][i] + (1.0 - decay_) * p->value.data[i];
      ++k;
    }
  }
  void apply(const ParameterList& params) const {
    std::size_t k = 0;
    for (Parameter* p : params) p->value.data = avg_[k++];
  }

 private:
  double decay_;
  std::vector<std::vector<double>> avg_;
};

struct TrainTrace {
  std::vector<double> loss;  // one entry per step, before the update
};

namespace detail {

template <typename LossFn>
TrainTrace run_loop(const FlowStack& stack, const TrainConfig& cfg, LossFn&& loss_at) {
  cfg.validate();
  const ParameterList params = stack.parameters();
  AdamState state;
  std::optional<PolyakAverage> ema;
  if (cfg.polyak) ema.emplace(params, *cfg.polyak);
  TrainTrace trace;
  trace.loss.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    params.zero_grad();
    Graph g;
    Value loss = loss_at(g, step);
    trace.loss.push_back(loss.item());
    g.backward(loss);
    adam_step(params, state, cfg);
    if (ema) ema->update(params);
  }
  if (ema) ema->apply(params);
  return trace;
}

}  // namespace detail

/// Maximum likelihood on rows of `data`, minibatches drawn by reshuffled
/// passes without replacement.
inline TrainTrace fit_density(const FlowStack& stack, const Tensor& data, const TrainConfig& cfg) {
  if (data.rank() != 2 || data.shape[0] == 0) throw DataError("fit_density: no rows");
  if (data.shape[1] != stack.dim()) throw DataError("fit_density: data dimension does not match the flow");
  const std::size_t n = data.shape[0], m = data.shape[1];
  const std::size_t bs = std::min(cfg.batch, n);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t cursor = 0;
  Tensor batch(Shape{bs, m});
  return detail::run_loop(stack, cfg, [&](Graph& g, std::size_t) {
    for (std::size_t i = 0; i < bs; ++i) {
      if (cursor == n) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      const std::size_t r = perm[cursor++];
      for (std::size_t j = 0; j < m; ++j) batch.at(i, j) = data.at(r, j);
    }
    return mle_loss(g, stack, batch);
  });
}

/// Exclusive-KL fit to `target` with fresh base noise every step.
inline TrainTrace fit_energy(const FlowStack& stack, const TargetSpec& target, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return detail::run_loop(stack, cfg, [&](Graph& g, std::size_t) {
    return energy_loss_frozen(g, stack, target, stack.sample_base(cfg.batch, rng));
  });
}

}  // namespace nafkit

#endif  // NAFKIT_TRAINING_HPP
