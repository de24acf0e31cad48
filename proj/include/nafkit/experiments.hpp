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

// End-to-end runs shared by the command-line tool and the acceptance suite:
// option structs with JSON round trip, seed derivation, the two fitting
// modes, and their metrics.

#ifndef NAFKIT_EXPERIMENTS_HPP
#define NAFKIT_EXPERIMENTS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "nafkit/checkpoint.hpp"
#include "nafkit/csv.hpp"
#include "nafkit/flow.hpp"
#include "nafkit/targets.hpp"
#include "nafkit/training.hpp"
#include "nafkit/universal.hpp"

namespace nafkit {

/// splitmix64 of (seed, stream): independent streams for data, init,
/// training and sampling from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kDataStream = 1, kInitStream = 2, kTrainStream = 3, kSampleStream = 4 };

struct ModelOptions {
  std::string model = "dsf";
  std::size_t d = 16;
  std::size_t L = 2;
  std::size_t stack = 0;  // 0: 6 for affine kinds, 1 otherwise
  std::size_t hidden = 64;
  std::string base = "normal";
  std::string init = "identity";  // or "staircase" (dsf, bounded-support energy targets)

  std::size_t depth() const {
    if (stack) return stack;
    const auto k = parse_kind(model);
    return k == TransformerKind::kAffineExp || k == TransformerKind::kAffineGate ? 6 : 1;
  }

  FlowStack build(std::size_t m) const {
    if (hidden == 0) throw DomainError("hidden width must be >= 1");
    if (d == 0) throw DomainError("d must be >= 1");
    if (init != "identity" && init != "staircase") throw DomainError("unknown init '" + init + "' (identity, staircase)");
    TransformerSpec spec;
    spec.kind = parse_kind(model);
    spec.d = d;
    spec.layers = L;
    return FlowStack::uniform_spec(m, spec, depth(), {hidden}, parse_base(base));
  }
};

inline constexpr double kStaircaseSoftness = 40.0;

/// Staircase start for the first (noise-side) layer: step centers at the
/// base quantiles (k + 1/2) / (d - 2), so that forward samples start spread
/// evenly over (lo, hi) in d - 1 clumps. Each clump is then pulled by the
/// local energy gradient alone.
inline void staircase_init(FlowStack& stack, double lo, double hi, double softness = kStaircaseSoftness) {
  FlowLayer& first = stack.layers().front();
  const std::size_t d = first.spec().d;
  if (d < 3) throw DomainError("staircase init: needs d >= 3");
  std::vector<double> centers(d - 2);
  for (std::size_t k = 0; k < d - 2; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(d - 2);
    centers[k] = stack.base() == BaseKind::kUniform ? u : normal_quantile(u);
  }
  first.staircase_init(lo, hi, centers, softness);
}

struct TrainOptions {
  std::size_t steps = 1000;
  std::size_t batch = 256;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 10.0;  // 0 disables
  double polyak = 0.0;      // 0 disables
  std::uint64_t seed = 0;

  TrainConfig config(const std::string& loss) const {
    TrainConfig c;
    c.loss = loss;
    c.steps = steps;
    c.batch = batch;
    c.lr = lr;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.eps = adam_eps;
    c.seed = derive_seed(seed, kTrainStream);
    if (grad_clip > 0.0) c.grad_clip = grad_clip;
    else c.grad_clip.reset();
    if (polyak > 0.0) c.polyak = polyak;
    c.validate();
    return c;
  }
};

struct FitDensityOptions {
  ModelOptions model;
  TrainOptions train;
  std::string target;      // named target with an exact sampler, or
  std::string data;        // CSV path
  bool header = false;
  std::size_t samples = 10000;      // training draws from a named target
  std::size_t val_samples = 2000;   // validation draws from a named target
  double val_fraction = 0.1;        // held-out tail of a CSV
  std::size_t coverage_samples = 10000;
  double radius = 1.5;
};

struct FitEnergyOptions {
  ModelOptions model;
  TrainOptions train;
  std::string target;
  std::size_t n_samples = 10000;
  double radius = 0.0;  // 0: 1.0 for 2-D targets, 0.1 for 1-D
  std::size_t hist_bins = 100;
  double hist_lo = 0.0;
  double hist_hi = 2.0;

  double effective_radius(std::size_t m) const { return radius > 0.0 ? radius : (m == 1 ? 0.1 : 1.0); }
};

inline nlohmann::json to_json(const ModelOptions& o) {
  return {{"model", o.model}, {"d", o.d}, {"L", o.L}, {"stack", o.stack}, {"stack_resolved", o.depth()},
          {"hidden", o.hidden}, {"base", o.base}, {"init", o.init}};
}

inline nlohmann::json to_json(const TrainOptions& o) {
  return {{"steps", o.steps}, {"batch", o.batch}, {"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2},
          {"adam_eps", o.adam_eps}, {"grad_clip", o.grad_clip}, {"polyak", o.polyak}, {"seed", o.seed}};
}

inline nlohmann::json target_constants(const std::string& name) {
  nlohmann::json c = nlohmann::json::object();
  if (name.empty()) return c;
  for (const auto& [k, v] : make_target(name).constants) c[k] = v;
  return c;
}

inline nlohmann::json to_json(const FitDensityOptions& o) {
  nlohmann::json j = to_json(o.model);
  j.update(to_json(o.train));
  j.update({{"target", o.target}, {"data", o.data}, {"header", o.header}, {"samples", o.samples},
            {"val_samples", o.val_samples}, {"val_fraction", o.val_fraction},
            {"coverage_samples", o.coverage_samples}, {"radius", o.radius}});
  return j;
}

inline nlohmann::json to_json(const FitEnergyOptions& o) {
  nlohmann::json j = to_json(o.model);
  j.update(to_json(o.train));
  j.update({{"target", o.target}, {"n_samples", o.n_samples}, {"radius", o.radius},
            {"hist_bins", o.hist_bins}, {"hist_lo", o.hist_lo}, {"hist_hi", o.hist_hi}});
  return j;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Mean of the last min(n, 100) trace entries.
inline double tail_mean(const std::vector<double>& trace) {
  const std::size_t k = std::min<std::size_t>(trace.size(), 100);
  double s = 0.0;
  for (std::size_t i = trace.size() - k; i < trace.size(); ++i) s += trace[i];
  return k ? s / static_cast<double>(k) : 0.0;
}

struct FitDensityResult {
  FlowStack stack;
  TrainTrace trace;
  nlohmann::json metrics;
};

inline FitDensityResult run_fit_density(const FitDensityOptions& o) {
  Tensor train, val;
  std::optional<TargetSpec> target;
  if (!o.target.empty() == !o.data.empty()) throw DomainError("fit-density: give exactly one of target or data");
  if (!o.target.empty()) {
    target = make_target(o.target);
    if (!target->has_sampler()) throw DomainError("target " + o.target + " has no exact sampler");
    if (o.samples == 0 || o.val_samples == 0) throw DomainError("fit-density: sample counts must be >= 1");
    std::mt19937_64 rng(derive_seed(o.train.seed, kDataStream));
    train = target->sample(o.samples, rng);
    val = target->sample(o.val_samples, rng);
  } else {
    const Tensor all = read_csv(o.data, o.header).rows;
    if (!(o.val_fraction >= 0.0 && o.val_fraction < 1.0)) throw DomainError("val-fraction must lie in [0, 1)");
    const std::size_t n = all.shape[0], m = all.shape[1];
    std::size_t n_val = static_cast<std::size_t>(std::floor(o.val_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = 0;
    const std::size_t n_train = n - n_val;
    train = Tensor(Shape{n_train, m}, std::vector<double>(all.data.begin(), all.data.begin() + n_train * m));
    if (n_val) val = Tensor(Shape{n_val, m}, std::vector<double>(all.data.begin() + n_train * m, all.data.end()));
  }
  const std::size_t m = train.shape[1];
  FitDensityResult r{o.model.build(m), {}, {}};
  if (o.model.init != "identity") throw DomainError("fit-density supports only the identity init");
  std::mt19937_64 init(derive_seed(o.train.seed, kInitStream));
  r.stack.identity_init(init);
  r.trace = fit_density(r.stack, train, o.train.config("mle"));

  auto nll = [&](const Tensor& x) { return -mean_of(r.stack.log_density(x)); };
  nlohmann::json metrics = {{"command", "fit-density"},
                            {"final_loss", r.trace.loss.empty() ? 0.0 : r.trace.loss.back()},
                            {"final_loss_tail_mean", tail_mean(r.trace.loss)},
                            {"steps", o.train.steps},
                            {"seed", o.train.seed},
                            {"m", m},
                            {"n_train", train.shape[0]},
                            {"train_nll", nll(train)}};
  if (val.rank() == 2 && val.shape[0] > 0) {
    metrics["n_validation"] = val.shape[0];
    metrics["validation_nll"] = nll(val);
  }
  if (target && !target->modes.empty() && o.coverage_samples > 0) {
    const Tensor s = r.stack.sample(o.coverage_samples, derive_seed(o.train.seed, kSampleStream));
    metrics["mode_coverage"] = {{"radius", o.radius}, {"fractions", count_modes(s, *target, o.radius)}};
  }
  metrics["config"] = to_json(o);
  metrics["target_constants"] = target_constants(o.target);
  r.metrics = std::move(metrics);
  return r;
}

/// Histogram counts of the first coordinate over [lo, hi) in `bins` bins;
/// the last bin is closed.
inline std::vector<std::size_t> histogram(const Tensor& samples, std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw DomainError("histogram: need bins >= 1 and hi > lo");
  std::vector<std::size_t> h(bins, 0);
  const std::size_t n = samples.shape.at(0), m = samples.rank() == 2 ? samples.shape[1] : 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = samples.data[i * m];
    if (!(v >= lo && v <= hi)) continue;
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    h[std::min(b, bins - 1)]++;
  }
  return h;
}

/// Centers of bins that are histogram peaks: the maximum within +-3 bins,
/// at least 0.1 of the tallest bin, and at least 3x the smallest bin within
/// +-15 bins (so that flat noisy stretches do not count).
inline std::vector<double> histogram_peaks(const std::vector<std::size_t>& h, double lo, double hi) {
  std::vector<double> peaks;
  if (h.empty()) return peaks;
  const std::size_t top = *std::max_element(h.begin(), h.end());
  const auto n = static_cast<std::ptrdiff_t>(h.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (h[i] == 0 || 10 * h[i] < top) continue;
    bool is_max = true;
    std::size_t low = h[i];
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - 15); k <= std::min(n - 1, i + 15); ++k) {
      if (std::abs(k - i) <= 3 && h[k] > h[i]) is_max = false;
      low = std::min(low, h[k]);
    }
    // Plateaus of equal bins report their leftmost bin only.
    if (i > 0 && h[i - 1] == h[i]) is_max = false;
    if (is_max && h[i] >= 3 * low)
      peaks.push_back(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(h.size()));
  }
  return peaks;
}

struct FitEnergyResult {
  FlowStack stack;
  TrainTrace trace;
  Tensor samples;
  std::vector<std::size_t> hist;  // 1-D targets only
  nlohmann::json metrics;
  nlohmann::json coverage;
};

/// Energy-mode samples: base draws pushed forward through the stack.
inline Tensor forward_samples(const FlowStack& stack, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor z = stack.sample_base(n, rng);
  Graph g;
  return stack.forward(g, g.constant(std::move(z))).y.data();
}

inline FitEnergyResult run_fit_energy(const FitEnergyOptions& o) {
  const TargetSpec target = make_target(o.target);
  FitEnergyResult r{o.model.build(target.dim), {}, {}, {}, {}, {}};
  std::mt19937_64 init(derive_seed(o.train.seed, kInitStream));
  r.stack.identity_init(init);
  if (o.model.init == "staircase") {
    const auto support = target.support();
    if (!support) throw DomainError("staircase init: target " + o.target + " declares no bounded support");
    staircase_init(r.stack, support->first, support->second);
  }
  r.trace = fit_energy(r.stack, target, o.train.config("energy"));
  r.samples = forward_samples(r.stack, o.n_samples, derive_seed(o.train.seed, kSampleStream));

  const double radius = o.effective_radius(target.dim);
  r.coverage = {{"target", o.target}, {"radius", radius}, {"n", o.n_samples}};
  if (!target.modes.empty()) {
    r.coverage["modes"] = target.modes;
    r.coverage["fractions"] = count_modes(r.samples, target, radius);
  }
  nlohmann::json metrics = {{"command", "fit-energy"},
                            {"final_loss", r.trace.loss.empty() ? 0.0 : r.trace.loss.back()},
                            {"final_loss_tail_mean", tail_mean(r.trace.loss)},
                            {"steps", o.train.steps},
                            {"seed", o.train.seed},
                            {"m", target.dim},
                            {"target_normalized", target.normalized},
                            {"mode_coverage", r.coverage}};
  if (target.dim == 1) {
    r.hist = histogram(r.samples, o.hist_bins, o.hist_lo, o.hist_hi);
    metrics["histogram_peaks"] = histogram_peaks(r.hist, o.hist_lo, o.hist_hi);
  }
  metrics["config"] = to_json(o);
  metrics["target_constants"] = target_constants(o.target);
  r.metrics = std::move(metrics);
  return r;
}

/// x,y,logp rows (row-major: y outer, x inner) over a 2-D window, or x,logp
/// for m = 1.
inline std::string density_grid_csv(const std::function<std::vector<double>(const Tensor&)>& logp, std::size_t m,
                                    const std::vector<double>& window, std::size_t points) {
  if (points < 2) throw DomainError("grid: need at least 2 points per axis");
  if (m != 1 && m != 2) throw DomainError("grid: only 1-D and 2-D models can be exported");
  if (window.size() != 2 * m || !(window[1] > window[0]) || (m == 2 && !(window[3] > window[2])))
    throw DomainError("grid: window must be lo,hi per axis with lo < hi");
  auto axis = [&](double lo, double hi) {
    std::vector<double> a(points);
    for (std::size_t i = 0; i < points; ++i) a[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return a;
  };
  const auto xs = axis(window[0], window[1]);
  if (m == 1) {
    Tensor pts(Shape{points, 1}, xs);
    return format_csv(pts, {"x", "logp"}, logp(pts));
  }
  const auto ys = axis(window[2], window[3]);
  Tensor pts(Shape{points * points, 2});
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < points; ++j) {
      pts.at(i * points + j, 0) = xs[j];
      pts.at(i * points + j, 1) = ys[i];
    }
  return format_csv(pts, {"x", "y", "logp"}, logp(pts));
}

}  // namespace nafkit

#endif  // NAFKIT_EXPERIMENTS_HPP
