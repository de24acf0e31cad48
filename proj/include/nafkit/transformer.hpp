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

// Scalar monotone transformers with exact log-derivatives, evaluated on
// activated parameters. The batched, differentiable versions used for
// training live in transformer_ops.hpp and must agree with these.

#ifndef NAFKIT_TRANSFORMER_HPP
#define NAFKIT_TRANSFORMER_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nafkit/errors.hpp"
#include "nafkit/stablemath.hpp"
#include "nafkit/tensor.hpp"

namespace nafkit {

/// log D and log(1 - D) below this are treated as saturated (D within
/// ~1e-304 of 0 or 1).
inline constexpr double kLogSaturation = -700.0;

/// Softness pre-activation offset for the gated affine transformer at
/// initialization: sigmoid(5) ~= 0.9933, close to the identity gate.
inline constexpr double kGateInitOffset = 5.0;

enum class TransformerKind { kAffineExp, kAffineGate, kDsf, kDdsf };

inline const char* kind_name(TransformerKind k) {
  switch (k) {
    case TransformerKind::kAffineExp: return "affine-exp";
    case TransformerKind::kAffineGate: return "affine-gate";
    case TransformerKind::kDsf: return "dsf";
    case TransformerKind::kDdsf: return "ddsf";
  }
  return "?";
}

inline TransformerKind parse_kind(const std::string& s) {
  if (s == "affine-exp" || s == "affine") return TransformerKind::kAffineExp;
  if (s == "affine-gate") return TransformerKind::kAffineGate;
  if (s == "dsf") return TransformerKind::kDsf;
  if (s == "ddsf") return TransformerKind::kDdsf;
  throw DomainError("unknown transformer kind '" + s + "' (affine-exp, affine-gate, dsf, ddsf)");
}

struct TransformResult {
  double y;
  double logdet;
};

// Affine

enum class AffineKind { kExp, kGate };

struct AffineParams {
  double mu = 0.0;
  double sigma_pre = 0.0;
};

/// kExp: y = mu + exp(s) x.  kGate: y = sigmoid(s) x + (1 - sigmoid(s)) mu.
inline TransformResult affine_forward(double x, const AffineParams& p, AffineKind kind) {
  if (kind == AffineKind::kExp) return {p.mu + std::exp(p.sigma_pre) * x, p.sigma_pre};
  const double s = sigmoid(p.sigma_pre);
  return {s * x + (1.0 - s) * p.mu, logsigmoid(p.sigma_pre)};
}

// Deep sigmoidal flow

struct DsfParams {
  std::vector<double> w;  // simplex
  std::vector<double> a;  // positive
  std::vector<double> b;

  std::size_t size() const { return w.size(); }

  /// w = softmax(w_pre), a = softplus(a_pre).
  static DsfParams from_pre(std::span<const double> w_pre, std::span<const double> a_pre,
                            std::span<const double> b) {
    DsfParams p;
    p.w = softmax(w_pre);
    p.a.reserve(a_pre.size());
    for (double v : a_pre) p.a.push_back(softplus(v));
    p.b.assign(b.begin(), b.end());
    return p;
  }

  /// Uniform w, a = 1, b = 0: the identity map.
  static DsfParams identity(std::size_t d) {
    return {std::vector<double>(d, 1.0 / static_cast<double>(d)), std::vector<double>(d, 1.0),
            std::vector<double>(d, 0.0)};
  }

  void validate() const {
    if (w.empty() || a.size() != w.size() || b.size() != w.size())
      throw DomainError("DsfParams: inconsistent sizes");
    double s = 0.0;
    for (double v : w) {
      if (!(v > 0.0)) throw DomainError("DsfParams: non-positive weight");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DomainError("DsfParams: weights do not sum to 1");
    for (double v : a)
      if (!(v > 0.0)) throw DomainError("DsfParams: non-positive softness");
  }
};

namespace detail {

[[noreturn]] inline void throw_saturation(const char* where, double x) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: pre-logit saturated at |x| = %.6g", where, std::abs(x));
  throw SaturationError(buf, std::abs(x));
}

inline void check_saturation(const char* where, double x, double log_d, double log_1md) {
#ifndef NAFKIT_NO_SATURATION_CLAMP
  if (!(log_d >= kLogSaturation) || !(log_1md >= kLogSaturation)) throw_saturation(where, x);
#else
  (void)where, (void)x, (void)log_d, (void)log_1md;
#endif
}

// log D and log(1 - D) for D = sum_j w_j sigmoid(a_j x + b_j); 1 - D is
// accumulated from sigmoid(-C) so neither side cancels.
struct PreLogit {
  double log_d;
  double log_1md;
  std::vector<double> log_sig;
  std::vector<double> log_sig_neg;
};

inline PreLogit dsf_prelogit(double x, std::span<const double> log_w, const DsfParams& p) {
  const std::size_t d = p.size();
  PreLogit out{0.0, 0.0, std::vector<double>(d), std::vector<double>(d)};
  std::vector<double> t1(d), t2(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double c = p.a[j] * x + p.b[j];
    out.log_sig[j] = logsigmoid(c);
    out.log_sig_neg[j] = logsigmoid(-c);
    t1[j] = log_w[j] + out.log_sig[j];
    t2[j] = log_w[j] + out.log_sig_neg[j];
  }
  out.log_d = logsumexp(t1);
  out.log_1md = logsumexp(t2);
  return out;
}

inline std::vector<double> logs(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::log(v[i]);
  return out;
}

}  // namespace detail

/// Output only; accepts invalid parameters (used to probe monotonicity).
inline double dsf_output(double x, const DsfParams& p) {
  double d = 0.0, e = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double c = p.a[j] * x + p.b[j];
    d += p.w[j] * sigmoid(c);
    e += p.w[j] * sigmoid(-c);
  }
  return std::log(d) - std::log(e);
}

/// y = logit(sum_j w_j sigmoid(a_j x + b_j)) with
/// log dy/dx = -log D - log(1-D) + lse_j(log w_j + log a_j + log s(C_j) + log s(-C_j)).
inline TransformResult dsf_forward(double x, const DsfParams& p) {
  p.validate();
  const auto log_w = detail::logs(p.w);
  const auto pl = detail::dsf_prelogit(x, log_w, p);
  detail::check_saturation("dsf_forward", x, pl.log_d, pl.log_1md);
  std::vector<double> t(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    t[j] = log_w[j] + std::log(p.a[j]) + pl.log_sig[j] + pl.log_sig_neg[j];
  return {pl.log_d - pl.log_1md, -pl.log_d - pl.log_1md + logsumexp(t)};
}

// Deep dense sigmoidal flow

/// One layer: h' = logit(w . sigmoid(a * (u . h) + b)).
/// u is out x in, w is out x out (row-stochastic); a, b have length out.
struct DdsfLayerParams {
  std::size_t in = 1;
  std::size_t out = 1;
  Tensor u;
  Tensor w;
  std::vector<double> a;
  std::vector<double> b;

  static DdsfLayerParams identity(std::size_t in, std::size_t out) {
    DdsfLayerParams p;
    p.in = in;
    p.out = out;
    p.u = Tensor(Shape{out, in}, 1.0 / static_cast<double>(in));
    p.w = Tensor(Shape{out, out}, 1.0 / static_cast<double>(out));
    p.a.assign(out, 1.0);
    p.b.assign(out, 0.0);
    return p;
  }

  void validate() const {
    if (u.shape != Shape{out, in} || w.shape != Shape{out, out} || a.size() != out || b.size() != out)
      throw DomainError("DdsfLayerParams: inconsistent shapes");
    auto rows_ok = [](const Tensor& m) {
      const std::size_t c = m.shape[1];
      for (std::size_t i = 0; i < m.shape[0]; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          if (!(m.at(i, j) > 0.0)) return false;
          s += m.at(i, j);
        }
        if (std::abs(s - 1.0) > 1e-9) return false;
      }
      return true;
    };
    if (!rows_ok(u) || !rows_ok(w)) throw DomainError("DdsfLayerParams: u or w not row-stochastic");
    for (double v : a)
      if (!(v > 0.0)) throw DomainError("DdsfLayerParams: non-positive softness");
  }
};

/// Forward pass plus the log-space Jacobian chain J_L * ... * J_1 (1 x 1).
inline TransformResult ddsf_forward(double x, std::span<const DdsfLayerParams> layers) {
  if (layers.empty() || layers.front().in != 1 || layers.back().out != 1)
    throw DomainError("ddsf_forward: layer widths must start and end at 1");
  std::vector<double> h{x};
  LogMatrix chain(1, 1, 0.0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DdsfLayerParams& p = layers[l];
    p.validate();
    if (p.in != h.size()) throw DomainError("ddsf_forward: layer widths do not chain");
    std::vector<double> c(p.out), ls(p.out), lsn(p.out);
    for (std::size_t k = 0; k < p.out; ++k) {
      double uh = 0.0;
      for (std::size_t j = 0; j < p.in; ++j) uh += p.u.at(k, j) * h[j];
      c[k] = p.a[k] * uh + p.b[k];
      ls[k] = logsigmoid(c[k]);
      lsn[k] = logsigmoid(-c[k]);
    }
    std::vector<double> next(p.out), log_d(p.out), log_1md(p.out), t1(p.out), t2(p.out);
    for (std::size_t i = 0; i < p.out; ++i) {
      for (std::size_t k = 0; k < p.out; ++k) {
        t1[k] = std::log(p.w.at(i, k)) + ls[k];
        t2[k] = std::log(p.w.at(i, k)) + lsn[k];
      }
      log_d[i] = logsumexp(t1);
      log_1md[i] = logsumexp(t2);
      if (!(log_d[i] >= kLogSaturation) || !(log_1md[i] >= kLogSaturation)) {
#ifndef NAFKIT_NO_SATURATION_CLAMP
        char buf[160];
        std::snprintf(buf, sizeof buf, "ddsf_forward: pre-logit saturated in layer %zu at |x| = %.6g", l + 1,
                      std::abs(x));
        throw SaturationError(buf, std::abs(x));
#endif
      }
      next[i] = log_d[i] - log_1md[i];
    }
    // J(i, j) = 1/(D_i(1-D_i)) * sum_k w_ik s'(C_k) a_k u_kj, in log space:
    // diag(-log D - log(1-D)) . log w  *  diag(log s(C) + log s(-C) + log a) . log u
    LogMatrix left(p.out, p.out), right(p.out, p.in);
    for (std::size_t i = 0; i < p.out; ++i)
      for (std::size_t k = 0; k < p.out; ++k) left(i, k) = -log_d[i] - log_1md[i] + std::log(p.w.at(i, k));
    for (std::size_t k = 0; k < p.out; ++k)
      for (std::size_t j = 0; j < p.in; ++j)
        right(k, j) = ls[k] + lsn[k] + std::log(p.a[k]) + std::log(p.u.at(k, j));
    chain = log_matmul(log_matmul(left, right), chain);
    h = std::move(next);
  }
  return {h[0], chain(0, 0)};
}

/// Output only, without the Jacobian chain (used inside bisection).
inline double ddsf_output(double x, std::span<const DdsfLayerParams> layers) {
  std::vector<double> h{x}, sp, sn;
  for (const DdsfLayerParams& p : layers) {
    sp.resize(p.out);
    sn.resize(p.out);
    for (std::size_t k = 0; k < p.out; ++k) {
      double uh = 0.0;
      for (std::size_t j = 0; j < p.in; ++j) uh += p.u.at(k, j) * h[j];
      const double c = p.a[k] * uh + p.b[k];
      sp[k] = sigmoid(c);
      sn[k] = sigmoid(-c);
    }
    h.assign(p.out, 0.0);
    for (std::size_t i = 0; i < p.out; ++i) {
      double d = 0.0, e = 0.0;
      for (std::size_t k = 0; k < p.out; ++k) {
        d += p.w.at(i, k) * sp[k];
        e += p.w.at(i, k) * sn[k];
      }
      h[i] = std::log(d) - std::log(e);
    }
  }
  return h[0];
}

/// Widths d_0 = 1, d_1..d_{L-1} = d, d_L = 1.
inline std::vector<std::size_t> ddsf_widths(std::size_t d, std::size_t layers) {
  if (layers == 0) throw DomainError("ddsf: zero layers");
  std::vector<std::size_t> w(layers + 1, d);
  w.front() = 1;
  w.back() = 1;
  return w;
}

// Inversion and monotonicity

using ScalarMap = std::function<double(double)>;

/// Bisection for x with f(x) = y, f strictly increasing. The hint bracket is
/// widened geometrically until it contains y, up to |x| = 1e6.
inline double invert(double y, const ScalarMap& f, std::pair<double, double> hint = {-1.0, 1.0}) {
  constexpr double kLimit = 1e6;
  if (!std::isfinite(y)) throw RangeError("invert: non-finite target");
  double lo = std::min(hint.first, hint.second);
  double hi = std::max(hint.first, hint.second);
  if (hi - lo < 1e-3) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto eval = [&](double x) {
    try {
      return f(x);
    } catch (const SaturationError&) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "invert: y = %.17g outside the numeric range of the map", y);
      throw RangeError(buf);
    }
  };
  double width = hi - lo;
  while (eval(lo) > y) {
    if (lo <= -kLimit) throw RangeError("invert: bracket expansion exhausted below -1e6");
    width *= 2.0;
    lo = std::max(lo - width, -kLimit);
  }
  width = hi - lo;
  while (eval(hi) < y) {
    if (hi >= kLimit) throw RangeError("invert: bracket expansion exhausted above 1e6");
    width *= 2.0;
    hi = std::min(hi + width, kLimit);
  }
  for (int it = 0; it < 400 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = eval(mid);
    if (v == y) return mid;
    (v < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// True iff f is strictly increasing along the (strictly increasing) grid.
inline bool check_monotone(const ScalarMap& f, std::span<const double> grid) {
  if (grid.size() < 2) throw DomainError("check_monotone: need at least 2 grid points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw DomainError("check_monotone: grid not strictly increasing");
  double prev = f(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = f(grid[i]);
    if (!(cur > prev)) return false;
    prev = cur;
  }
  return true;
}

}  // namespace nafkit

#endif  // NAFKIT_TRANSFORMER_HPP
