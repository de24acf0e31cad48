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

// Reverse accumulation over a dynamically recorded graph of tensor ops.
//
// A Graph is an append-only arena of nodes; a Value is a handle into it.
// Nodes are only ever appended after their operands, so creation order is a
// topological order and backward() is a single reverse sweep. Trainable state
// lives in Parameter objects outside the graph; a graph is built per
// minibatch and discarded after backward().

#ifndef NAFKIT_DIFFGRAPH_HPP
#define NAFKIT_DIFFGRAPH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "nafkit/errors.hpp"
#include "nafkit/stablemath.hpp"
#include "nafkit/tensor.hpp"

namespace nafkit {

/// Trainable leaf. The gradient accumulates across backward() calls until
/// zero_grad().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Non-owning list of a model's parameters; names are unique.
class ParameterList {
 public:
  void add(Parameter& p) {
    if (!names_.insert(p.name).second)
      throw DomainError("parameter registered twice: " + p.name);
    params_.push_back(&p);
  }
  void append(const ParameterList& other) {
    for (Parameter* p : other.params_) add(*p);
  }
  void zero_grad() const {
    for (Parameter* p : params_) p->zero_grad();
  }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const Parameter* p : params_) n += p->value.size();
    return n;
  }
  Parameter& operator[](std::size_t i) const { return *params_[i]; }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter*> params_;
  std::unordered_set<std::string> names_;
};

enum class Op {
  kConstant,
  kVariable,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSigmoid,
  kTanh,
  kSoftplus,
  kSin,
  kCos,
  kMatmul,
  kSum,
  kSumLast,
  kMean,
  kLogSumExpLast,
  kBroadcast,
  kReshape,
  kSlice,
  kConcat,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kVariable: return "variable";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kMatmul: return "matmul";
    case Op::kSum: return "sum";
    case Op::kSumLast: return "sum_last";
    case Op::kMean: return "mean";
    case Op::kLogSumExpLast: return "logsumexp_last";
    case Op::kBroadcast: return "broadcast";
    case Op::kReshape: return "reshape";
    case Op::kSlice: return "slice";
    case Op::kConcat: return "concat";
  }
  return "?";
}

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Value {
 public:
  Value() = default;
  Value(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& data() const;
  const Shape& shape() const { return data().shape; }
  double item() const;
  /// Gradient of the last backward root with respect to this node.
  const std::vector<double>& grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

namespace detail {

// Broadcast shapes right-aligned, numpy style; ranks padded to 3.
inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* what) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      throw DomainError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                        shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

inline std::array<std::size_t, 3> pad3(const Shape& s) {
  std::array<std::size_t, 3> out{1, 1, 1};
  for (std::size_t i = 0; i < s.size(); ++i) out[3 - s.size() + i] = s[i];
  return out;
}

// Strides of `in` when read at indices of `out`; broadcast axes get stride 0.
inline std::array<std::size_t, 3> broadcast_strides(const Shape& in, const Shape& out) {
  const auto pi = pad3(in);
  const auto po = pad3(out);
  std::array<std::size_t, 3> st{pi[1] * pi[2], pi[2], 1};
  for (int k = 0; k < 3; ++k) {
    if (pi[k] == 1 && po[k] != 1) st[k] = 0;
  }
  return st;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const Shape& a, const Shape& b, const Shape& out, F&& f) {
  if (a == out && b == out) {
    const std::size_t n = shape_size(out);
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const auto po = pad3(out);
  const auto sa = broadcast_strides(a, out);
  const auto sb = broadcast_strides(b, out);
  std::size_t o = 0;
  for (std::size_t i = 0; i < po[0]; ++i)
    for (std::size_t j = 0; j < po[1]; ++j)
      for (std::size_t k = 0; k < po[2]; ++k, ++o)
        f(o, i * sa[0] + j * sa[1] + k * sa[2], i * sb[0] + j * sb[1] + k * sb[2]);
}

}  // namespace detail

class Graph {
 public:
  Graph() { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Value constant(Tensor t) { return push(Op::kConstant, std::move(t), {}, false); }
  Value scalar(double v) { return constant(Tensor::scalar(v)); }
  /// Non-parameter leaf whose gradient is tracked (e.g. inputs x).
  Value variable(Tensor t) { return push(Op::kVariable, std::move(t), {}, true); }
  Value param(Parameter& p) {
    Value v = push(Op::kParameter, p.value, {}, true);
    nodes_[v.id()].param = &p;
    return v;
  }

  /// Attribute-free op-kinds: add, sub, mul, div, neg, exp, log, sigmoid,
  /// tanh, softplus, sin, cos, matmul, sum, sum_last, mean, logsumexp_last.
  Value record(Op op, std::initializer_list<Value> operands) {
    std::vector<Value> ops(operands);
    switch (op) {
      case Op::kAdd: case Op::kSub: case Op::kMul: case Op::kDiv:
        if (ops.size() != 2) throw DomainError(std::string(op_name(op)) + ": needs 2 operands");
        return binary(op, ops[0], ops[1]);
      case Op::kNeg: case Op::kExp: case Op::kLog: case Op::kSigmoid: case Op::kTanh:
      case Op::kSoftplus: case Op::kSin: case Op::kCos:
        if (ops.size() != 1) throw DomainError(std::string(op_name(op)) + ": needs 1 operand");
        return unary(op, ops[0]);
      case Op::kMatmul:
        if (ops.size() != 2) throw DomainError("matmul: needs 2 operands");
        return matmul(ops[0], ops[1]);
      case Op::kSum: case Op::kMean: case Op::kSumLast: case Op::kLogSumExpLast:
        if (ops.size() != 1) throw DomainError(std::string(op_name(op)) + ": needs 1 operand");
        return reduce(op, ops[0]);
      default:
        throw DomainError(std::string("record: op needs attributes: ") + op_name(op));
    }
  }

  Value binary(Op op, Value a, Value b) {
    const Tensor& ta = a.data();
    const Tensor& tb = b.data();
    Tensor out(detail::broadcast_shape(ta.shape, tb.shape, op_name(op)));
    double* o = out.data.data();
    const double* pa = ta.data.data();
    const double* pb = tb.data.data();
    switch (op) {
      case Op::kAdd:
        detail::for_each_broadcast(ta.shape, tb.shape, out.shape,
                                   [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = pa[ia] + pb[ib]; });
        break;
      case Op::kSub:
        detail::for_each_broadcast(ta.shape, tb.shape, out.shape,
                                   [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = pa[ia] - pb[ib]; });
        break;
      case Op::kMul:
        detail::for_each_broadcast(ta.shape, tb.shape, out.shape,
                                   [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = pa[ia] * pb[ib]; });
        break;
      case Op::kDiv:
        for (double d : tb.data)
          if (d == 0.0) throw NumericDomainError("div: division by zero");
        detail::for_each_broadcast(ta.shape, tb.shape, out.shape,
                                   [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = pa[ia] / pb[ib]; });
        break;
      default:
        throw DomainError(std::string("binary: not a binary op: ") + op_name(op));
    }
    return push(op, std::move(out), {a, b});
  }

  Value unary(Op op, Value a) {
    const Tensor& ta = a.data();
    Tensor out(ta.shape);
    const std::size_t n = ta.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = ta.data[i];
      double y = 0.0;
      switch (op) {
        case Op::kNeg: y = -x; break;
        case Op::kExp: y = std::exp(x); break;
        case Op::kLog:
          if (!(x > 0.0)) throw NumericDomainError("log: argument " + std::to_string(x) + " <= 0");
          y = std::log(x);
          break;
        case Op::kSigmoid: y = nafkit::sigmoid(x); break;
        case Op::kTanh: y = std::tanh(x); break;
        case Op::kSoftplus: y = nafkit::softplus(x); break;
        case Op::kSin: y = std::sin(x); break;
        case Op::kCos: y = std::cos(x); break;
        default: throw DomainError(std::string("unary: not a unary op: ") + op_name(op));
      }
      out.data[i] = y;
    }
    return push(op, std::move(out), {a});
  }

  Value matmul(Value a, Value b) {
    const Tensor& ta = a.data();
    const Tensor& tb = b.data();
    if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
      throw DomainError("matmul: shape mismatch " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
    const std::size_t n = ta.shape[0], k = ta.shape[1], p = tb.shape[1];
    Tensor out(Shape{n, p});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double aij = ta.data[i * k + j];
        if (aij == 0.0) continue;
        const double* brow = &tb.data[j * p];
        double* orow = &out.data[i * p];
        for (std::size_t c = 0; c < p; ++c) orow[c] += aij * brow[c];
      }
    return push(Op::kMatmul, std::move(out), {a, b});
  }

  Value reduce(Op op, Value a) {
    const Tensor& ta = a.data();
    switch (op) {
      case Op::kSum:
      case Op::kMean: {
        double s = 0.0;
        for (double x : ta.data) s += x;
        if (op == Op::kMean) s /= static_cast<double>(ta.size());
        return push(op, Tensor::scalar(s), {a});
      }
      case Op::kSumLast:
      case Op::kLogSumExpLast: {
        if (ta.rank() == 0) throw DomainError(std::string(op_name(op)) + ": scalar operand");
        const std::size_t d = ta.shape.back();
        Shape s(ta.shape.begin(), ta.shape.end() - 1);
        Tensor out(s);
        for (std::size_t r = 0; r < out.size(); ++r) {
          std::span<const double> row(&ta.data[r * d], d);
          if (op == Op::kSumLast) {
            double acc = 0.0;
            for (double x : row) acc += x;
            out.data[r] = acc;
          } else {
            out.data[r] = logsumexp(row);
          }
        }
        return push(op, std::move(out), {a});
      }
      default:
        throw DomainError(std::string("reduce: not a reduction: ") + op_name(op));
    }
  }

  Value broadcast(Value a, Shape shape) {
    const Tensor& ta = a.data();
    if (detail::broadcast_shape(ta.shape, shape, "broadcast") != shape)
      throw DomainError("broadcast: cannot broadcast " + shape_str(ta.shape) + " to " + shape_str(shape));
    Tensor out(shape);
    detail::for_each_broadcast(ta.shape, ta.shape, shape,
                               [&](std::size_t i, std::size_t ia, std::size_t) { out.data[i] = ta.data[ia]; });
    return push(Op::kBroadcast, std::move(out), {a});
  }

  Value reshape(Value a, Shape shape) {
    const Tensor& ta = a.data();
    if (shape_size(shape) != ta.size())
      throw DomainError("reshape: " + shape_str(ta.shape) + " to " + shape_str(shape));
    return push(Op::kReshape, Tensor(std::move(shape), ta.data), {a});
  }

  /// Columns [begin, end) of the last axis.
  Value slice(Value a, std::size_t begin, std::size_t end) {
    const Tensor& ta = a.data();
    if (ta.rank() == 0 || begin >= end || end > ta.shape.back())
      throw DomainError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") on " + shape_str(ta.shape));
    const std::size_t d = ta.shape.back(), w = end - begin, rows = ta.size() / d;
    Shape s = ta.shape;
    s.back() = w;
    Tensor out(s);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(&ta.data[r * d + begin], w, &out.data[r * w]);
    Value v = push(Op::kSlice, std::move(out), {a});
    nodes_[v.id()].aux = begin;
    return v;
  }

  /// Concatenation along the last axis; leading shapes must agree.
  Value concat(std::span<const Value> parts) {
    if (parts.empty()) throw DomainError("concat: no operands");
    Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
    std::size_t total = 0;
    for (const Value& p : parts) {
      const Shape& s = p.shape();
      if (s.empty() || Shape(s.begin(), s.end() - 1) != lead)
        throw DomainError("concat: leading shape mismatch " + shape_str(s));
      total += s.back();
    }
    Shape s = lead;
    s.push_back(total);
    Tensor out(s);
    const std::size_t rows = out.size() / total;
    std::size_t offset = 0;
    for (const Value& p : parts) {
      const Tensor& tp = p.data();
      const std::size_t w = tp.shape.back();
      for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(&tp.data[r * w], w, &out.data[r * total + offset]);
      offset += w;
    }
    return push(Op::kConcat, std::move(out), std::vector<Value>(parts.begin(), parts.end()));
  }

  /// Accumulates d(root)/d(param) into every reachable Parameter::grad.
  void backward(Value root) {
    if (root.data().size() != 1) throw DomainError("backward: root is not scalar " + shape_str(root.shape()));
    for (Node& n : nodes_) n.grad.clear();
    Node& r = nodes_[root.id()];
    r.grad.assign(1, 1.0);
    for (std::size_t id = root.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.empty() || !n.requires_grad) continue;
      propagate(id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Value;

  struct Node {
    Op op;
    Tensor value;
    std::vector<std::size_t> parents;
    std::vector<double> grad;
    Parameter* param = nullptr;
    std::size_t aux = 0;
    bool requires_grad = false;
  };

  Value push(Op op, Tensor t, std::vector<Value> parents, bool leaf_grad = false) {
    for (double x : t.data)
      if (std::isnan(x)) throw NumericDomainError(std::string(op_name(op)) + ": produced NaN");
    Node n;
    n.op = op;
    n.value = std::move(t);
    n.requires_grad = leaf_grad;
    for (const Value& p : parents) {
      if (&p.graph() != this) throw DomainError("operand recorded on a different graph");
      n.parents.push_back(p.id());
      n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
    }
    nodes_.push_back(std::move(n));
    return Value(this, nodes_.size() - 1);
  }

  std::vector<double>& grad_of(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
  }

  void propagate(std::size_t id) {
    // Copies: grad_of() below may touch other nodes but never reallocates.
    const Node& n = nodes_[id];
    const std::vector<double>& g = n.grad;
    const Tensor& y = n.value;
    switch (n.op) {
      case Op::kConstant:
      case Op::kVariable:
        return;
      case Op::kParameter: {
        auto& pg = n.param->grad.data;
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        return;
      }
      case Op::kAdd: case Op::kSub: case Op::kMul: case Op::kDiv: {
        const std::size_t ia = n.parents[0], ib = n.parents[1];
        const Tensor& ta = nodes_[ia].value;
        const Tensor& tb = nodes_[ib].value;
        const bool ra = nodes_[ia].requires_grad, rb = nodes_[ib].requires_grad;
        double* ga = ra ? grad_of(ia).data() : nullptr;
        double* gb = rb ? grad_of(ib).data() : nullptr;
        const double* pa = ta.data.data();
        const double* pb = tb.data.data();
        const Op op = n.op;
        detail::for_each_broadcast(ta.shape, tb.shape, y.shape,
                                   [&](std::size_t i, std::size_t xa, std::size_t xb) {
          const double gi = g[i];
          switch (op) {
            case Op::kAdd:
              if (ga) ga[xa] += gi;
              if (gb) gb[xb] += gi;
              break;
            case Op::kSub:
              if (ga) ga[xa] += gi;
              if (gb) gb[xb] -= gi;
              break;
            case Op::kMul:
              if (ga) ga[xa] += gi * pb[xb];
              if (gb) gb[xb] += gi * pa[xa];
              break;
            default:
              if (ga) ga[xa] += gi / pb[xb];
              if (gb) gb[xb] -= gi * pa[xa] / (pb[xb] * pb[xb]);
              break;
          }
        });
        return;
      }
      case Op::kNeg: case Op::kExp: case Op::kLog: case Op::kSigmoid: case Op::kTanh:
      case Op::kSoftplus: case Op::kSin: case Op::kCos: {
        const std::size_t ia = n.parents[0];
        if (!nodes_[ia].requires_grad) return;
        const Tensor& x = nodes_[ia].value;
        auto& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
          double d = 0.0;
          switch (n.op) {
            case Op::kNeg: d = -1.0; break;
            case Op::kExp: d = y.data[i]; break;
            case Op::kLog: d = 1.0 / x.data[i]; break;
            case Op::kSigmoid: d = y.data[i] * (1.0 - y.data[i]); break;
            case Op::kTanh: d = 1.0 - y.data[i] * y.data[i]; break;
            case Op::kSoftplus: d = nafkit::sigmoid(x.data[i]); break;
            case Op::kSin: d = std::cos(x.data[i]); break;
            default: d = -std::sin(x.data[i]); break;
          }
          ga[i] += g[i] * d;
        }
        return;
      }
      case Op::kMatmul: {
        const std::size_t ia = n.parents[0], ib = n.parents[1];
        const Tensor& ta = nodes_[ia].value;
        const Tensor& tb = nodes_[ib].value;
        const std::size_t rows = ta.shape[0], k = ta.shape[1], p = tb.shape[1];
        if (nodes_[ia].requires_grad) {
          auto& ga = grad_of(ia);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              double acc = 0.0;
              for (std::size_t c = 0; c < p; ++c) acc += g[i * p + c] * tb.data[j * p + c];
              ga[i * k + j] += acc;
            }
        }
        if (nodes_[ib].requires_grad) {
          auto& gb = grad_of(ib);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const double aij = ta.data[i * k + j];
              if (aij == 0.0) continue;
              for (std::size_t c = 0; c < p; ++c) gb[j * p + c] += aij * g[i * p + c];
            }
        }
        return;
      }
      case Op::kSum: case Op::kMean: {
        const std::size_t ia = n.parents[0];
        if (!nodes_[ia].requires_grad) return;
        auto& ga = grad_of(ia);
        const double gi = n.op == Op::kMean ? g[0] / static_cast<double>(ga.size()) : g[0];
        for (double& v : ga) v += gi;
        return;
      }
      case Op::kSumLast: case Op::kLogSumExpLast: {
        const std::size_t ia = n.parents[0];
        if (!nodes_[ia].requires_grad) return;
        const Tensor& x = nodes_[ia].value;
        auto& ga = grad_of(ia);
        const std::size_t d = x.shape.back();
        for (std::size_t r = 0; r < y.size(); ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            const double w = n.op == Op::kSumLast
                                 ? 1.0
                                 : (y.data[r] == kNegInf ? 0.0 : std::exp(x.data[r * d + j] - y.data[r]));
            ga[r * d + j] += g[r] * w;
          }
        }
        return;
      }
      case Op::kBroadcast: {
        const std::size_t ia = n.parents[0];
        if (!nodes_[ia].requires_grad) return;
        const Shape& xs = nodes_[ia].value.shape;
        auto& ga = grad_of(ia);
        detail::for_each_broadcast(xs, xs, y.shape,
                                   [&](std::size_t i, std::size_t xa, std::size_t) { ga[xa] += g[i]; });
        return;
      }
      case Op::kReshape: {
        const std::size_t ia = n.parents[0];
        if (!nodes_[ia].requires_grad) return;
        auto& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        return;
      }
      case Op::kSlice: {
        const std::size_t ia = n.parents[0];
        if (!nodes_[ia].requires_grad) return;
        auto& ga = grad_of(ia);
        const std::size_t d = nodes_[ia].value.shape.back(), w = y.shape.back();
        const std::size_t rows = y.size() / w;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j) ga[r * d + n.aux + j] += g[r * w + j];
        return;
      }
      case Op::kConcat: {
        const std::size_t total = y.shape.back(), rows = y.size() / total;
        std::size_t offset = 0;
        for (std::size_t pid : n.parents) {
          const std::size_t w = nodes_[pid].value.shape.back();
          if (nodes_[pid].requires_grad) {
            auto& gp = grad_of(pid);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += g[r * total + offset + j];
          }
          offset += w;
        }
        return;
      }
    }
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Value::data() const { return graph_->nodes_[id_].value; }
inline double Value::item() const {
  const Tensor& t = data();
  if (t.size() != 1) throw DomainError("item: value is not scalar " + shape_str(t.shape));
  return t.data[0];
}
inline const std::vector<double>& Value::grad() const { return graph_->nodes_[id_].grad; }

// Operator and function sugar over Graph::record.

inline Value operator+(Value a, Value b) { return a.graph().binary(Op::kAdd, a, b); }
inline Value operator-(Value a, Value b) { return a.graph().binary(Op::kSub, a, b); }
inline Value operator*(Value a, Value b) { return a.graph().binary(Op::kMul, a, b); }
inline Value operator/(Value a, Value b) { return a.graph().binary(Op::kDiv, a, b); }
inline Value operator-(Value a) { return a.graph().unary(Op::kNeg, a); }
inline Value operator+(Value a, double b) { return a + a.graph().scalar(b); }
inline Value operator+(double a, Value b) { return b.graph().scalar(a) + b; }
inline Value operator-(Value a, double b) { return a - a.graph().scalar(b); }
inline Value operator-(double a, Value b) { return b.graph().scalar(a) - b; }
inline Value operator*(Value a, double b) { return a * a.graph().scalar(b); }
inline Value operator*(double a, Value b) { return b.graph().scalar(a) * b; }
inline Value operator/(Value a, double b) { return a / a.graph().scalar(b); }

inline Value exp(Value a) { return a.graph().unary(Op::kExp, a); }
inline Value log(Value a) { return a.graph().unary(Op::kLog, a); }
inline Value sigmoid(Value a) { return a.graph().unary(Op::kSigmoid, a); }
inline Value tanh(Value a) { return a.graph().unary(Op::kTanh, a); }
inline Value softplus(Value a) { return a.graph().unary(Op::kSoftplus, a); }
inline Value sin(Value a) { return a.graph().unary(Op::kSin, a); }
inline Value cos(Value a) { return a.graph().unary(Op::kCos, a); }
inline Value logsigmoid(Value a) { return -softplus(-a); }
inline Value matmul(Value a, Value b) { return a.graph().matmul(a, b); }
inline Value sum(Value a) { return a.graph().reduce(Op::kSum, a); }
inline Value mean(Value a) { return a.graph().reduce(Op::kMean, a); }
inline Value sum_last(Value a) { return a.graph().reduce(Op::kSumLast, a); }
inline Value logsumexp_last(Value a) { return a.graph().reduce(Op::kLogSumExpLast, a); }
inline Value reshape(Value a, Shape s) { return a.graph().reshape(a, std::move(s)); }
inline Value broadcast_to(Value a, Shape s) { return a.graph().broadcast(a, std::move(s)); }
inline Value slice_last(Value a, std::size_t begin, std::size_t end) { return a.graph().slice(a, begin, end); }
inline Value concat_last(std::initializer_list<Value> parts) {
  std::vector<Value> v(parts);
  return v.front().graph().concat(v);
}

/// Appends a trailing axis of size one.
inline Value unsqueeze_last(Value a) {
  Shape s = a.shape();
  s.push_back(1);
  return reshape(a, std::move(s));
}

/// Inserts an axis of size one before the last axis.
inline Value unsqueeze_middle(Value a) {
  Shape s = a.shape();
  s.insert(s.end() - 1, 1);
  return reshape(a, std::move(s));
}

inline Value logsoftmax_last(Value a) { return a - unsqueeze_last(logsumexp_last(a)); }

/// Compares backward() gradients with central differences for every scalar
/// in `params`; returns max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double check_gradients(const std::function<Value(Graph&)>& loss, const ParameterList& params,
                              double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-4)) throw DomainError("check_gradients: eps outside [1e-6, 1e-4]");
  auto eval = [&]() {
    Graph g;
    return loss(g).item();
  };
  const double f0 = eval();
  if (eval() != f0) throw InconsistencyError("check_gradients: loss closure is not deterministic");

  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + eps;
      const double fp = eval();
      p->value.data[i] = saved - eps;
      const double fm = eval();
      p->value.data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = p->grad.data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace nafkit

#endif  // NAFKIT_DIFFGRAPH_HPP
