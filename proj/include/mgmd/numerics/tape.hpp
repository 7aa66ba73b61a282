// Copyright 2026 The mgmd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgmd/errors.hpp"
#include "mgmd/numerics/tensor.hpp"

namespace mgmd {

// Lower bound applied to every log argument.
inline constexpr double kLogFloor = 1e-12;

enum class OpKind {
  kParameter,
  kConstant,
  kMatmul,
  kAdd,
  kSub,
  kMulScalar,
  kRowBroadcastAdd,
  kRelu,
  kLeakyRelu,
  kSigmoid,
  kTanh,
  kLog,
  kMean,
  kClamp,
};

inline std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMulScalar: return "mul_scalar";
    case OpKind::kRowBroadcastAdd: return "row_broadcast_add";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLog: return "log";
    case OpKind::kMean: return "mean";
    case OpKind::kClamp: return "clamp";
  }
  return "?";
}

// Scalar attributes for parameterized ops: leaky_relu uses `a` as the
// negative slope, mul_scalar uses `a` as the factor, clamp uses [a, b].
struct OpAttrs {
  double a = 0.0;
  double b = 0.0;
};

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Records a straight-line computation and replays it backwards.
//
// Nodes are appended in evaluation order, so the node vector is already a
// topological order. Every value the backward pass needs (operand values and
// the node's own output) is cached at forward time; backward() is const and
// can be replayed any number of times with identical results.
class Tape {
 public:
  // A leaf that receives a gradient from backward().
  NodeId parameter(Tensor value) {
    const NodeId id = push(OpKind::kParameter, {}, {}, std::move(value));
    parameters_.push_back(id);
    return id;
  }

  NodeId constant(Tensor value) {
    return push(OpKind::kConstant, {}, {}, std::move(value));
  }

  NodeId forward(OpKind kind, const std::vector<NodeId>& inputs, OpAttrs attrs = {}) {
    for (NodeId in : inputs) {
      if (in.index >= nodes_.size()) throw ContractError("unknown tape node");
    }
    Tensor out = evaluate(kind, inputs, attrs);
    if (!out.all_finite()) {
      throw NumericError("op #" + std::to_string(nodes_.size()) + " (" +
                         std::string(op_name(kind)) + ") produced a non-finite value");
    }
    return push(kind, inputs, attrs, std::move(out));
  }

  NodeId matmul(NodeId a, NodeId b) { return forward(OpKind::kMatmul, {a, b}); }
  NodeId add(NodeId a, NodeId b) { return forward(OpKind::kAdd, {a, b}); }
  NodeId sub(NodeId a, NodeId b) { return forward(OpKind::kSub, {a, b}); }
  NodeId mul_scalar(NodeId a, double s) {
    return forward(OpKind::kMulScalar, {a}, {s, 0.0});
  }
  NodeId row_broadcast_add(NodeId m, NodeId row) {
    return forward(OpKind::kRowBroadcastAdd, {m, row});
  }
  NodeId relu(NodeId a) { return forward(OpKind::kRelu, {a}); }
  NodeId leaky_relu(NodeId a, double alpha) {
    return forward(OpKind::kLeakyRelu, {a}, {alpha, 0.0});
  }
  NodeId sigmoid(NodeId a) { return forward(OpKind::kSigmoid, {a}); }
  NodeId tanh(NodeId a) { return forward(OpKind::kTanh, {a}); }
  NodeId log(NodeId a) { return forward(OpKind::kLog, {a}); }
  NodeId mean(NodeId a) { return forward(OpKind::kMean, {a}); }
  NodeId clamp(NodeId a, double lo, double hi) {
    return forward(OpKind::kClamp, {a}, {lo, hi});
  }

  const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  std::size_t size() const { return nodes_.size(); }
  std::span<const NodeId> parameters() const { return parameters_; }

  // Gradients of a scalar node with respect to every parameter leaf, in the
  // order the parameters were registered.
  std::vector<Tensor> backward(NodeId loss) const {
    if (loss.index >= nodes_.size()) throw ContractError("unknown tape node");
    if (nodes_[loss.index].value.size() != 1) {
      throw ContractError("backward() requires a scalar loss, got shape " +
                          shape_str(nodes_[loss.index].value.shape()));
    }
    std::vector<Tensor> grads(loss.index + 1);
    grads[loss.index] = Tensor(nodes_[loss.index].value.shape(), 1.0);
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      if (grads[i].empty() || !nodes_[i].needs_grad) continue;
      propagate(nodes_[i], grads[i], grads);
    }
    std::vector<Tensor> out;
    out.reserve(parameters_.size());
    for (NodeId p : parameters_) {
      if (p.index < grads.size() && !grads[p.index].empty()) {
        out.push_back(std::move(grads[p.index]));
      } else {
        out.emplace_back(nodes_[p.index].value.shape(), 0.0);
      }
    }
    return out;
  }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    OpAttrs attrs;
    Tensor value;
    // True when some parameter leaf is upstream of this node.
    bool needs_grad = false;
  };

  NodeId push(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs, Tensor value) {
    bool needs = kind == OpKind::kParameter;
    for (NodeId in : inputs) needs = needs || nodes_[in.index].needs_grad;
    nodes_.push_back(Node{kind, std::move(inputs), attrs, std::move(value), needs});
    return NodeId{nodes_.size() - 1};
  }

  static void require_arity(OpKind kind, std::span<const NodeId> inputs, std::size_t n) {
    if (inputs.size() != n) {
      throw ContractError(std::string(op_name(kind)) + " expects " + std::to_string(n) +
                          " inputs");
    }
  }

  template <typename F>
  static Tensor map(const Tensor& x, F f) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return out;
  }

  Tensor evaluate(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs) const {
    auto in = [&](std::size_t k) -> const Tensor& { return nodes_[inputs[k].index].value; };
    switch (kind) {
      case OpKind::kParameter:
      case OpKind::kConstant:
        throw ContractError("leaves are created with parameter() or constant()");
      case OpKind::kMatmul: {
        require_arity(kind, inputs, 2);
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
          throw DimensionError("matmul " + shape_str(a.shape()) + " by " +
                               shape_str(b.shape()));
        }
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        Tensor out({m, n});
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        double* po = out.data().data();
        for (std::size_t i = 0; i < m; ++i) {
          double* __restrict row = po + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa[i * k + p];
            if (aip == 0.0) continue;
            const double* __restrict brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
          }
        }
        return out;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        require_arity(kind, inputs, 2);
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (a.shape() != b.shape()) {
          throw DimensionError(std::string(op_name(kind)) + " " + shape_str(a.shape()) +
                               " with " + shape_str(b.shape()));
        }
        Tensor out(a.shape());
        const double sign = kind == OpKind::kAdd ? 1.0 : -1.0;
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + sign * b[i];
        return out;
      }
      case OpKind::kMulScalar:
        require_arity(kind, inputs, 1);
        return map(in(0), [s = attrs.a](double v) { return v * s; });
      case OpKind::kRowBroadcastAdd: {
        require_arity(kind, inputs, 2);
        const Tensor& m = in(0);
        const Tensor& row = in(1);
        if (m.rank() != 2 || row.size() != m.cols() ||
            !(row.rank() == 1 || (row.rank() == 2 && row.shape()[0] == 1))) {
          throw DimensionError("row_broadcast_add " + shape_str(m.shape()) + " with " +
                               shape_str(row.shape()));
        }
        Tensor out = m;
        const std::size_t c = m.cols();
        for (std::size_t i = 0; i < m.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) out.at(i, j) += row[j];
        }
        return out;
      }
      case OpKind::kRelu:
        require_arity(kind, inputs, 1);
        return map(in(0), [](double v) { return v > 0.0 ? v : 0.0; });
      case OpKind::kLeakyRelu:
        require_arity(kind, inputs, 1);
        return map(in(0), [a = attrs.a](double v) { return v > 0.0 ? v : a * v; });
      case OpKind::kSigmoid:
        require_arity(kind, inputs, 1);
        return map(in(0), stable_sigmoid);
      case OpKind::kTanh:
        require_arity(kind, inputs, 1);
        return map(in(0), [](double v) { return std::tanh(v); });
      case OpKind::kLog:
        require_arity(kind, inputs, 1);
        return map(in(0), [](double v) { return std::log(std::max(v, kLogFloor)); });
      case OpKind::kMean: {
        require_arity(kind, inputs, 1);
        const Tensor& a = in(0);
        if (a.empty()) throw DimensionError("mean of an empty tensor");
        double sum = 0.0;
        for (double v : a.data()) sum += v;
        return Tensor::scalar(sum / static_cast<double>(a.size()));
      }
      case OpKind::kClamp:
        require_arity(kind, inputs, 1);
        if (!(attrs.a <= attrs.b)) throw ContractError("clamp requires lo <= hi");
        return map(in(0), [lo = attrs.a, hi = attrs.b](double v) {
          return std::clamp(v, lo, hi);
        });
    }
    throw ContractError("unhandled op");
  }

  void accumulate(std::vector<Tensor>& grads, NodeId target, const Tensor& g) const {
    if (!nodes_[target.index].needs_grad) return;
    Tensor& slot = grads[target.index];
    if (slot.empty()) {
      slot = g;
      return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
  }

  void propagate(const Node& node, const Tensor& g, std::vector<Tensor>& grads) const {
    auto in = [&](std::size_t k) -> const Tensor& {
      return nodes_[node.inputs[k].index].value;
    };
    auto elementwise = [&](auto dfdx) {
      const Tensor& x = in(0);
      Tensor gx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * dfdx(x[i], node.value[i]);
      accumulate(grads, node.inputs[0], gx);
    };
    switch (node.kind) {
      case OpKind::kParameter:
      case OpKind::kConstant:
        return;
      case OpKind::kMatmul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        if (nodes_[node.inputs[0].index].needs_grad) {
          Tensor ga({m, k});
          const double* pg = g.data().data();
          const double* pb = b.data().data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* grow = pg + i * n;
              const double* brow = pb + p * n;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga.at(i, p) = acc;
            }
          }
          accumulate(grads, node.inputs[0], ga);
        }
        if (nodes_[node.inputs[1].index].needs_grad) {
          Tensor gb({k, n});
          const double* pa = a.data().data();
          const double* pg = g.data().data();
          double* pgb = gb.data().data();
          for (std::size_t i = 0; i < m; ++i) {
            const double* __restrict grow = pg + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = pa[i * k + p];
              if (aip == 0.0) continue;
              double* __restrict out = pgb + p * n;
              for (std::size_t j = 0; j < n; ++j) out[j] += aip * grow[j];
            }
          }
          accumulate(grads, node.inputs[1], gb);
        }
        return;
      }
      case OpKind::kAdd:
        accumulate(grads, node.inputs[0], g);
        accumulate(grads, node.inputs[1], g);
        return;
      case OpKind::kSub: {
        accumulate(grads, node.inputs[0], g);
        Tensor neg = map(g, [](double v) { return -v; });
        accumulate(grads, node.inputs[1], neg);
        return;
      }
      case OpKind::kMulScalar:
        accumulate(grads, node.inputs[0], map(g, [s = node.attrs.a](double v) { return v * s; }));
        return;
      case OpKind::kRowBroadcastAdd: {
        accumulate(grads, node.inputs[0], g);
        const Tensor& row = in(1);
        Tensor grow(row.shape());
        const std::size_t c = g.cols();
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) grow[j] += g.at(i, j);
        }
        accumulate(grads, node.inputs[1], grow);
        return;
      }
      case OpKind::kRelu:
        elementwise([](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
        return;
      case OpKind::kLeakyRelu:
        elementwise([a = node.attrs.a](double x, double) { return x > 0.0 ? 1.0 : a; });
        return;
      case OpKind::kSigmoid:
        elementwise([](double, double y) { return y * (1.0 - y); });
        return;
      case OpKind::kTanh:
        elementwise([](double, double y) { return 1.0 - y * y; });
        return;
      case OpKind::kLog:
        // Below the floor the output is constant, so the derivative is zero.
        elementwise([](double x, double) { return x >= kLogFloor ? 1.0 / x : 0.0; });
        return;
      case OpKind::kMean: {
        const Tensor& x = in(0);
        const double share = g[0] / static_cast<double>(x.size());
        accumulate(grads, node.inputs[0], Tensor(x.shape(), share));
        return;
      }
      case OpKind::kClamp:
        elementwise([lo = node.attrs.a, hi = node.attrs.b](double x, double) {
          return (x >= lo && x <= hi) ? 1.0 : 0.0;
        });
        return;
    }
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> parameters_;
};

}  // namespace mgmd
