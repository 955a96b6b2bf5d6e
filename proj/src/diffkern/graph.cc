// Copyright (c) 2026 SASR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sasr/diffkern/graph.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sasr/diffkern/kernels.h"

namespace sasr {

std::string ShapeToString(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

const char* OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParam: return "param";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kExp: return "exp";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kSlice: return "slice";
    case OpKind::kConcat: return "concat";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kSum: return "sum";
    case OpKind::kLstm: return "lstm";
    case OpKind::kWindowAttention: return "window_attention";
    case OpKind::kCustom: return "custom";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

NodeId Graph::Push(Node node) {
  for (NodeId id : node.inputs) CheckId(id);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Graph::CheckId(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw std::out_of_range("graph node id " + std::to_string(id) +
                            " does not exist yet");
  }
}

NodeId Graph::Input(const std::string& name) {
  Node n;
  n.kind = OpKind::kInput;
  n.name = name;
  return Push(std::move(n));
}

NodeId Graph::Param(const std::string& name) {
  Node n;
  n.kind = OpKind::kParam;
  n.name = name;
  return Push(std::move(n));
}

namespace {

Node Unary(OpKind kind, NodeId a) {
  Node n;
  n.kind = kind;
  n.inputs = {a};
  return n;
}

Node Binary(OpKind kind, NodeId a, NodeId b) {
  Node n;
  n.kind = kind;
  n.inputs = {a, b};
  return n;
}

}  // namespace

NodeId Graph::MatMul(NodeId a, NodeId b) {
  return Push(Binary(OpKind::kMatMul, a, b));
}
NodeId Graph::Add(NodeId a, NodeId b) { return Push(Binary(OpKind::kAdd, a, b)); }
NodeId Graph::Mul(NodeId a, NodeId b) { return Push(Binary(OpKind::kMul, a, b)); }
NodeId Graph::Scale(NodeId a, double factor) {
  Node n = Unary(OpKind::kScale, a);
  n.scale = factor;
  return Push(std::move(n));
}
NodeId Graph::Exp(NodeId a) { return Push(Unary(OpKind::kExp, a)); }
NodeId Graph::Sigmoid(NodeId a) { return Push(Unary(OpKind::kSigmoid, a)); }
NodeId Graph::Tanh(NodeId a) { return Push(Unary(OpKind::kTanh, a)); }
NodeId Graph::Relu(NodeId a) { return Push(Unary(OpKind::kRelu, a)); }
NodeId Graph::LogSoftmax(NodeId a) {
  return Push(Unary(OpKind::kLogSoftmax, a));
}
NodeId Graph::LayerNorm(NodeId x, NodeId gamma, NodeId beta, double eps) {
  Node n;
  n.kind = OpKind::kLayerNorm;
  n.inputs = {x, gamma, beta};
  n.eps = eps;
  return Push(std::move(n));
}
NodeId Graph::Conv1d(NodeId x, NodeId w, NodeId b, int kernel, int stride) {
  if (kernel <= 0 || stride <= 0) {
    throw std::invalid_argument("conv1d kernel and stride must be positive");
  }
  Node n;
  n.kind = OpKind::kConv1d;
  n.inputs = {x, w, b};
  n.kernel = kernel;
  n.stride = stride;
  return Push(std::move(n));
}
NodeId Graph::Slice(NodeId x, int axis, int begin, int end) {
  if (begin < 0 || end <= begin) {
    throw std::invalid_argument("slice range must be non-empty");
  }
  Node n = Unary(OpKind::kSlice, x);
  n.axis = axis;
  n.begin = begin;
  n.end = end;
  return Push(std::move(n));
}
NodeId Graph::Concat(const std::vector<NodeId>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat of nothing");
  Node n;
  n.kind = OpKind::kConcat;
  n.inputs = xs;
  n.axis = axis;
  return Push(std::move(n));
}
NodeId Graph::Transpose(NodeId x) { return Push(Unary(OpKind::kTranspose, x)); }
NodeId Graph::Sum(NodeId x) { return Push(Unary(OpKind::kSum, x)); }
NodeId Graph::Lstm(NodeId x, NodeId w_ih, NodeId w_hh, NodeId b) {
  Node n;
  n.kind = OpKind::kLstm;
  n.inputs = {x, w_ih, w_hh, b};
  return Push(std::move(n));
}
NodeId Graph::WindowAttention(NodeId q, NodeId k, NodeId v, int heads,
                              int radius) {
  if (heads <= 0) throw std::invalid_argument("attention needs heads > 0");
  Node n;
  n.kind = OpKind::kWindowAttention;
  n.inputs = {q, k, v};
  n.heads = heads;
  n.radius = radius;
  return Push(std::move(n));
}
NodeId Graph::Custom(std::shared_ptr<const CustomOp> op,
                     const std::vector<NodeId>& inputs) {
  Node n;
  n.kind = OpKind::kCustom;
  n.inputs = inputs;
  n.custom = std::move(op);
  return Push(std::move(n));
}

void Graph::SetOutput(const std::string& name, NodeId id) {
  CheckId(id);
  for (auto& [k, v] : outputs_) {
    if (k == name) {
      v = id;
      return;
    }
  }
  outputs_.emplace_back(name, id);
}

NodeId Graph::output(const std::string& name) const {
  for (const auto& [k, v] : outputs_) {
    if (k == name) return v;
  }
  throw std::out_of_range("graph has no output named '" + name + "'");
}

// ---------------------------------------------------------------------------
// Forward

namespace {

[[noreturn]] void Fail(NodeId id, const Node& node, const std::string& msg) {
  throw ShapeError("node " + std::to_string(id) + " (" +
                   OpKindName(node.kind) + "): " + msg);
}

void Expect(bool ok, NodeId id, const Node& node, const std::string& msg) {
  if (!ok) Fail(id, node, msg);
}

template <typename T>
int WindowSpan(int frames, int radius) {
  return radius < 0 ? frames : std::min(frames, 2 * radius + 1);
}

inline void WindowBounds(int t, int frames, int radius, int* lo, int* hi) {
  if (radius < 0) {
    *lo = 0;
    *hi = frames - 1;
  } else {
    *lo = std::max(0, t - radius);
    *hi = std::min(frames - 1, t + radius);
  }
}

template <typename T>
Tensor<T> ForwardNode(NodeId id, const Node& node,
                      const std::vector<const Tensor<T>*>& in,
                      std::vector<Tensor<T>>* aux) {
  switch (node.kind) {
    case OpKind::kMatMul: {
      const auto& a = *in[0];
      const auto& b = *in[1];
      Expect(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), id, node,
             "cannot multiply " + ShapeToString(a.shape()) + " by " +
                 ShapeToString(b.shape()));
      Tensor<T> out({a.dim(0), b.dim(1)});
      kernels::Gemm(a.data(), a.dim(1), b.data(), out.data(), a.dim(0),
                    a.dim(1), b.dim(1), false);
      return out;
    }
    case OpKind::kAdd: {
      const auto& a = *in[0];
      const auto& b = *in[1];
      Tensor<T> out = a;
      if (a.shape() == b.shape()) {
        for (size_t i = 0; i < out.size(); ++i) out[i] += b[i];
      } else {
        Expect(b.rank() == 1 && b.dim(0) == a.cols(), id, node,
               "cannot add " + ShapeToString(b.shape()) + " to " +
                   ShapeToString(a.shape()));
        kernels::AddBiasRows(out.data(), b.data(),
                             static_cast<int>(a.size() / a.cols()), a.cols());
      }
      return out;
    }
    case OpKind::kMul: {
      const auto& a = *in[0];
      const auto& b = *in[1];
      Expect(a.shape() == b.shape(), id, node,
             "elementwise product of " + ShapeToString(a.shape()) + " and " +
                 ShapeToString(b.shape()));
      Tensor<T> out = a;
      for (size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
      return out;
    }
    case OpKind::kScale: {
      Tensor<T> out = *in[0];
      const T s = static_cast<T>(node.scale);
      for (auto& v : out.values()) v *= s;
      return out;
    }
    case OpKind::kExp: {
      Tensor<T> out = *in[0];
      for (auto& v : out.values()) v = std::exp(v);
      return out;
    }
    case OpKind::kSigmoid: {
      Tensor<T> out = *in[0];
      for (auto& v : out.values()) v = kernels::Sigmoid(v);
      return out;
    }
    case OpKind::kTanh: {
      Tensor<T> out = *in[0];
      for (auto& v : out.values()) v = std::tanh(v);
      return out;
    }
    case OpKind::kRelu: {
      Tensor<T> out = *in[0];
      for (auto& v : out.values()) v = v > T(0) ? v : T(0);
      return out;
    }
    case OpKind::kLogSoftmax: {
      const auto& x = *in[0];
      Tensor<T> out(x.shape());
      const int n = x.cols();
      const int rows = static_cast<int>(x.size() / n);
      for (int r = 0; r < rows; ++r) {
        kernels::LogSoftmaxRow(x.data() + static_cast<size_t>(r) * n,
                               out.data() + static_cast<size_t>(r) * n, n);
      }
      return out;
    }
    case OpKind::kLayerNorm: {
      const auto& x = *in[0];
      const int n = x.cols();
      Expect(static_cast<int>(in[1]->size()) == n &&
                 static_cast<int>(in[2]->size()) == n,
             id, node, "layer norm gain/bias must match last dim");
      const int rows = static_cast<int>(x.size() / n);
      Tensor<T> out(x.shape());
      aux->emplace_back(x.shape());
      aux->emplace_back(std::vector<int>{rows});
      auto& xhat = (*aux)[0];
      auto& rstd = (*aux)[1];
      for (int r = 0; r < rows; ++r) {
        const size_t off = static_cast<size_t>(r) * n;
        kernels::LayerNormRow(x.data() + off, in[1]->data(), in[2]->data(),
                              static_cast<T>(node.eps), n, out.data() + off,
                              xhat.data() + off, rstd.data() + r);
      }
      return out;
    }
    case OpKind::kConv1d: {
      const auto& x = *in[0];
      const auto& w = *in[1];
      const auto& b = *in[2];
      Expect(x.rank() == 2 && w.rank() == 2, id, node,
             "conv1d expects matrices");
      const int frames = x.dim(0);
      const int ch = x.dim(1);
      const int k = node.kernel;
      const int s = node.stride;
      Expect(w.dim(0) == k * ch, id, node,
             "conv1d weight rows must equal kernel * channels");
      Expect(static_cast<int>(b.size()) == w.dim(1), id, node,
             "conv1d bias size mismatch");
      Expect(frames >= k, id, node,
             "sequence of " + std::to_string(frames) +
                 " frames is shorter than the kernel");
      const int out_frames = (frames - k) / s + 1;
      Tensor<T> out({out_frames, w.dim(1)});
      kernels::Gemm(x.data(), s * ch, w.data(), out.data(), out_frames, k * ch,
                    w.dim(1), false);
      kernels::AddBiasRows(out.data(), b.data(), out_frames, w.dim(1));
      return out;
    }
    case OpKind::kSlice: {
      const auto& x = *in[0];
      const int axis = node.axis;
      Expect(axis >= 0 && axis < x.rank() && x.rank() <= 2, id, node,
             "bad slice axis");
      Expect(node.end <= x.dim(axis), id, node, "slice out of range");
      if (x.rank() == 1) {
        return Tensor<T>({node.end - node.begin},
                         std::vector<T>(x.data() + node.begin,
                                        x.data() + node.end));
      }
      const int rows = x.dim(0);
      const int cols = x.dim(1);
      if (axis == 0) {
        return Tensor<T>(
            {node.end - node.begin, cols},
            std::vector<T>(x.data() + static_cast<size_t>(node.begin) * cols,
                           x.data() + static_cast<size_t>(node.end) * cols));
      }
      const int w = node.end - node.begin;
      Tensor<T> out({rows, w});
      for (int r = 0; r < rows; ++r) {
        std::copy(x.row(r) + node.begin, x.row(r) + node.end, out.row(r));
      }
      return out;
    }
    case OpKind::kConcat: {
      const auto& first = *in[0];
      const int axis = node.axis;
      Expect(axis >= 0 && axis < first.rank() && first.rank() <= 2, id, node,
             "bad concat axis");
      std::vector<int> shape = first.shape();
      int total = 0;
      for (const auto* t : in) {
        Expect(t->rank() == first.rank(), id, node, "concat rank mismatch");
        for (int d = 0; d < first.rank(); ++d) {
          if (d != axis) {
            Expect(t->dim(d) == first.dim(d), id, node,
                   "concat shape mismatch");
          }
        }
        total += t->dim(axis);
      }
      shape[axis] = total;
      Tensor<T> out(shape);
      if (axis == 0) {
        size_t off = 0;
        for (const auto* t : in) {
          std::copy(t->data(), t->data() + t->size(), out.data() + off);
          off += t->size();
        }
      } else {
        const int rows = first.dim(0);
        int col = 0;
        for (const auto* t : in) {
          for (int r = 0; r < rows; ++r) {
            std::copy(t->row(r), t->row(r) + t->dim(1), out.row(r) + col);
          }
          col += t->dim(1);
        }
      }
      return out;
    }
    case OpKind::kTranspose: {
      const auto& x = *in[0];
      Expect(x.rank() == 2, id, node, "transpose expects a matrix");
      Tensor<T> out({x.dim(1), x.dim(0)});
      for (int r = 0; r < x.dim(0); ++r) {
        for (int c = 0; c < x.dim(1); ++c) out.at(c, r) = x.at(r, c);
      }
      return out;
    }
    case OpKind::kSum: {
      T s = 0;
      for (T v : in[0]->values()) s += v;
      return Tensor<T>::Scalar(s);
    }
    case OpKind::kLstm: {
      const auto& x = *in[0];
      const auto& w_ih = *in[1];
      const auto& w_hh = *in[2];
      const auto& b = *in[3];
      Expect(x.rank() == 2 && w_ih.rank() == 2 && w_hh.rank() == 2, id, node,
             "lstm expects matrices");
      const int frames = x.dim(0);
      const int hidden = w_hh.dim(0);
      const int g4 = 4 * hidden;
      Expect(w_ih.dim(0) == x.dim(1) && w_ih.dim(1) == g4 &&
                 w_hh.dim(1) == g4 && static_cast<int>(b.size()) == g4,
             id, node, "lstm weight shapes inconsistent with input");
      Tensor<T> gates({frames, g4});
      kernels::Gemm(x.data(), x.dim(1), w_ih.data(), gates.data(), frames,
                    x.dim(1), g4, false);
      kernels::AddBiasRows(gates.data(), b.data(), frames, g4);
      Tensor<T> out({frames, hidden});
      Tensor<T> cells({frames, hidden});
      std::vector<T> h(hidden, T(0));
      std::vector<T> c(hidden, T(0));
      for (int t = 0; t < frames; ++t) {
        kernels::LstmStep(gates.row(t), w_hh.data(), hidden, h.data(),
                          c.data());
        std::copy(h.begin(), h.end(), out.row(t));
        std::copy(c.begin(), c.end(), cells.row(t));
      }
      aux->push_back(std::move(gates));
      aux->push_back(std::move(cells));
      return out;
    }
    case OpKind::kWindowAttention: {
      const auto& q = *in[0];
      const auto& k = *in[1];
      const auto& v = *in[2];
      Expect(q.rank() == 2 && q.shape() == k.shape() && q.shape() == v.shape(),
             id, node, "attention q/k/v shapes differ");
      const int frames = q.dim(0);
      const int width = q.dim(1);
      Expect(width % node.heads == 0, id, node,
             "attention width not divisible by heads");
      const int span = WindowSpan<T>(frames, node.radius);
      Tensor<T> out({frames, width});
      Tensor<T> probs({frames, node.heads * span});
      for (int t = 0; t < frames; ++t) {
        int lo, hi;
        WindowBounds(t, frames, node.radius, &lo, &hi);
        kernels::AttendRow(q.row(t), k.data(), v.data(), width, node.heads, lo,
                           hi, out.row(t), probs.row(t));
      }
      aux->push_back(std::move(probs));
      return out;
    }
    case OpKind::kCustom: {
      return node.custom->Forward(
          std::span<const Tensor<T>* const>(in.data(), in.size()), aux);
    }
    case OpKind::kInput:
    case OpKind::kParam:
      break;
  }
  Fail(id, node, "not a computed op");
}

}  // namespace

template <typename T>
Evaluation<T> Evaluate(const Graph& graph, const TensorMap<T>& inputs,
                       const TensorMap<T>& params) {
  const auto& nodes = graph.nodes();
  Evaluation<T> eval;
  eval.graph = &graph;
  eval.owned.resize(nodes.size());
  eval.values.assign(nodes.size(), nullptr);
  eval.aux.resize(nodes.size());
  std::vector<const Tensor<T>*> in;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const Node& node = nodes[i];
    const NodeId id = static_cast<NodeId>(i);
    if (node.kind == OpKind::kInput || node.kind == OpKind::kParam) {
      const auto& src = node.kind == OpKind::kInput ? inputs : params;
      auto it = src.find(node.name);
      if (it == src.end()) {
        throw ShapeError(std::string("missing ") +
                         (node.kind == OpKind::kInput ? "input" : "param") +
                         " '" + node.name + "'");
      }
      eval.values[i] = &it->second;
      continue;
    }
    in.clear();
    for (NodeId src : node.inputs) in.push_back(eval.values[src]);
    eval.owned[i] = ForwardNode<T>(id, node, in, &eval.aux[i]);
    for (T v : eval.owned[i].values()) {
      if (!std::isfinite(v)) {
        throw NonFiniteError(id, "node " + std::to_string(id) + " (" +
                                     OpKindName(node.kind) +
                                     ") produced a non-finite value");
      }
    }
    eval.values[i] = &eval.owned[i];
  }
  return eval;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

template <typename T>
class GradStore {
 public:
  explicit GradStore(const Evaluation<T>& eval)
      : eval_(eval), grads_(eval.values.size()) {}

  Tensor<T>& at(NodeId id) {
    if (grads_[id].empty()) grads_[id] = Tensor<T>(eval_.value(id).shape());
    return grads_[id];
  }
  bool has(NodeId id) const { return !grads_[id].empty(); }
  const Tensor<T>& get(NodeId id) const { return grads_[id]; }
  Tensor<T> take(NodeId id) { return std::move(grads_[id]); }

 private:
  const Evaluation<T>& eval_;
  std::vector<Tensor<T>> grads_;
};

template <typename T>
void BackwardNode(NodeId id, const Node& node, const Evaluation<T>& eval,
                  const Tensor<T>& g, GradStore<T>* grads) {
  const Tensor<T>& y = eval.value(id);
  auto x = [&](int i) -> const Tensor<T>& {
    return eval.value(node.inputs[i]);
  };
  auto gin = [&](int i) -> Tensor<T>& { return grads->at(node.inputs[i]); };
  const auto& aux = eval.aux[id];

  switch (node.kind) {
    case OpKind::kMatMul: {
      const auto& a = x(0);
      const auto& b = x(1);
      const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
      kernels::GemmTransB(g.data(), b.data(), gin(0).data(), m, n, k, true);
      kernels::GemmTransAAccumulate(a.data(), k, g.data(), gin(1).data(), m, k,
                                    n);
      return;
    }
    case OpKind::kAdd: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      const auto& b = x(1);
      auto& gb = gin(1);
      if (b.shape() == x(0).shape()) {
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      } else {
        const int n = g.cols();
        const size_t rows = g.size() / n;
        for (size_t r = 0; r < rows; ++r) {
          for (int c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
      }
      return;
    }
    case OpKind::kMul: {
      const auto& a = x(0);
      const auto& b = x(1);
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      auto& gb = gin(1);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      return;
    }
    case OpKind::kScale: {
      auto& ga = gin(0);
      const T s = static_cast<T>(node.scale);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
      return;
    }
    case OpKind::kExp: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      return;
    }
    case OpKind::kSigmoid: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1 - y[i]);
      return;
    }
    case OpKind::kTanh: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1 - y[i] * y[i]);
      return;
    }
    case OpKind::kRelu: {
      auto& ga = gin(0);
      const auto& a = x(0);
      for (size_t i = 0; i < g.size(); ++i) {
        if (a[i] > T(0)) ga[i] += g[i];
      }
      return;
    }
    case OpKind::kLogSoftmax: {
      auto& ga = gin(0);
      const int n = y.cols();
      const size_t rows = y.size() / n;
      for (size_t r = 0; r < rows; ++r) {
        const T* gr = g.data() + r * n;
        const T* yr = y.data() + r * n;
        T s = 0;
        for (int c = 0; c < n; ++c) s += gr[c];
        T* out = ga.data() + r * n;
        for (int c = 0; c < n; ++c) out[c] += gr[c] - std::exp(yr[c]) * s;
      }
      return;
    }
    case OpKind::kLayerNorm: {
      const auto& gamma = x(1);
      const auto& xhat = aux[0];
      const auto& rstd = aux[1];
      auto& gx = gin(0);
      auto& gg = gin(1);
      auto& gb = gin(2);
      const int n = xhat.cols();
      const size_t rows = xhat.size() / n;
      std::vector<T> dxhat(n);
      for (size_t r = 0; r < rows; ++r) {
        const T* gr = g.data() + r * n;
        const T* hr = xhat.data() + r * n;
        T mean_d = 0, mean_dh = 0;
        for (int c = 0; c < n; ++c) {
          gg[c] += gr[c] * hr[c];
          gb[c] += gr[c];
          dxhat[c] = gr[c] * gamma[c];
          mean_d += dxhat[c];
          mean_dh += dxhat[c] * hr[c];
        }
        mean_d /= static_cast<T>(n);
        mean_dh /= static_cast<T>(n);
        T* out = gx.data() + r * n;
        for (int c = 0; c < n; ++c) {
          out[c] += rstd[r] * (dxhat[c] - mean_d - hr[c] * mean_dh);
        }
      }
      return;
    }
    case OpKind::kConv1d: {
      const auto& in = x(0);
      const auto& w = x(1);
      const int ch = in.dim(1);
      const int k = node.kernel;
      const int s = node.stride;
      const int out_frames = y.dim(0);
      const int out_ch = y.dim(1);
      kernels::GemmTransAAccumulate(in.data(), s * ch, g.data(),
                                    gin(1).data(), out_frames, k * ch, out_ch);
      auto& gb = gin(2);
      for (int u = 0; u < out_frames; ++u) {
        for (int c = 0; c < out_ch; ++c) gb[c] += g.at(u, c);
      }
      auto& gx = gin(0);
      std::vector<T> window(static_cast<size_t>(k) * ch);
      for (int u = 0; u < out_frames; ++u) {
        kernels::GemmTransB(g.row(u), w.data(), window.data(), 1, out_ch,
                            k * ch, false);
        T* dst = gx.row(u * s);
        for (size_t i = 0; i < window.size(); ++i) dst[i] += window[i];
      }
      return;
    }
    case OpKind::kSlice: {
      auto& ga = gin(0);
      const auto& a = x(0);
      if (a.rank() == 1) {
        for (int i = node.begin; i < node.end; ++i) ga[i] += g[i - node.begin];
      } else if (node.axis == 0) {
        const size_t off = static_cast<size_t>(node.begin) * a.dim(1);
        for (size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
      } else {
        for (int r = 0; r < a.dim(0); ++r) {
          for (int c = node.begin; c < node.end; ++c) {
            ga.at(r, c) += g.at(r, c - node.begin);
          }
        }
      }
      return;
    }
    case OpKind::kConcat: {
      if (node.axis == 0) {
        size_t off = 0;
        for (size_t i = 0; i < node.inputs.size(); ++i) {
          auto& gi = gin(static_cast<int>(i));
          for (size_t j = 0; j < gi.size(); ++j) gi[j] += g[off + j];
          off += gi.size();
        }
      } else {
        int col = 0;
        for (size_t i = 0; i < node.inputs.size(); ++i) {
          auto& gi = gin(static_cast<int>(i));
          for (int r = 0; r < gi.dim(0); ++r) {
            for (int c = 0; c < gi.dim(1); ++c) gi.at(r, c) += g.at(r, col + c);
          }
          col += gi.dim(1);
        }
      }
      return;
    }
    case OpKind::kTranspose: {
      auto& ga = gin(0);
      for (int r = 0; r < ga.dim(0); ++r) {
        for (int c = 0; c < ga.dim(1); ++c) ga.at(r, c) += g.at(c, r);
      }
      return;
    }
    case OpKind::kSum: {
      auto& ga = gin(0);
      for (auto& v : ga.values()) v += g[0];
      return;
    }
    case OpKind::kLstm: {
      const auto& in = x(0);
      const auto& w_ih = x(1);
      const auto& w_hh = x(2);
      const auto& gates = aux[0];
      const auto& cells = aux[1];
      const int frames = in.dim(0);
      const int dim = in.dim(1);
      const int hidden = w_hh.dim(0);
      const int g4 = 4 * hidden;
      Tensor<T> dz({frames, g4});
      std::vector<T> dh_next(hidden, T(0));
      std::vector<T> dc_next(hidden, T(0));
      for (int t = frames - 1; t >= 0; --t) {
        const T* gt = gates.row(t);
        const T* ct = cells.row(t);
        T* dzt = dz.row(t);
        for (int j = 0; j < hidden; ++j) {
          const T ig = gt[j], fg = gt[hidden + j], gg = gt[2 * hidden + j],
                  og = gt[3 * hidden + j];
          const T c_prev = t > 0 ? cells.at(t - 1, j) : T(0);
          const T tc = std::tanh(ct[j]);
          const T dh = g.at(t, j) + dh_next[j];
          const T d_o = dh * tc;
          const T dc = dh * og * (1 - tc * tc) + dc_next[j];
          dzt[j] = dc * gg * ig * (1 - ig);
          dzt[hidden + j] = dc * c_prev * fg * (1 - fg);
          dzt[2 * hidden + j] = dc * ig * (1 - gg * gg);
          dzt[3 * hidden + j] = d_o * og * (1 - og);
          dc_next[j] = dc * fg;
        }
        kernels::GemmTransB(dzt, w_hh.data(), dh_next.data(), 1, g4, hidden,
                            false);
      }
      kernels::GemmTransB(dz.data(), w_ih.data(), gin(0).data(), frames, g4,
                          dim, true);
      kernels::GemmTransAAccumulate(in.data(), dim, dz.data(), gin(1).data(),
                                    frames, dim, g4);
      if (frames > 1) {
        // h_{t-1} for t >= 1 are rows 0..T-2 of the output.
        kernels::GemmTransAAccumulate(y.data(), hidden, dz.row(1),
                                      gin(2).data(), frames - 1, hidden, g4);
      }
      auto& gb = gin(3);
      for (int t = 0; t < frames; ++t) {
        const T* dzt = dz.row(t);
        for (int j = 0; j < g4; ++j) gb[j] += dzt[j];
      }
      return;
    }
    case OpKind::kWindowAttention: {
      const auto& q = x(0);
      const auto& k = x(1);
      const auto& v = x(2);
      const auto& probs = aux[0];
      auto& gq = gin(0);
      auto& gk = gin(1);
      auto& gv = gin(2);
      const int frames = q.dim(0);
      const int width = q.dim(1);
      const int heads = node.heads;
      const int hd = width / heads;
      const T scale = T(1) / std::sqrt(static_cast<T>(hd));
      std::vector<T> da;
      for (int t = 0; t < frames; ++t) {
        int lo, hi;
        WindowBounds(t, frames, node.radius, &lo, &hi);
        const int span = hi - lo + 1;
        da.assign(span, T(0));
        for (int h = 0; h < heads; ++h) {
          const T* p = probs.row(t) + h * span;
          const T* gt = g.row(t) + h * hd;
          T dot = 0;
          for (int j = 0; j < span; ++j) {
            const T* vj = v.row(lo + j) + h * hd;
            T* gvj = gv.row(lo + j) + h * hd;
            T s = 0;
            for (int d = 0; d < hd; ++d) {
              s += gt[d] * vj[d];
              gvj[d] += p[j] * gt[d];
            }
            da[j] = s;
            dot += p[j] * s;
          }
          const T* qt = q.row(t) + h * hd;
          T* gqt = gq.row(t) + h * hd;
          for (int j = 0; j < span; ++j) {
            const T ds = p[j] * (da[j] - dot) * scale;
            const T* kj = k.row(lo + j) + h * hd;
            T* gkj = gk.row(lo + j) + h * hd;
            for (int d = 0; d < hd; ++d) {
              gqt[d] += ds * kj[d];
              gkj[d] += ds * qt[d];
            }
          }
        }
      }
      return;
    }
    case OpKind::kCustom: {
      std::vector<const Tensor<T>*> in;
      std::vector<Tensor<T>*> gi;
      for (size_t i = 0; i < node.inputs.size(); ++i) {
        in.push_back(&x(static_cast<int>(i)));
        gi.push_back(&gin(static_cast<int>(i)));
      }
      node.custom->Backward(
          std::span<const Tensor<T>* const>(in.data(), in.size()), y, aux, g,
          std::span<Tensor<T>* const>(gi.data(), gi.size()));
      return;
    }
    case OpKind::kInput:
    case OpKind::kParam:
      return;
  }
}

}  // namespace

template <typename T>
Gradients<T> Backward(const Evaluation<T>& eval, const std::string& seed) {
  const Graph& graph = *eval.graph;
  const NodeId seed_id = graph.output(seed);
  if (eval.value(seed_id).size() != 1) {
    throw ShapeError("gradient seed '" + seed + "' is not scalar: " +
                     ShapeToString(eval.value(seed_id).shape()));
  }
  const auto& nodes = graph.nodes();
  GradStore<T> grads(eval);
  grads.at(seed_id)[0] = T(1);
  for (NodeId id = seed_id; id >= 0; --id) {
    const Node& node = nodes[id];
    if (!grads.has(id)) continue;
    if (node.kind == OpKind::kInput || node.kind == OpKind::kParam) continue;
    BackwardNode(id, node, eval, grads.get(id), &grads);
  }
  Gradients<T> out;
  for (NodeId id = 0; id < static_cast<NodeId>(nodes.size()); ++id) {
    const Node& node = nodes[id];
    if (node.kind != OpKind::kInput && node.kind != OpKind::kParam) continue;
    auto& dst = node.kind == OpKind::kParam ? out.params : out.inputs;
    Tensor<T> g = grads.has(id) ? grads.take(id)
                                : Tensor<T>(eval.value(id).shape());
    auto it = dst.find(node.name);
    if (it == dst.end()) {
      dst.emplace(node.name, std::move(g));
    } else {
      // The same named tensor referenced by several nodes.
      for (size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
  }
  return out;
}

template <typename T>
Gradients<T> Gradient(const Graph& graph, const TensorMap<T>& inputs,
                      const TensorMap<T>& params, const std::string& seed) {
  Evaluation<T> eval = Evaluate(graph, inputs, params);
  return Backward(eval, seed);
}

template Evaluation<float> Evaluate(const Graph&, const TensorMap<float>&,
                                    const TensorMap<float>&);
template Evaluation<double> Evaluate(const Graph&, const TensorMap<double>&,
                                     const TensorMap<double>&);
template Gradients<float> Backward(const Evaluation<float>&,
                                   const std::string&);
template Gradients<double> Backward(const Evaluation<double>&,
                                    const std::string&);
template Gradients<float> Gradient(const Graph&, const TensorMap<float>&,
                                   const TensorMap<float>&, const std::string&);
template Gradients<double> Gradient(const Graph&, const TensorMap<double>&,
                                    const TensorMap<double>&,
                                    const std::string&);

}  // namespace sasr
