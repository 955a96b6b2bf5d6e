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

#ifndef SASR_DIFFKERN_GRAPH_H_
#define SASR_DIFFKERN_GRAPH_H_

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sasr/diffkern/tensor.h"

namespace sasr {

using NodeId = int;

enum class OpKind {
  kInput,
  kParam,
  kMatMul,
  kAdd,
  kMul,
  kScale,
  kExp,
  kSigmoid,
  kTanh,
  kRelu,
  kLogSoftmax,
  kLayerNorm,
  kConv1d,
  kSlice,
  kConcat,
  kTranspose,
  kSum,
  kLstm,
  kWindowAttention,
  kCustom,
};

const char* OpKindName(OpKind kind);

// Raised when a forward op produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(NodeId node, const std::string& what)
      : std::runtime_error(what), node_(node) {}
  NodeId node() const { return node_; }

 private:
  NodeId node_;
};

// Extension point for ops owned by other modules (the CTC loss lives with
// the losses, not here). Implementations must be stateless and thread-safe.
// aux is scratch the forward pass may fill for its own backward pass.
class CustomOp {
 public:
  virtual ~CustomOp() = default;
  virtual std::string name() const = 0;

  virtual TensorF Forward(std::span<const TensorF* const> in,
                          std::vector<TensorF>* aux) const = 0;
  virtual TensorD Forward(std::span<const TensorD* const> in,
                          std::vector<TensorD>* aux) const = 0;

  // grad_in[i] is pre-sized like in[i] and must be accumulated into.
  virtual void Backward(std::span<const TensorF* const> in, const TensorF& out,
                        const std::vector<TensorF>& aux,
                        const TensorF& grad_out,
                        std::span<TensorF* const> grad_in) const = 0;
  virtual void Backward(std::span<const TensorD* const> in, const TensorD& out,
                        const std::vector<TensorD>& aux,
                        const TensorD& grad_out,
                        std::span<TensorD* const> grad_in) const = 0;
};

struct Node {
  OpKind kind = OpKind::kInput;
  std::vector<NodeId> inputs;
  std::string name;  // for kInput / kParam
  int axis = 0;
  int begin = 0;
  int end = 0;
  int kernel = 0;
  int stride = 1;
  int heads = 1;
  int radius = -1;  // attention window; -1 attends over the whole sequence
  double scale = 1.0;
  double eps = 1e-5;
  std::shared_ptr<const CustomOp> custom;
};

// A computation recorded as a list of nodes. Nodes can only refer to nodes
// created before them, so insertion order is a topological order.
class Graph {
 public:
  NodeId Input(const std::string& name);
  NodeId Param(const std::string& name);

  NodeId MatMul(NodeId a, NodeId b);
  // Same shapes, or b a vector broadcast over the rows of a.
  NodeId Add(NodeId a, NodeId b);
  NodeId Mul(NodeId a, NodeId b);
  NodeId Scale(NodeId a, double factor);
  NodeId Exp(NodeId a);
  NodeId Sigmoid(NodeId a);
  NodeId Tanh(NodeId a);
  NodeId Relu(NodeId a);
  NodeId LogSoftmax(NodeId a);
  NodeId LayerNorm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);
  // Valid (unpadded) convolution along time: x is T x C, w is (K*C) x O,
  // b has O entries.
  NodeId Conv1d(NodeId x, NodeId w, NodeId b, int kernel, int stride);
  NodeId Slice(NodeId x, int axis, int begin, int end);
  NodeId Concat(const std::vector<NodeId>& xs, int axis);
  NodeId Transpose(NodeId x);
  NodeId Sum(NodeId x);
  // Single LSTM layer over a T x D sequence, zero initial state, gate order
  // (i, f, g, o). w_ih is D x 4H, w_hh is H x 4H, b has 4H entries.
  NodeId Lstm(NodeId x, NodeId w_ih, NodeId w_hh, NodeId b);
  // Multi-head dot-product attention where frame t attends to frames
  // t-radius..t+radius, truncated at the sequence edges.
  NodeId WindowAttention(NodeId q, NodeId k, NodeId v, int heads, int radius);
  NodeId Custom(std::shared_ptr<const CustomOp> op,
                const std::vector<NodeId>& inputs);

  void SetOutput(const std::string& name, NodeId id);
  NodeId output(const std::string& name) const;
  const std::vector<std::pair<std::string, NodeId>>& outputs() const {
    return outputs_;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  size_t size() const { return nodes_.size(); }

 private:
  NodeId Push(Node node);
  void CheckId(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, NodeId>> outputs_;
};

// Activations of one evaluation. Input and parameter nodes alias the
// caller's tensors, which must outlive this object.
template <typename T>
struct Evaluation {
  Evaluation() = default;
  Evaluation(const Evaluation&) = delete;
  Evaluation& operator=(const Evaluation&) = delete;
  Evaluation(Evaluation&&) noexcept = default;
  Evaluation& operator=(Evaluation&&) noexcept = default;

  const Tensor<T>& value(NodeId id) const { return *values.at(id); }
  const Tensor<T>& output(const std::string& name) const {
    return value(graph->output(name));
  }

  const Graph* graph = nullptr;
  std::vector<Tensor<T>> owned;  // sized to the graph up front, never grows
  std::vector<const Tensor<T>*> values;
  // Per-node scratch saved by the forward pass for the backward pass.
  std::vector<std::vector<Tensor<T>>> aux;
};

template <typename T>
struct Gradients {
  TensorMap<T> params;
  TensorMap<T> inputs;
};

// Runs the graph forward. Throws ShapeError on inconsistent shapes and
// NonFiniteError naming the node when an op produces NaN or Inf.
template <typename T>
Evaluation<T> Evaluate(const Graph& graph, const TensorMap<T>& inputs,
                       const TensorMap<T>& params);

// Reverse pass seeded with d(seed)/d(seed) = 1. The seed output must hold
// exactly one value. Parameters the seed does not depend on get zeros.
template <typename T>
Gradients<T> Backward(const Evaluation<T>& eval, const std::string& seed);

// Evaluate followed by Backward.
template <typename T>
Gradients<T> Gradient(const Graph& graph, const TensorMap<T>& inputs,
                      const TensorMap<T>& params, const std::string& seed);

}  // namespace sasr

#endif  // SASR_DIFFKERN_GRAPH_H_
