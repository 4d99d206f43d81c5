// Copyright 2026 The fp4lab Authors
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

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fp4lab/tensor.hpp"

namespace fp4lab::ad {

/// Handle into a Graph's node list.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Index-mapped reshuffle: out[i] = idx[i] < 0 ? 0 : in[idx[i]].
/// Covers transposes, layout permutes, im2col (with -1 for padding taps),
/// patch/window/roll rearrangements. Its adjoint is a scatter-add.
struct GatherPlan {
  Shape out_shape;
  Shape in_shape;
  std::vector<int64_t> src;  // one entry per output element
};

/// Scatter-add: out[dst[i]] += in[i] (entries < 0 are dropped). Forward op
/// for transposed convolution; its adjoint is the matching gather.
struct ScatterPlan {
  Shape out_shape;
  Shape in_shape;
  std::vector<int64_t> dst;  // one entry per input element
};

using GatherPlanPtr = std::shared_ptr<const GatherPlan>;
using ScatterPlanPtr = std::shared_ptr<const ScatterPlan>;

/// Batch-norm channel statistics that persist across steps.
struct BnState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.1;
  double eps = 1e-5;
  void init(int64_t channels);
};

/// Reverse-mode tape. Build one graph per training step: bind leaves, apply
/// ops, call backward(loss) once, then read gradients. Ops record closures
/// that accumulate into parent gradients in exact reverse insertion order
/// (the insertion order is already topological).
///
/// A graph is single-owner; independent graphs may run on separate threads.
class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool grad_alloc = false;
    const char* op = "leaf";
    std::function<void(Graph&, int)> backward;  // self node index
  };

  bool check_finite = false;  // debug: verify every op output is finite

  Var leaf(Tensor v, bool needs_grad = false);
  Var constant(Tensor v) { return leaf(std::move(v), false); }

  const Tensor& val(Var v) const { return node(v).value; }
  /// Gradient of the loss w.r.t. v (zeros if v never received one).
  const Tensor& grad(Var v);

  // ---- elementwise / structural ----------------------------------------
  Var add(Var a, Var b);
  Var add_rowvec(Var a, Var bias);          // [m,n] + [n]
  Var add_chan_bias(Var x, Var bias);       // [N,C,H,W] + [C]
  Var add_tiled_rows(Var x, Var p);         // [R,d] + tile of [T,d], R % T == 0
  Var scale(Var a, double c);
  Var relu(Var a);
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var reshape(Var a, Shape s);
  Var gather(Var a, GatherPlanPtr plan);
  Var scatter_add(Var a, ScatterPlanPtr plan);
  Var concat_ch(Var a, Var b);              // NCHW concat on channel axis
  Var sum_all(Var a);                       // -> scalar

  // ---- dense algebra ----------------------------------------------------
  Var matmul(Var a, Var b);                            // [m,k]*[k,n]
  Var bmm(Var a, Var b);                               // [B,m,k]*[B,k,n]
  Var bmm_nt(Var a, Var b);                            // [B,m,k]*[B,n,k]^T

  // ---- normalization / attention helpers --------------------------------
  Var softmax_last(Var a, Tensor* capture = nullptr);
  Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var batchnorm2d(Var x, Var gamma, Var beta, BnState* state, bool training);

  /// Custom op hook: used by the quantized linear layer and the loss.
  Var custom(const std::vector<Var>& parents, Tensor value, const char* name,
             std::function<void(Graph&, int)> backward);

  /// Runs reverse-mode accumulation from a scalar loss. Throws on a
  /// non-scalar loss or when called twice on the same graph.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  Node& node(Var v) { return nodes_.at(static_cast<size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<size_t>(v.id)); }
  size_t size() const { return nodes_.size(); }

  void ensure_grad(int id);
  void accum_grad(int id, const Tensor& g);

 private:
  Var push(Node n);
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace fp4lab::ad
