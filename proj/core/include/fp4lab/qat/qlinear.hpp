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

#include <memory>
#include <string>

#include "fp4lab/graph.hpp"
#include "fp4lab/qat/events.hpp"
#include "fp4lab/qat/recipe.hpp"
#include "fp4lab/rht.hpp"
#include "fp4lab/rng.hpp"

namespace fp4lab::qat {

/// Saved operands of one quantized forward pass plus a record of what the
/// backward pass actually consumed (inspectable, so reuse contracts are
/// testable).
struct LinearContext {
  Tensor x_hat;  // dequantized activation from the forward pass
  Tensor w_hat;  // dequantized weight from the forward pass
  Tensor x_raw;  // original operands, kept when backward re-quantizes or
  Tensor w_raw;  // runs in high precision
  bool backward_ran = false;
  Tensor bwd_dgrad_w;  // weight operand used by dX = Gq * W^T
  Tensor bwd_dgrad_g;  // gradient operand used by DGRAD
  Tensor bwd_wgrad_x;  // activation operand used by dW (k-major layout)
  Tensor bwd_wgrad_g;  // gradient operand used by WGRAD (n-major layout)
};

/// Per-layer persistent state: recipe, exemption flag, RNG stream feeding
/// stochastic rounding and the per-step Hadamard sign draws, the event sink
/// and the last step's context. A layer instance owns its stream and is not
/// shareable mid-step.
struct QLinearLayer {
  std::string name;
  RecipeConfig recipe;
  bool enabled = true;  // false: exempt layer, runs in full precision
  std::unique_ptr<RngStream> rng;
  EventLog* events = nullptr;
  std::shared_ptr<LinearContext> last_ctx;
  int64_t step = 0;

  QLinearLayer() = default;
  QLinearLayer(std::string n, RecipeConfig r, uint64_t seed)
      : name(std::move(n)), recipe(std::move(r)), rng(std::make_unique<RngStream>(seed)) {}
};

/// y = x * w with recipe-controlled fake quantization. x is [m,k], w is
/// [k,n]. The forward quantizes activations with 1x16 blocks along k and the
/// weight with 1x16 blocks along k (or 16x16 square blocks under two_d); the
/// backward follows the recipe's switch set. Quantizers contribute an
/// identity Jacobian (straight-through); a disabled layer or a baseline
/// recipe is a plain matmul that logs nothing.
ad::Var qlinear(ad::Graph& g, ad::Var x, ad::Var w, QLinearLayer& layer);

/// One forward+backward step of a two-layer probe network under `recipe`,
/// returning the event log and its conformance verdict.
struct ProbeResult {
  EventLog log;
  ConformanceReport report;
};
ProbeResult run_recipe_probe(const RecipeConfig& recipe, uint64_t seed);

/// The weight-gradient GEMM pipeline the quantized layer runs: optional
/// shared rotation of both operands along the contracted row dimension,
/// optional 1x16 fake quantization along that dimension, then dW = X^T * G.
/// Exposed so the rotation-cancellation property is testable with the
/// quantization step disabled.
struct WgradOptions {
  const rht::RhtTransform* transform = nullptr;  // null: no rotation
  bool quantize = true;
  bool stochastic = false;
  RngStream* rng = nullptr;  // required for stochastic rounding
  fp4::ScalePolicy scale_policy = fp4::ScalePolicy::kFp4Max;
};
struct WgradResult {
  Tensor dw;    // [k,n]
  Tensor x_op;  // operand actually multiplied, [k,m] layout
  Tensor g_op;  // operand actually multiplied, [n,m] layout
};
WgradResult wgrad_gemm(const Tensor& x, const Tensor& g, const WgradOptions& opts);

}  // namespace fp4lab::qat
