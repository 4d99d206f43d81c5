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

#include <string>
#include <vector>

#include "fp4lab/fp4/quantize.hpp"

namespace fp4lab::qat {

/// Switch set for a quantized-training recipe.
///
///   two_d      - 16x16 square scaling blocks for weights (transpose-
///                invariant between the forward and backward GEMMs)
///   rht        - sign-randomized Hadamard smoothing of the weight-gradient
///                GEMM operands (or of the forward operands when fwd_only)
///   sr         - stochastic rounding on the upstream gradient
///   fwd_only   - quantize only the forward pass; backward runs on the
///                original high-precision tensors
///   chain_rule - backward reuses the forward pass's dequantized operands
///                bit for bit instead of re-quantizing; upstream gradient
///                stays high precision
struct RecipeConfig {
  std::string name = "baseline-bf16";
  bool quantize = false;
  bool two_d = false;
  bool rht = false;
  bool sr = false;
  bool fwd_only = false;
  bool chain_rule = false;
  fp4::ScalePolicy scale_policy = fp4::ScalePolicy::kFp4Max;

  bool is_baseline() const { return !quantize; }
};

/// The eight named presets. Throws std::invalid_argument listing the valid
/// names on an unknown name.
RecipeConfig recipe_from_name(const std::string& name);

const std::vector<std::string>& recipe_names();

}  // namespace fp4lab::qat
