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
#include "fp4lab/qat/recipe.hpp"

namespace fp4lab::qat {

enum class Pass : uint8_t { kFprop, kDgrad, kWgrad };
enum class Role : uint8_t { kX, kW, kG };
enum class Precision : uint8_t { kFp4, kHigh };

const char* to_string(Pass p);
const char* to_string(Role r);
const char* to_string(Precision p);

/// One tensor-precision decision inside a quantized linear layer. The event
/// log of a training step fully determines the recipe footprint, which makes
/// recipe conformance testable.
struct QuantEvent {
  std::string layer;
  int64_t step = 0;
  Pass pass = Pass::kFprop;
  Role role = Role::kX;
  Precision precision = Precision::kHigh;
  fp4::BlockKind geometry = fp4::BlockKind::kRows1x16;  // meaningful when FP4
  bool stochastic = false;                              // rounding mode when FP4
  bool rht = false;
  bool reused = false;  // backward consumed the forward's dequantized tensor
};

using EventLog = std::vector<QuantEvent>;

std::string event_to_json_line(const QuantEvent& e);
std::string event_log_to_json_lines(const EventLog& log);

struct ConformanceReport {
  bool pass = true;
  std::vector<std::string> failures;
  int64_t layers_checked = 0;
};

/// Checks that the FP4/HIGH footprint of every (pass, tensor-role) pair in
/// the log matches the recipe's switch set. A baseline recipe must produce an
/// empty log. When `expect_backward` is set, every layer that logged anything
/// must carry the full forward+backward footprint.
ConformanceReport conformance_check(const RecipeConfig& recipe, const EventLog& log,
                                    bool expect_backward = true);

}  // namespace fp4lab::qat
