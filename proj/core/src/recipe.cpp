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

#include "fp4lab/qat/recipe.hpp"

#include <stdexcept>

namespace fp4lab::qat {

const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names = {
      "baseline-bf16", "nvfp4-full", "fwd-only", "fwd-rht",
      "chain-rule",    "sr-only",    "2d-rht",   "2d-rht-sr"};
  return names;
}

RecipeConfig recipe_from_name(const std::string& name) {
  RecipeConfig r;
  r.name = name;
  if (name == "baseline-bf16") {
    r.quantize = false;
  } else if (name == "nvfp4-full") {
    r.quantize = true;
  } else if (name == "fwd-only") {
    r.quantize = true;
    r.fwd_only = true;
  } else if (name == "fwd-rht") {
    r.quantize = true;
    r.fwd_only = true;
    r.rht = true;
  } else if (name == "chain-rule") {
    r.quantize = true;
    r.chain_rule = true;
  } else if (name == "sr-only") {
    r.quantize = true;
    r.sr = true;
  } else if (name == "2d-rht") {
    r.quantize = true;
    r.two_d = true;
    r.rht = true;
  } else if (name == "2d-rht-sr") {
    r.quantize = true;
    r.two_d = true;
    r.rht = true;
    r.sr = true;
  } else {
    std::string valid;
    for (const auto& n : recipe_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown recipe '" + name + "' (valid: " + valid + ")");
  }
  return r;
}

}  // namespace fp4lab::qat
