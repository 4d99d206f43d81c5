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
#include <unordered_map>
#include <vector>

#include "fp4lab/models/model.hpp"

namespace fp4lab::train {

enum class OptKind { kAdamax, kAdamW };

struct OptimizerConfig {
  OptKind kind = OptKind::kAdamax;
  double lr = 5e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-architecture presets: CNN trains with Adamax (lr 5e-4, no decay),
/// transformers with decoupled AdamW (lr 1e-4, wd 1e-4). The Adamax variant
/// is also selectable for the ViT optimizer probe.
OptimizerConfig optimizer_for_arch(models::Arch arch, bool force_adamax = false);

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<models::Parameter*>& params);
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const OptimizerConfig& config() const { return cfg_; }
  int64_t steps_taken() const { return t_; }

 private:
  struct State {
    std::vector<float> m;  // first moment
    std::vector<float> v;  // second moment (Adamax: infinity norm)
  };
  OptimizerConfig cfg_;
  int64_t t_ = 0;
  std::unordered_map<models::Parameter*, State> state_;
};

}  // namespace fp4lab::train
