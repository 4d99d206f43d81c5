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

#include "fp4lab/train/optim.hpp"

#include <cmath>

namespace fp4lab::train {

OptimizerConfig optimizer_for_arch(models::Arch arch, bool force_adamax) {
  OptimizerConfig c;
  if (arch == models::Arch::kCnn || force_adamax) {
    c.kind = OptKind::kAdamax;
    c.lr = 5e-4;
    c.weight_decay = 0.0;
  } else {
    c.kind = OptKind::kAdamW;
    c.lr = 1e-4;
    c.weight_decay = 1e-4;
  }
  return c;
}

void Optimizer::step(const std::vector<models::Parameter*>& params) {
  ++t_;
  double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto* p : params) {
    if (!p->trainable) continue;
    auto& st = state_[p];
    size_t n = p->value.data.size();
    if (st.m.size() != n) {
      st.m.assign(n, 0.0f);
      st.v.assign(n, 0.0f);
    }
    float* w = p->value.data.data();
    const float* g = p->grad.data.data();
    if (cfg_.kind == OptKind::kAdamW) {
      for (size_t i = 0; i < n; ++i) {
        // Decoupled weight decay acts on the parameter directly.
        w[i] -= static_cast<float>(cfg_.lr * cfg_.weight_decay * w[i]);
        st.m[i] = static_cast<float>(cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i]);
        st.v[i] = static_cast<float>(cfg_.beta2 * st.v[i] +
                                     (1.0 - cfg_.beta2) * static_cast<double>(g[i]) * g[i]);
        double mhat = st.m[i] / bias1;
        double vhat = st.v[i] / bias2;
        w[i] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    } else {  // Adamax: infinity-norm second moment, no decay in the preset
      for (size_t i = 0; i < n; ++i) {
        if (cfg_.weight_decay != 0.0)
          w[i] -= static_cast<float>(cfg_.lr * cfg_.weight_decay * w[i]);
        st.m[i] = static_cast<float>(cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i]);
        st.v[i] = std::max(static_cast<float>(cfg_.beta2 * st.v[i]), std::fabs(g[i]));
        w[i] -= static_cast<float>(cfg_.lr / bias1 * st.m[i] /
                                   (static_cast<double>(st.v[i]) + cfg_.eps));
      }
    }
  }
}

}  // namespace fp4lab::train
