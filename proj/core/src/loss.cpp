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

#include "fp4lab/train/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace fp4lab::train {

namespace {

inline double sigmoid_d(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Numerically stable per-element BCE from the logit:
// bce = max(z,0) - z*y + log(1 + exp(-|z|)).
inline double bce_elem(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
}

}  // namespace

LossBreakdown compute_loss(const float* logits, const float* targets, int64_t n,
                           const LossConfig& cfg) {
  LossBreakdown b;
  for (int64_t i = 0; i < n; ++i) {
    double z = logits[i], y = targets[i];
    double p = sigmoid_d(z);
    b.bce += bce_elem(z, y);
    b.tp += p * y;
    b.fp += p * (1.0 - y);
    b.fn += (1.0 - p) * y;
  }
  b.bce /= static_cast<double>(n);
  double denom = std::max(b.tp + cfg.alpha * b.fp + cfg.beta * b.fn, cfg.eps);
  b.tversky = 1.0 - b.tp / denom;
  b.total = b.bce + b.tversky;
  return b;
}

double tversky_term(const std::vector<double>& probs, const std::vector<double>& targets,
                    const LossConfig& cfg) {
  if (probs.size() != targets.size())
    throw std::invalid_argument("tversky_term: size mismatch");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    tp += probs[i] * targets[i];
    fp += probs[i] * (1.0 - targets[i]);
    fn += (1.0 - probs[i]) * targets[i];
  }
  double denom = std::max(tp + cfg.alpha * fp + cfg.beta * fn, cfg.eps);
  return 1.0 - tp / denom;
}

ad::Var bce_tversky_loss(ad::Graph& g, ad::Var logits, const Tensor& target,
                         const LossConfig& cfg) {
  const Tensor& z = g.val(logits);
  check_same_shape(z, target, "bce_tversky_loss");
  int64_t n = z.numel();
  if (n == 0) throw std::runtime_error("bce_tversky_loss: empty input");
  for (float y : target.data)
    if (y != 0.0f && y != 1.0f)
      throw std::runtime_error("bce_tversky_loss: target mask must be binary");

  LossBreakdown b = compute_loss(z.ptr(), target.ptr(), n, cfg);
  int iz = logits.id;
  Tensor saved_y = target;
  LossConfig c = cfg;
  double tp = b.tp, denom_raw = b.tp + c.alpha * b.fp + c.beta * b.fn;
  return g.custom(
      {logits}, Tensor::scalar(static_cast<float>(b.total)), "bce_tversky",
      [iz, saved_y, c, tp, denom_raw, n](ad::Graph& gg, int self) {
        float go = gg.node(ad::Var{self}).grad.data[0];
        const Tensor& z = gg.node(ad::Var{iz}).value;
        Tensor gi(z.shape);
        bool clamped = denom_raw < c.eps;
        double denom = std::max(denom_raw, c.eps);
        for (int64_t i = 0; i < n; ++i) {
          double y = saved_y.data[static_cast<size_t>(i)];
          double p = sigmoid_d(z.data[static_cast<size_t>(i)]);
          double dbce_dz = (p - y) / static_cast<double>(n);
          // d(1 - TP/D)/dp, with D = TP + a*FP + b*FN (or frozen when the
          // floor is active).
          double dD_dp = clamped ? 0.0 : y + c.alpha * (1.0 - y) - c.beta * y;
          double dterm_dp = -(y * denom - tp * dD_dp) / (denom * denom);
          double dz = dbce_dz + dterm_dp * p * (1.0 - p);
          gi.data[static_cast<size_t>(i)] = static_cast<float>(go * dz);
        }
        gg.accum_grad(iz, gi);
      });
}

void LossAccum::add(const float* logits, const float* targets, int64_t count) {
  for (int64_t i = 0; i < count; ++i) {
    double z = logits[i], y = targets[i];
    double p = sigmoid_d(z);
    bce_sum += bce_elem(z, y);
    tp += p * y;
    fp += p * (1.0 - y);
    fn += (1.0 - p) * y;
  }
  n += count;
}

double LossAccum::total(const LossConfig& cfg) const {
  if (n == 0) return 0.0;
  double denom = std::max(tp + cfg.alpha * fp + cfg.beta * fn, cfg.eps);
  return bce_sum / static_cast<double>(n) + 1.0 - tp / denom;
}

}  // namespace fp4lab::train
