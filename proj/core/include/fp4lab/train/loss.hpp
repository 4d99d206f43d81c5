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

#include "fp4lab/graph.hpp"

namespace fp4lab::train {

/// BCE + soft-Tversky segmentation objective. With alpha < beta false
/// negatives cost more than false positives (alpha 0.3 / beta 0.7 weighs
/// them 2.33:1), which is what pushes the optimum toward recall.
struct LossConfig {
  double alpha = 0.3;
  double beta = 0.7;
  /// Floors the Tversky denominator: term = 1 - TP / max(denom, eps).
  /// Applied as a floor rather than an additive term so exact hand
  /// computations hold bit-for-bit away from the empty-mask corner.
  double eps = 1e-6;
};

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double tversky = 0.0;  // 1 - TP/(TP + a*FP + b*FN)
  double tp = 0.0, fp = 0.0, fn = 0.0;
};

/// Pure double-precision evaluation over flat logits/targets.
LossBreakdown compute_loss(const float* logits, const float* targets, int64_t n,
                           const LossConfig& cfg);

/// The soft-Tversky component alone, straight from probabilities. Double
/// precision end to end, so hand-computed cases check out to tight
/// tolerances.
double tversky_term(const std::vector<double>& probs, const std::vector<double>& targets,
                    const LossConfig& cfg);

/// Tape op: scalar loss of logits vs a constant binary target of the same
/// shape, soft sums pooled over every element in the batch. Analytic
/// gradient; finite-difference checked in the tests.
ad::Var bce_tversky_loss(ad::Graph& g, ad::Var logits, const Tensor& target,
                         const LossConfig& cfg);

/// Streaming accumulator for evaluating the pooled loss over many batches
/// (the whole validation set behaves as one batch, so the value does not
/// depend on how it was chunked).
struct LossAccum {
  double bce_sum = 0.0;
  double tp = 0.0, fp = 0.0, fn = 0.0;
  int64_t n = 0;
  void add(const float* logits, const float* targets, int64_t count);
  double total(const LossConfig& cfg) const;
};

}  // namespace fp4lab::train
