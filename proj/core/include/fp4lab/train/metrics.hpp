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

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace fp4lab::train {

/// Step-wise average precision: sum of (R_k - R_{k-1}) * P_k over descending
/// unique score thresholds, ties grouped at one threshold (no trapezoid
/// interpolation, which is optimistic under imbalance). Throws
/// std::invalid_argument("AUPRC undefined") when labels are single-class.
double auprc(const std::vector<double>& scores, const std::vector<char>& labels);

/// (recall, precision) at each descending unique threshold.
std::vector<std::pair<double, double>> prc_curve(const std::vector<double>& scores,
                                                 const std::vector<char>& labels);

/// 101 equal-width bins over [0,1]; returns mass fractions.
std::array<double, 101> pred_histogram(const std::vector<double>& probs);

/// Total mass of the 5 heaviest bins. Smooth prediction distributions score
/// near 5/101; discretized ones approach 1.
double spikiness(const std::array<double, 101>& hist);

/// Clamps logits to +-20 then applies the logistic function (overflow-safe
/// metric probabilities).
double prob_from_logit(double z);

}  // namespace fp4lab::train
