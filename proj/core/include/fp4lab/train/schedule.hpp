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

#include <cstdint>
#include <limits>

namespace fp4lab::train {

/// Plateau LR policy: after `patience` consecutive epochs without a strict
/// improvement of the monitored value, observe() returns true (caller halves
/// the LR by `factor`) and the counter resets. Improvement = strictly lower.
struct PlateauSchedule {
  double factor = 0.5;
  int64_t patience = 10;
  double best = std::numeric_limits<double>::infinity();
  int64_t bad = 0;

  bool observe(double value) {
    if (value < best) {
      best = value;
      bad = 0;
      return false;
    }
    if (++bad >= patience) {
      bad = 0;
      return true;
    }
    return false;
  }
};

/// Early stopping on the monitored value: fires once `patience` consecutive
/// non-improving epochs have been seen, but never signals at or before the
/// warmup epoch (epochs are 1-based). Non-improving warmup epochs still
/// count toward the streak.
struct EarlyStop {
  int64_t patience = 20;
  int64_t warmup = 40;
  double best = std::numeric_limits<double>::infinity();
  int64_t bad = 0;

  bool observe(double value, int64_t epoch) {
    if (value < best) {
      best = value;
      bad = 0;
      return false;
    }
    ++bad;
    return epoch > warmup && bad >= patience;
  }
};

}  // namespace fp4lab::train
