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
#include <random>
#include <vector>

namespace fp4lab {

/// Seeded PRNG stream. All randomness in the library flows through explicit
/// streams so every result is replayable bit-for-bit from its seed.
///
/// The engine is std::mt19937_64 (the standard specifies its output sequence
/// exactly) and all value mappings below are hand-rolled from raw 64-bit
/// draws, so sequences do not depend on the standard library implementation.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  uint64_t next_below(uint64_t n);

  /// Standard normal via Box-Muller (second value cached).
  double normal();

  /// Normal(0, sigma) re-drawn until within 2 sigma.
  double truncated_normal(double sigma);

  bool coin() { return (next_u64() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives an independent child seed; deterministic in (seed, salt).
  static uint64_t derive(uint64_t seed, uint64_t salt);

 private:
  std::mt19937_64 eng_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace fp4lab
