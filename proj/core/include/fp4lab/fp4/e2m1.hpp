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

#include "fp4lab/rng.hpp"

namespace fp4lab::fp4 {

/// 4-bit float, 1 sign / 2 exponent / 1 mantissa. Low nibble used:
/// bit 3 = sign, bits 2..1 = exponent, bit 0 = mantissa. Representable
/// magnitudes are {0, 0.5, 1, 1.5, 2, 3, 4, 6}; there are no NaN/Inf codes.
struct E2M1Code {
  uint8_t bits = 0;
  friend bool operator==(E2M1Code, E2M1Code) = default;
};

inline constexpr std::array<double, 8> kE2M1Magnitudes = {0.0, 0.5, 1.0, 1.5,
                                                          2.0, 3.0, 4.0, 6.0};
inline constexpr double kE2M1Max = 6.0;

/// Rounding mode used by the encoders. Stochastic mode consumes uniform
/// draws from the referenced stream (one draw per value that falls strictly
/// between two grid points; exact grid values and saturating values consume
/// none), so a replay with the same seed reproduces codes bitwise.
struct Rounding {
  enum class Mode { kNearestEven, kStochastic };
  Mode mode = Mode::kNearestEven;
  RngStream* stream = nullptr;

  static Rounding nearest() { return {Mode::kNearestEven, nullptr}; }
  static Rounding stochastic(RngStream& s) { return {Mode::kStochastic, &s}; }
  bool is_stochastic() const { return mode == Mode::kStochastic; }
};

/// Signed decode; the sign of zero codes is preserved (code 0x8 -> -0.0f).
float e2m1_decode(E2M1Code c);

/// Nearest-even picks the closest grid value with ties to the even mantissa;
/// stochastic picks one of the two bracketing grid values with probability
/// proportional to proximity. |v| >= 6 saturates to +-6 deterministically in
/// both modes. Throws std::domain_error("non-finite value reached quantizer")
/// on NaN/Inf input.
E2M1Code e2m1_encode(double v, Rounding rounding);

/// Half the gap between the two grid points bracketing |v| (0 beyond 6).
double e2m1_half_gap(double v);

}  // namespace fp4lab::fp4
