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

namespace fp4lab::fp4 {

/// 8-bit float, 1 sign / 4 exponent / 3 mantissa, bias 7. Finite range
/// +-448; S.1111.111 is NaN (there are no infinities). Used here for
/// per-block quantization scales.
struct E4M3Code {
  uint8_t bits = 0;
  friend bool operator==(E4M3Code, E4M3Code) = default;
};

inline constexpr double kE4M3MaxFinite = 448.0;
inline constexpr double kE4M3MinNormal = 0.015625;    // 2^-6
inline constexpr double kE4M3MinSubnormal = 0.001953125;  // 2^-9

float e4m3_decode(E4M3Code c);
double e4m3_decode_d(E4M3Code c);
bool e4m3_is_nan(E4M3Code c);

/// Nearest encode with ties to even mantissa; |v| > 448 clamps to +-448.
/// Never produces NaN codes; preserves the sign of zero. v must be finite.
E4M3Code e4m3_encode_nearest(float v);

/// Scale encode: smallest representable E4M3 value >= s (round away from
/// zero), so values normalized by the decoded scale never exceed the FP4
/// range. s = 0 maps to the zero code. Throws std::domain_error
/// ("block scale overflow") when s > 448, and std::domain_error on
/// negative or non-finite input.
E4M3Code e4m3_scale_encode(double s);

/// Next representable value below a positive grid value (0 below the
/// smallest subnormal). `s` must itself be on the non-negative grid.
double e4m3_pred(double s);

}  // namespace fp4lab::fp4
