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

#include "fp4lab/fp4/e2m1.hpp"

#include <cmath>
#include <stdexcept>

namespace fp4lab::fp4 {

float e2m1_decode(E2M1Code c) {
  float mag = static_cast<float>(kE2M1Magnitudes[c.bits & 0x7]);
  return (c.bits & 0x8) ? -mag : mag;
}

namespace {

// Magnitude index in [0,7]. The mantissa bit of grid index i is (i & 1),
// so an even index is an even mantissa.
int encode_magnitude(double a, Rounding rounding) {
  if (a >= kE2M1Max) return 7;  // saturation, both modes
  int hi = 0;
  while (kE2M1Magnitudes[static_cast<size_t>(hi)] < a) ++hi;
  double ghi = kE2M1Magnitudes[static_cast<size_t>(hi)];
  if (ghi == a || hi == 0) return hi;
  int lo = hi - 1;
  double glo = kE2M1Magnitudes[static_cast<size_t>(lo)];
  if (rounding.is_stochastic()) {
    double t = (a - glo) / (ghi - glo);
    return rounding.stream->next_unit() < t ? hi : lo;
  }
  double dlo = a - glo;
  double dhi = ghi - a;
  if (dlo < dhi) return lo;
  if (dhi < dlo) return hi;
  return (lo & 1) == 0 ? lo : hi;  // tie: even mantissa
}

}  // namespace

E2M1Code e2m1_encode(double v, Rounding rounding) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite value reached quantizer");
  if (rounding.is_stochastic() && rounding.stream == nullptr)
    throw std::invalid_argument("stochastic rounding requires an RNG stream");
  bool neg = std::signbit(v);
  int mi = encode_magnitude(std::fabs(v), rounding);
  return E2M1Code{static_cast<uint8_t>((neg ? 0x8 : 0x0) | mi)};
}

double e2m1_half_gap(double v) {
  double a = std::fabs(v);
  if (a >= kE2M1Max) return 0.0;
  int hi = 0;
  while (kE2M1Magnitudes[static_cast<size_t>(hi)] < a) ++hi;
  if (kE2M1Magnitudes[static_cast<size_t>(hi)] == a) {
    // On-grid: the worst case for a nearest rounding of this exact value is 0.
    return 0.0;
  }
  return 0.5 * (kE2M1Magnitudes[static_cast<size_t>(hi)] -
                kE2M1Magnitudes[static_cast<size_t>(hi - 1)]);
}

}  // namespace fp4lab::fp4
