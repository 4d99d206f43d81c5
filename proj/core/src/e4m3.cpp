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

#include "fp4lab/fp4/e4m3.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace fp4lab::fp4 {

namespace {

// Non-negative finite magnitudes, indexed by code 0x00..0x7E. The layout is
// exponent-then-mantissa so the table is strictly increasing except for the
// shared zero at code 0.
struct MagnitudeTable {
  std::array<double, 127> v{};
  MagnitudeTable() {
    for (int code = 0; code < 127; ++code) {
      int exp = code >> 3;
      int man = code & 7;
      double val;
      if (exp == 0) {
        val = std::ldexp(static_cast<double>(man), -9);  // subnormal: man/8 * 2^-6
      } else {
        val = std::ldexp(1.0 + man / 8.0, exp - 7);
      }
      v[static_cast<size_t>(code)] = val;
    }
  }
};

const MagnitudeTable& table() {
  static const MagnitudeTable t;
  return t;
}

}  // namespace

bool e4m3_is_nan(E4M3Code c) { return (c.bits & 0x7F) == 0x7F; }

double e4m3_decode_d(E4M3Code c) {
  if (e4m3_is_nan(c)) return std::nan("");
  double mag = table().v[static_cast<size_t>(c.bits & 0x7F)];
  return (c.bits & 0x80) ? -mag : mag;
}

float e4m3_decode(E4M3Code c) { return static_cast<float>(e4m3_decode_d(c)); }

E4M3Code e4m3_encode_nearest(float v) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite value reached E4M3 encoder");
  uint8_t sign = std::signbit(v) ? 0x80 : 0x00;
  double a = std::fabs(static_cast<double>(v));
  const auto& t = table().v;
  if (a >= kE4M3MaxFinite) return E4M3Code{static_cast<uint8_t>(sign | 0x7E)};
  int hi = 0;
  while (t[static_cast<size_t>(hi)] < a) ++hi;
  if (t[static_cast<size_t>(hi)] == a || hi == 0)
    return E4M3Code{static_cast<uint8_t>(sign | hi)};
  int lo = hi - 1;
  double dlo = a - t[static_cast<size_t>(lo)];
  double dhi = t[static_cast<size_t>(hi)] - a;
  int code;
  if (dlo < dhi)
    code = lo;
  else if (dhi < dlo)
    code = hi;
  else
    code = (lo & 1) == 0 ? lo : hi;  // tie: even mantissa (codes alternate parity)
  return E4M3Code{static_cast<uint8_t>(sign | code)};
}

E4M3Code e4m3_scale_encode(double s) {
  if (!std::isfinite(s) || s < 0.0)
    throw std::domain_error("E4M3 scale encoder requires a finite non-negative input");
  if (s == 0.0) return E4M3Code{0};
  if (s > kE4M3MaxFinite) throw std::domain_error("block scale overflow");
  const auto& t = table().v;
  int code = 0;
  while (t[static_cast<size_t>(code)] < s) ++code;
  return E4M3Code{static_cast<uint8_t>(code)};
}

double e4m3_pred(double s) {
  const auto& t = table().v;
  for (int code = 126; code > 0; --code) {
    if (t[static_cast<size_t>(code)] == s) return t[static_cast<size_t>(code - 1)];
  }
  if (s == 0.0) return 0.0;
  throw std::invalid_argument("e4m3_pred: value not on the non-negative E4M3 grid");
}

}  // namespace fp4lab::fp4
