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

#include "fp4lab/fp4/quantize.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fp4lab::fp4 {

namespace {

constexpr int64_t kBlock = 16;

int64_t ceil_mult(int64_t n, int64_t m) { return (n + m - 1) / m * m; }

// View of the tensor as [outer x inner] with the innermost dimension inner.
void rows_view(const Shape& s, int64_t* outer, int64_t* inner) {
  if (s.empty()) {
    *outer = 0;
    *inner = 0;
    return;
  }
  *inner = s.back();
  *outer = 1;
  for (size_t i = 0; i + 1 < s.size(); ++i) *outer *= s[i];
}

struct BlockRef {
  const float* src;    // nullptr entries are padding
  int64_t count;       // real elements in this block
  int64_t code_base;   // offset into the padded code array
  int64_t code_stride; // stride between consecutive block elements
};

}  // namespace

bool QuantizedTensor::bitwise_equal(const QuantizedTensor& o) const {
  if (shape != o.shape || padded != o.padded || !(geometry == o.geometry) ||
      policy != o.policy)
    return false;
  uint32_t a, b;
  std::memcpy(&a, &tensor_scale, sizeof a);
  std::memcpy(&b, &o.tensor_scale, sizeof b);
  if (a != b) return false;
  if (codes.size() != o.codes.size() || block_scales.size() != o.block_scales.size())
    return false;
  for (size_t i = 0; i < codes.size(); ++i)
    if (!(codes[i] == o.codes[i])) return false;
  for (size_t i = 0; i < block_scales.size(); ++i)
    if (!(block_scales[i] == o.block_scales[i])) return false;
  return true;
}

float pow2_tensor_scale(float amax) {
  if (amax == 0.0f) return 1.0f;
  int e;
  double m = std::frexp(static_cast<double>(amax) / 6.0, &e);  // amax/6 = m * 2^e, m in [0.5,1)
  int ce = (m == 0.5) ? e - 1 : e;                             // ceil(log2(amax/6))
  if (ce < -126) ce = -126;
  return std::ldexp(1.0f, ce);
}

namespace {

// Quantizes one block in place: picks the scale, writes the scale code and
// the element codes.
void quantize_block(const float* const* elems, int64_t count, double inv_hint,
                    double tensor_scale, ScalePolicy policy, Rounding rounding,
                    E4M3Code* scale_out, E2M1Code* codes_out, int64_t stride) {
  (void)inv_hint;
  double amax = 0.0;
  for (int64_t i = 0; i < count; ++i) {
    if (!elems[i]) continue;
    double a = std::fabs(static_cast<double>(*elems[i]));
    if (a > amax) amax = a;
  }
  if (amax == 0.0) {
    *scale_out = E4M3Code{0};
    // codes_out prefilled with zero codes; still encode explicit zeros so
    // negative zeros keep their sign.
    for (int64_t i = 0; i < count; ++i) {
      if (!elems[i]) continue;
      codes_out[i * stride] = e2m1_encode(static_cast<double>(*elems[i]), Rounding::nearest());
    }
    return;
  }
  double raw = (policy == ScalePolicy::kFp4Max) ? amax / (6.0 * tensor_scale)
                                                : amax / tensor_scale;
  if (raw < kE4M3MinNormal) raw = kE4M3MinNormal;
  E4M3Code scale = e4m3_scale_encode(raw);
  *scale_out = scale;
  double eff = e4m3_decode_d(scale) * tensor_scale;  // exact: 4-bit significand * pow2
  for (int64_t i = 0; i < count; ++i) {
    if (!elems[i]) continue;
    double v = static_cast<double>(*elems[i]) / eff;
    codes_out[i * stride] = e2m1_encode(v, rounding);
  }
}

}  // namespace

QuantizedTensor quantize(const Tensor& x, BlockGeometry geometry, Rounding rounding,
                         ScalePolicy policy) {
  if (!x.all_finite()) throw std::domain_error("non-finite value reached quantizer");
  QuantizedTensor q;
  q.shape = x.shape;
  q.geometry = geometry;
  q.policy = policy;
  q.tensor_scale = pow2_tensor_scale(x.max_abs());
  double st = static_cast<double>(q.tensor_scale);

  if (geometry.kind == BlockKind::kRows1x16) {
    int64_t outer, inner;
    rows_view(x.shape, &outer, &inner);
    int64_t pinner = ceil_mult(inner, kBlock);
    q.padded = x.shape;
    if (!q.padded.empty()) q.padded.back() = pinner;
    q.codes.assign(static_cast<size_t>(outer * pinner), E2M1Code{0});
    int64_t bpr = pinner / kBlock;
    q.block_scales.assign(static_cast<size_t>(outer * bpr), E4M3Code{0});
    const float* ptrs[kBlock];
    for (int64_t r = 0; r < outer; ++r) {
      for (int64_t b = 0; b < bpr; ++b) {
        for (int64_t i = 0; i < kBlock; ++i) {
          int64_t col = b * kBlock + i;
          ptrs[i] = col < inner ? &x.data[static_cast<size_t>(r * inner + col)] : nullptr;
        }
        quantize_block(ptrs, kBlock, 0.0, st, policy, rounding,
                       &q.block_scales[static_cast<size_t>(r * bpr + b)],
                       &q.codes[static_cast<size_t>(r * pinner + b * kBlock)], 1);
      }
    }
    return q;
  }

  // Square16x16
  if (x.ndim() != 2)
    throw std::invalid_argument("Square16x16 geometry requires a 2-D tensor, got " +
                                shape_str(x.shape));
  int64_t rows = x.shape[0], cols = x.shape[1];
  int64_t prow = ceil_mult(rows, kBlock), pcol = ceil_mult(cols, kBlock);
  q.padded = {prow, pcol};
  q.codes.assign(static_cast<size_t>(prow * pcol), E2M1Code{0});
  int64_t btr = prow / kBlock, btc = pcol / kBlock;
  q.block_scales.assign(static_cast<size_t>(btr * btc), E4M3Code{0});
  std::vector<const float*> ptrs(kBlock * kBlock);
  std::vector<E2M1Code> tile(kBlock * kBlock);
  for (int64_t br = 0; br < btr; ++br) {
    for (int64_t bc = 0; bc < btc; ++bc) {
      for (int64_t i = 0; i < kBlock; ++i) {
        for (int64_t j = 0; j < kBlock; ++j) {
          int64_t rr = br * kBlock + i, cc = bc * kBlock + j;
          ptrs[static_cast<size_t>(i * kBlock + j)] =
              (rr < rows && cc < cols) ? &x.data[static_cast<size_t>(rr * cols + cc)] : nullptr;
        }
      }
      std::fill(tile.begin(), tile.end(), E2M1Code{0});
      quantize_block(ptrs.data(), kBlock * kBlock, 0.0, st, policy, rounding,
                     &q.block_scales[static_cast<size_t>(br * btc + bc)], tile.data(), 1);
      for (int64_t i = 0; i < kBlock; ++i)
        for (int64_t j = 0; j < kBlock; ++j)
          q.codes[static_cast<size_t>((br * kBlock + i) * pcol + bc * kBlock + j)] =
              tile[static_cast<size_t>(i * kBlock + j)];
    }
  }
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor out(q.shape);
  double st = static_cast<double>(q.tensor_scale);
  if (q.geometry.kind == BlockKind::kRows1x16) {
    int64_t outer, inner;
    rows_view(q.shape, &outer, &inner);
    int64_t pinner = q.padded.empty() ? 0 : q.padded.back();
    int64_t bpr = pinner / 16;
    for (int64_t r = 0; r < outer; ++r) {
      for (int64_t b = 0; b < bpr; ++b) {
        double eff = e4m3_decode_d(q.block_scales[static_cast<size_t>(r * bpr + b)]) * st;
        for (int64_t i = 0; i < 16; ++i) {
          int64_t col = b * 16 + i;
          if (col >= inner) break;
          double g = static_cast<double>(
              e2m1_decode(q.codes[static_cast<size_t>(r * pinner + col)]));
          out.data[static_cast<size_t>(r * inner + col)] = static_cast<float>(g * eff);
        }
      }
    }
    return out;
  }
  int64_t rows = q.shape[0], cols = q.shape[1];
  int64_t pcol = q.padded[1];
  int64_t btc = pcol / 16;
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      int64_t blk = (r / 16) * btc + (c / 16);
      double eff = e4m3_decode_d(q.block_scales[static_cast<size_t>(blk)]) * st;
      double g = static_cast<double>(e2m1_decode(q.codes[static_cast<size_t>(r * pcol + c)]));
      out.data[static_cast<size_t>(r * cols + c)] = static_cast<float>(g * eff);
    }
  }
  return out;
}

Tensor fake_quantize(const Tensor& x, BlockGeometry geometry, Rounding rounding,
                     ScalePolicy policy) {
  return dequantize(quantize(x, geometry, rounding, policy));
}

QuantStats quant_stats(const Tensor& x, const QuantizedTensor& q) {
  Tensor xh = dequantize(q);
  QuantStats s;
  int64_t n = x.numel();
  if (n == 0) return s;
  double sq = 0.0;
  int64_t saturated = 0, crushed = 0, nonzero = 0;

  // Recover the per-element representable bound and code magnitude.
  double st = static_cast<double>(q.tensor_scale);
  int64_t outer = 0, inner = 0;
  int64_t pinner = 0, bpr = 0, pcol = 0, btc = 0;
  if (q.geometry.kind == BlockKind::kRows1x16) {
    rows_view(q.shape, &outer, &inner);
    pinner = q.padded.empty() ? 0 : q.padded.back();
    bpr = pinner / 16;
  } else {
    pcol = q.padded[1];
    btc = pcol / 16;
  }
  for (int64_t i = 0; i < n; ++i) {
    double err = std::fabs(static_cast<double>(x.data[static_cast<size_t>(i)]) -
                           static_cast<double>(xh.data[static_cast<size_t>(i)]));
    if (err > s.max_abs_err) s.max_abs_err = err;
    sq += err * err;
    int64_t blk, code_idx;
    if (q.geometry.kind == BlockKind::kRows1x16) {
      int64_t r = i / inner, c = i % inner;
      blk = r * bpr + c / 16;
      code_idx = r * pinner + c;
    } else {
      int64_t r = i / q.shape[1], c = i % q.shape[1];
      blk = (r / 16) * btc + (c / 16);
      code_idx = r * pcol + c;
    }
    double bound = 6.0 * e4m3_decode_d(q.block_scales[static_cast<size_t>(blk)]) * st;
    double a = std::fabs(static_cast<double>(x.data[static_cast<size_t>(i)]));
    if (a > bound) ++saturated;
    if (a > 0.0) {
      ++nonzero;
      if ((q.codes[static_cast<size_t>(code_idx)].bits & 0x7) == 0) ++crushed;
    }
  }
  s.rmse = std::sqrt(sq / static_cast<double>(n));
  s.saturation_fraction = static_cast<double>(saturated) / static_cast<double>(n);
  s.zero_crush_fraction =
      nonzero ? static_cast<double>(crushed) / static_cast<double>(nonzero) : 0.0;
  return s;
}

}  // namespace fp4lab::fp4
