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
#include <vector>

#include "fp4lab/fp4/e2m1.hpp"
#include "fp4lab/fp4/e4m3.hpp"
#include "fp4lab/tensor.hpp"

namespace fp4lab::fp4 {

/// Scaling-block layout. Rows1x16 blocks are contiguous runs of 16 along the
/// innermost dimension; Square16x16 blocks tile a 2-D matrix (and make the
/// quantized representation transpose-invariant). Tensors are zero-padded to
/// block multiples; padding is excluded from block maxima and stripped on
/// dequantize.
enum class BlockKind : uint8_t { kRows1x16, kSquare16x16 };

struct BlockGeometry {
  BlockKind kind = BlockKind::kRows1x16;
  int64_t block_elems() const { return kind == BlockKind::kRows1x16 ? 16 : 256; }
  friend bool operator==(BlockGeometry, BlockGeometry) = default;
};

/// Which second-level scale the quantizer selects per block.
///   kFp4Max:  scale = blockmax / 6, so the block max maps to the +-6 code
///             and the full FP4 grid is used.
///   kLiteral: scale = blockmax, so the block max maps to ~1. Provided for
///             comparison; it wastes most of the FP4 dynamic range.
enum class ScalePolicy : uint8_t { kFp4Max, kLiteral };

/// Two-level block-scaled FP4 tensor: 4-bit codes, per-block E4M3 scales and
/// one FP32 per-tensor scale. An element dequantizes to
/// decode(code) * decode(block_scale) * tensor_scale.
///
/// The tensor scale is the power of two with max|x| / tensor_scale in (3, 6].
/// A power of two keeps every dequantized product exactly representable in
/// FP32 (<= 6 significand bits times an exponent shift), which makes
/// quantize(dequantize(q)) reproduce q bit for bit, blocks always place their
/// max on the +-6 code, and the tensor max round-trips exactly.
struct QuantizedTensor {
  Shape shape;                         // original shape
  Shape padded;                        // zero-padded shape, same rank
  BlockGeometry geometry;
  ScalePolicy policy = ScalePolicy::kFp4Max;
  float tensor_scale = 1.0f;           // 1.0 for the all-zero tensor
  std::vector<E2M1Code> codes;         // padded element count, row-major
  std::vector<E4M3Code> block_scales;  // one per block

  int64_t block_count() const { return static_cast<int64_t>(block_scales.size()); }
  bool bitwise_equal(const QuantizedTensor& o) const;
};

/// Quantizes x (finite everywhere, else throws). Blocks whose content is all
/// zero get zero scale and zero codes. Raw block scales below the E4M3
/// minimum normal are clamped up to it; subnormal scale steps are too coarse
/// for the re-quantization fixed point to hold.
QuantizedTensor quantize(const Tensor& x, BlockGeometry geometry, Rounding rounding,
                         ScalePolicy policy = ScalePolicy::kFp4Max);

/// Exact inverse mapping back to the original shape (padding stripped).
Tensor dequantize(const QuantizedTensor& q);

/// Convenience: dequantize(quantize(x)) with shared options.
Tensor fake_quantize(const Tensor& x, BlockGeometry geometry, Rounding rounding,
                     ScalePolicy policy = ScalePolicy::kFp4Max);

struct QuantStats {
  double max_abs_err = 0.0;
  double rmse = 0.0;
  /// Fraction of elements whose magnitude exceeds the largest value the
  /// block can represent (6 * scale * tensor_scale). Zero by construction
  /// under round-up scale selection; reported for format diagnostics.
  double saturation_fraction = 0.0;
  /// Fraction of nonzero inputs that quantized to the zero code. High values
  /// mean a block-level outlier crushed the rest of its block.
  double zero_crush_fraction = 0.0;
};

QuantStats quant_stats(const Tensor& x, const QuantizedTensor& q);

/// The power-of-two tensor scale described above (1.0 for amax == 0).
float pow2_tensor_scale(float amax);

}  // namespace fp4lab::fp4
