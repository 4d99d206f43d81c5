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
#include <utility>
#include <vector>

#include "fp4lab/rng.hpp"
#include "fp4lab/tensor.hpp"

namespace fp4lab::rht {

/// Size to use when smoothing GEMM operands: matches the 16-element
/// quantization block so each scaling block sees fully mixed values.
inline constexpr int64_t kDefaultSize = 16;

/// Sylvester Hadamard matrix of order h (entries +-1, H * H^T = h * I
/// exactly in integer arithmetic). h must be a power of two in [1, 1024].
Tensor build_hadamard(int64_t h);

/// Sign-randomized orthogonal rotation T = (1/sqrt(h)) * H_h * diag(signs).
/// Same seed => same signs; T * T^T = I up to FP rounding.
struct RhtTransform {
  int64_t h = 1;
  std::vector<float> signs;  // +-1, length h

  static RhtTransform from_seed(int64_t h, uint64_t seed);
  static RhtTransform from_stream(int64_t h, RngStream& stream);
  static RhtTransform with_signs(std::vector<float> signs);

  /// Dense T as an [h x h] tensor (tests and small uses).
  Tensor matrix() const;
};

/// Contracts T with x along `axis`, blockwise per h-sized chunk:
/// out[..., c*h + j, ...] = sum_k T[j, k] * x[..., c*h + k, ...].
/// The axis length must be divisible by h. Energy is preserved.
Tensor apply_rht(const Tensor& x, const RhtTransform& t, int axis);

/// Smooths both operands of a product contracting a's columns with b's rows:
/// returns (a * T^T, T * b) built from the shared sign vector, so
/// matmul(a', b') == matmul(a, b) exactly when no quantization happens
/// in between. h == 1 returns the inputs unchanged.
std::pair<Tensor, Tensor> rht_pair_apply(const Tensor& a, const Tensor& b,
                                         const RhtTransform& t);

}  // namespace fp4lab::rht
