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

#include "fp4lab/graph.hpp"

namespace fp4lab::ad {

/// [m,n] -> [n,m].
GatherPlanPtr transpose2d_plan(int64_t m, int64_t n);

/// NCHW -> [N*H*W, C] pixel rows.
GatherPlanPtr nchw_to_rows_plan(int64_t n, int64_t c, int64_t h, int64_t w);

/// [N*H*W, C] pixel rows -> NCHW.
GatherPlanPtr rows_to_nchw_plan(int64_t n, int64_t h, int64_t w, int64_t c);

/// NCHW -> [N*OH*OW, C*kh*kw] patch rows; out-of-bounds taps map to zero.
/// OH = (H + 2*pad - kh)/stride + 1 (asserted integral by caller usage).
GatherPlanPtr im2col_plan(int64_t n, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw,
                          int64_t stride, int64_t pad);

/// [N*H*W, Cout*kh*kw] rows -> NCHW output of a stride-`stride` transposed
/// conv with OH = (H-1)*stride + kh. Overlapping taps accumulate.
ScatterPlanPtr col2im_plan(int64_t n, int64_t cout, int64_t h, int64_t w, int64_t kh, int64_t kw,
                           int64_t stride);

/// NCHW image -> [N*T, C*p*p] patch-token rows, T = (H/p)*(W/p).
GatherPlanPtr patchify_plan(int64_t n, int64_t c, int64_t h, int64_t w, int64_t p);

/// [N*T, C*p*p] patch-token rows -> NCHW image. Exact inverse of patchify.
GatherPlanPtr unpatchify_plan(int64_t n, int64_t c, int64_t h, int64_t w, int64_t p);

/// Token rows [N*G*G, d] -> window rows [N*nw*nw*w*w, d] grouped per window.
GatherPlanPtr window_partition_plan(int64_t n, int64_t g, int64_t d, int64_t w);

/// Inverse of window_partition_plan.
GatherPlanPtr window_reverse_plan(int64_t n, int64_t g, int64_t d, int64_t w);

/// Cyclic token-grid shift: out(gy,gx) = in((gy+shift) mod G, (gx+shift) mod G).
GatherPlanPtr roll_tokens_plan(int64_t n, int64_t g, int64_t d, int64_t shift);

/// Column slice [rows, cols] -> [rows, width] starting at `offset`.
GatherPlanPtr slice_cols_plan(int64_t rows, int64_t cols, int64_t offset, int64_t width);

/// [N*T, d] token rows -> [N*h, T, dh] head-major batches (d = h*dh).
GatherPlanPtr split_heads_plan(int64_t n, int64_t t, int64_t heads, int64_t dh);

/// Inverse of split_heads_plan.
GatherPlanPtr merge_heads_plan(int64_t n, int64_t t, int64_t heads, int64_t dh);

}  // namespace fp4lab::ad
