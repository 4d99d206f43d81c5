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

#include "fp4lab/plans.hpp"

#include <stdexcept>

namespace fp4lab::ad {

namespace {

std::shared_ptr<GatherPlan> make_gather(Shape out, Shape in) {
  auto p = std::make_shared<GatherPlan>();
  p->out_shape = std::move(out);
  p->in_shape = std::move(in);
  p->src.resize(static_cast<size_t>(shape_numel(p->out_shape)));
  return p;
}

}  // namespace

GatherPlanPtr transpose2d_plan(int64_t m, int64_t n) {
  auto p = make_gather({n, m}, {m, n});
  for (int64_t j = 0; j < n; ++j)
    for (int64_t i = 0; i < m; ++i) p->src[static_cast<size_t>(j * m + i)] = i * n + j;
  return p;
}

GatherPlanPtr nchw_to_rows_plan(int64_t n, int64_t c, int64_t h, int64_t w) {
  auto p = make_gather({n * h * w, c}, {n, c, h, w});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ic = 0; ic < c; ++ic)
          p->src[static_cast<size_t>(((in * h + y) * w + x) * c + ic)] =
              ((in * c + ic) * h + y) * w + x;
  return p;
}

GatherPlanPtr rows_to_nchw_plan(int64_t n, int64_t h, int64_t w, int64_t c) {
  auto p = make_gather({n, c, h, w}, {n * h * w, c});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          p->src[static_cast<size_t>(((in * c + ic) * h + y) * w + x)] =
              ((in * h + y) * w + x) * c + ic;
  return p;
}

GatherPlanPtr im2col_plan(int64_t n, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw,
                          int64_t stride, int64_t pad) {
  int64_t oh = (h + 2 * pad - kh) / stride + 1;
  int64_t ow = (w + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw std::runtime_error("im2col: empty output");
  auto p = make_gather({n * oh * ow, c * kh * kw}, {n, c, h, w});
  int64_t cols = c * kh * kw;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        int64_t row = (in * oh + oy) * ow + ox;
        for (int64_t ic = 0; ic < c; ++ic)
          for (int64_t dy = 0; dy < kh; ++dy)
            for (int64_t dx = 0; dx < kw; ++dx) {
              int64_t iy = oy * stride + dy - pad;
              int64_t ix = ox * stride + dx - pad;
              int64_t col = (ic * kh + dy) * kw + dx;
              p->src[static_cast<size_t>(row * cols + col)] =
                  (iy < 0 || iy >= h || ix < 0 || ix >= w) ? -1
                                                           : ((in * c + ic) * h + iy) * w + ix;
            }
      }
  return p;
}

ScatterPlanPtr col2im_plan(int64_t n, int64_t cout, int64_t h, int64_t w, int64_t kh, int64_t kw,
                           int64_t stride) {
  int64_t oh = (h - 1) * stride + kh;
  int64_t ow = (w - 1) * stride + kw;
  auto p = std::make_shared<ScatterPlan>();
  p->in_shape = {n * h * w, cout * kh * kw};
  p->out_shape = {n, cout, oh, ow};
  p->dst.resize(static_cast<size_t>(shape_numel(p->in_shape)));
  int64_t cols = cout * kh * kw;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        int64_t row = (in * h + y) * w + x;
        for (int64_t ic = 0; ic < cout; ++ic)
          for (int64_t dy = 0; dy < kh; ++dy)
            for (int64_t dx = 0; dx < kw; ++dx) {
              int64_t col = (ic * kh + dy) * kw + dx;
              p->dst[static_cast<size_t>(row * cols + col)] =
                  ((in * cout + ic) * oh + (y * stride + dy)) * ow + (x * stride + dx);
            }
      }
  return p;
}

GatherPlanPtr patchify_plan(int64_t n, int64_t c, int64_t h, int64_t w, int64_t p0) {
  if (h % p0 || w % p0) throw std::runtime_error("patchify: image size not divisible by patch");
  int64_t gy = h / p0, gx = w / p0, t = gy * gx, cols = c * p0 * p0;
  auto p = make_gather({n * t, cols}, {n, c, h, w});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t py = 0; py < gy; ++py)
      for (int64_t px = 0; px < gx; ++px) {
        int64_t row = in * t + py * gx + px;
        for (int64_t ic = 0; ic < c; ++ic)
          for (int64_t dy = 0; dy < p0; ++dy)
            for (int64_t dx = 0; dx < p0; ++dx)
              p->src[static_cast<size_t>(row * cols + (ic * p0 + dy) * p0 + dx)] =
                  ((in * c + ic) * h + py * p0 + dy) * w + px * p0 + dx;
      }
  return p;
}

GatherPlanPtr unpatchify_plan(int64_t n, int64_t c, int64_t h, int64_t w, int64_t p0) {
  if (h % p0 || w % p0) throw std::runtime_error("unpatchify: image size not divisible by patch");
  int64_t gy = h / p0, gx = w / p0, t = gy * gx, cols = c * p0 * p0;
  auto p = make_gather({n, c, h, w}, {n * t, cols});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
          int64_t py = y / p0, dy = y % p0, px = x / p0, dx = x % p0;
          int64_t row = in * t + py * gx + px;
          p->src[static_cast<size_t>(((in * c + ic) * h + y) * w + x)] =
              row * cols + (ic * p0 + dy) * p0 + dx;
        }
  return p;
}

GatherPlanPtr window_partition_plan(int64_t n, int64_t g, int64_t d, int64_t w) {
  if (g % w) throw std::runtime_error("window_partition: grid not divisible by window");
  int64_t nw = g / w;
  auto p = make_gather({n * nw * nw * w * w, d}, {n * g * g, d});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t gy2 = 0; gy2 < g; ++gy2)
      for (int64_t gx2 = 0; gx2 < g; ++gx2) {
        int64_t wy = gy2 / w, wx = gx2 / w;
        int64_t local = (gy2 % w) * w + (gx2 % w);
        int64_t out_row = ((in * nw + wy) * nw + wx) * (w * w) + local;
        int64_t in_row = in * g * g + gy2 * g + gx2;
        for (int64_t c = 0; c < d; ++c)
          p->src[static_cast<size_t>(out_row * d + c)] = in_row * d + c;
      }
  return p;
}

GatherPlanPtr window_reverse_plan(int64_t n, int64_t g, int64_t d, int64_t w) {
  int64_t nw = g / w;
  auto p = make_gather({n * g * g, d}, {n * nw * nw * w * w, d});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t gy2 = 0; gy2 < g; ++gy2)
      for (int64_t gx2 = 0; gx2 < g; ++gx2) {
        int64_t wy = gy2 / w, wx = gx2 / w;
        int64_t local = (gy2 % w) * w + (gx2 % w);
        int64_t win_row = ((in * nw + wy) * nw + wx) * (w * w) + local;
        int64_t tok_row = in * g * g + gy2 * g + gx2;
        for (int64_t c = 0; c < d; ++c)
          p->src[static_cast<size_t>(tok_row * d + c)] = win_row * d + c;
      }
  return p;
}

GatherPlanPtr roll_tokens_plan(int64_t n, int64_t g, int64_t d, int64_t shift) {
  auto p = make_gather({n * g * g, d}, {n * g * g, d});
  int64_t s = ((shift % g) + g) % g;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t gy2 = 0; gy2 < g; ++gy2)
      for (int64_t gx2 = 0; gx2 < g; ++gx2) {
        int64_t sy = (gy2 + s) % g, sx = (gx2 + s) % g;
        int64_t out_row = in * g * g + gy2 * g + gx2;
        int64_t in_row = in * g * g + sy * g + sx;
        for (int64_t c = 0; c < d; ++c)
          p->src[static_cast<size_t>(out_row * d + c)] = in_row * d + c;
      }
  return p;
}

GatherPlanPtr slice_cols_plan(int64_t rows, int64_t cols, int64_t offset, int64_t width) {
  if (offset + width > cols) throw std::runtime_error("slice_cols: out of range");
  auto p = make_gather({rows, width}, {rows, cols});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < width; ++c)
      p->src[static_cast<size_t>(r * width + c)] = r * cols + offset + c;
  return p;
}

GatherPlanPtr split_heads_plan(int64_t n, int64_t t, int64_t heads, int64_t dh) {
  int64_t d = heads * dh;
  auto p = make_gather({n * heads, t, dh}, {n * t, d});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t hh = 0; hh < heads; ++hh)
      for (int64_t tt = 0; tt < t; ++tt)
        for (int64_t c = 0; c < dh; ++c)
          p->src[static_cast<size_t>(((in * heads + hh) * t + tt) * dh + c)] =
              (in * t + tt) * d + hh * dh + c;
  return p;
}

GatherPlanPtr merge_heads_plan(int64_t n, int64_t t, int64_t heads, int64_t dh) {
  int64_t d = heads * dh;
  auto p = make_gather({n * t, d}, {n * heads, t, dh});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t tt = 0; tt < t; ++tt)
      for (int64_t hh = 0; hh < heads; ++hh)
        for (int64_t c = 0; c < dh; ++c)
          p->src[static_cast<size_t>((in * t + tt) * d + hh * dh + c)] =
              ((in * heads + hh) * t + tt) * dh + c;
  return p;
}

}  // namespace fp4lab::ad
