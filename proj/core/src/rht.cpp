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

#include "fp4lab/rht.hpp"

#include <cmath>
#include <stdexcept>

namespace fp4lab::rht {

namespace {

bool is_pow2(int64_t h) { return h > 0 && (h & (h - 1)) == 0; }

void check_size(int64_t h) {
  if (!is_pow2(h) || h > 1024)
    throw std::invalid_argument("RHT size must be power of two (1..1024), got " +
                                std::to_string(h));
}

// In-place fast Walsh-Hadamard transform (unnormalized, Sylvester order).
void fwht(double* v, int64_t h) {
  for (int64_t len = 1; len < h; len <<= 1) {
    for (int64_t i = 0; i < h; i += len << 1) {
      for (int64_t j = i; j < i + len; ++j) {
        double a = v[j], b = v[j + len];
        v[j] = a + b;
        v[j + len] = a - b;
      }
    }
  }
}

}  // namespace

Tensor build_hadamard(int64_t h) {
  check_size(h);
  Tensor m({h, h});
  m.data[0] = 1.0f;
  for (int64_t n = 1; n < h; n <<= 1) {
    // Expand the top-left n x n block Sylvester-style.
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        float v = m.data[static_cast<size_t>(i * h + j)];
        m.data[static_cast<size_t>(i * h + j + n)] = v;
        m.data[static_cast<size_t>((i + n) * h + j)] = v;
        m.data[static_cast<size_t>((i + n) * h + j + n)] = -v;
      }
    }
  }
  return m;
}

RhtTransform RhtTransform::from_stream(int64_t h, RngStream& stream) {
  check_size(h);
  RhtTransform t;
  t.h = h;
  t.signs.resize(static_cast<size_t>(h));
  for (auto& s : t.signs) s = stream.coin() ? 1.0f : -1.0f;
  return t;
}

RhtTransform RhtTransform::from_seed(int64_t h, uint64_t seed) {
  RngStream s(seed);
  return from_stream(h, s);
}

RhtTransform RhtTransform::with_signs(std::vector<float> signs) {
  check_size(static_cast<int64_t>(signs.size()));
  RhtTransform t;
  t.h = static_cast<int64_t>(signs.size());
  t.signs = std::move(signs);
  return t;
}

Tensor RhtTransform::matrix() const {
  Tensor hmat = build_hadamard(h);
  double norm = 1.0 / std::sqrt(static_cast<double>(h));
  Tensor out({h, h});
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < h; ++j)
      out.data[static_cast<size_t>(i * h + j)] = static_cast<float>(
          norm * hmat.data[static_cast<size_t>(i * h + j)] *
          static_cast<double>(signs[static_cast<size_t>(j)]));
  return out;
}

Tensor apply_rht(const Tensor& x, const RhtTransform& t, int axis) {
  if (axis < 0 || axis >= x.ndim())
    throw std::invalid_argument("apply_rht: axis out of range");
  int64_t len = x.shape[static_cast<size_t>(axis)];
  if (len % t.h != 0)
    throw std::invalid_argument("apply_rht: axis length " + std::to_string(len) +
                                " not divisible by transform size " + std::to_string(t.h));
  if (t.h == 1) return x;

  int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.shape[static_cast<size_t>(i)];
  for (int i = 0; i < axis; ++i) outer *= x.shape[static_cast<size_t>(i)];

  Tensor out(x.shape);
  double norm = 1.0 / std::sqrt(static_cast<double>(t.h));
  std::vector<double> buf(static_cast<size_t>(t.h));
  int64_t chunks = len / t.h;
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t c = 0; c < chunks; ++c) {
      for (int64_t in = 0; in < inner; ++in) {
        int64_t base = (o * len + c * t.h) * inner + in;
        for (int64_t k = 0; k < t.h; ++k)
          buf[static_cast<size_t>(k)] =
              static_cast<double>(x.data[static_cast<size_t>(base + k * inner)]) *
              static_cast<double>(t.signs[static_cast<size_t>(k)]);
        fwht(buf.data(), t.h);
        for (int64_t j = 0; j < t.h; ++j)
          out.data[static_cast<size_t>(base + j * inner)] =
              static_cast<float>(buf[static_cast<size_t>(j)] * norm);
      }
    }
  }
  return out;
}

std::pair<Tensor, Tensor> rht_pair_apply(const Tensor& a, const Tensor& b,
                                         const RhtTransform& t) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw std::invalid_argument("rht_pair_apply expects 2-D operands");
  if (a.shape[1] != b.shape[0])
    throw std::invalid_argument("rht_pair_apply: contracted dimensions differ: " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
  if (a.shape[1] % t.h != 0)
    throw std::invalid_argument("rht_pair_apply: contracted dimension not divisible by h");
  if (t.h == 1) return {a, b};
  // (a T^T)[i, :] applies T to a's rows; (T b)[:, j] applies T to b's columns.
  return {apply_rht(a, t, 1), apply_rht(b, t, 0)};
}

}  // namespace fp4lab::rht
