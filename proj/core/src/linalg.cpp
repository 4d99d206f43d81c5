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

#include "fp4lab/linalg.hpp"

#include <stdexcept>

namespace fp4lab::linalg {

namespace {

void check2d(const Tensor& t, const char* who) {
  if (t.ndim() != 2) throw std::runtime_error(std::string(who) + ": expected 2-D tensor");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check2d(a, "matmul");
  check2d(b, "matmul");
  if (a.shape[1] != b.shape[0])
    throw std::runtime_error("matmul: inner dimensions differ " + shape_str(a.shape) + " * " +
                             shape_str(b.shape));
  int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor c({m, n});
  const float* __restrict__ pa = a.ptr();
  const float* __restrict__ pb = b.ptr();
  float* __restrict__ pc = c.ptr();
  for (int64_t i = 0; i < m; ++i) {
    float* crow = pc + i * n;
    for (int64_t t = 0; t < k; ++t) {
      float av = pa[i * k + t];
      if (av == 0.0f) continue;
      const float* brow = pb + t * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check2d(a, "matmul_tn");
  check2d(b, "matmul_tn");
  if (a.shape[0] != b.shape[0])
    throw std::runtime_error("matmul_tn: leading dimensions differ " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
  int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor c({k, n});
  const float* __restrict__ pa = a.ptr();
  const float* __restrict__ pb = b.ptr();
  float* __restrict__ pc = c.ptr();
  for (int64_t t = 0; t < m; ++t) {
    const float* brow = pb + t * n;
    for (int64_t i = 0; i < k; ++i) {
      float av = pa[t * k + i];
      if (av == 0.0f) continue;
      float* crow = pc + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check2d(a, "matmul_nt");
  check2d(b, "matmul_nt");
  if (a.shape[1] != b.shape[1])
    throw std::runtime_error("matmul_nt: trailing dimensions differ " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
  int64_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
  Tensor c({m, n});
  const float* __restrict__ pa = a.ptr();
  const float* __restrict__ pb = b.ptr();
  float* __restrict__ pc = c.ptr();
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = pa + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const float* brow = pb + j * k;
      float acc = 0.0f;
      for (int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      pc[i * n + j] = acc;
    }
  }
  return c;
}

Tensor transpose2d(const Tensor& a) {
  check2d(a, "transpose2d");
  int64_t m = a.shape[0], n = a.shape[1];
  Tensor t({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      t.data[static_cast<size_t>(j * m + i)] = a.data[static_cast<size_t>(i * n + j)];
  return t;
}

}  // namespace fp4lab::linalg
