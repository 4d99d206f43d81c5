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

#include <cmath>
#include <vector>

#include "fp4lab/rng.hpp"
#include "fp4lab/tensor.hpp"

namespace testutil {

inline fp4lab::Tensor random_tensor(fp4lab::Shape shape, fp4lab::RngStream& rng,
                                    double lo = -1.0, double hi = 1.0) {
  fp4lab::Tensor t(shape);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline double rel_frobenius_diff(const fp4lab::Tensor& a, const fp4lab::Tensor& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    num += d * d;
    den += static_cast<double>(b.data[i]) * static_cast<double>(b.data[i]);
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double max_abs_diff(const fp4lab::Tensor& a, const fp4lab::Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = std::fabs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    if (d > m) m = d;
  }
  return m;
}

// Plain triple-loop matmul in double precision; reference for GEMM checks.
inline fp4lab::Tensor matmul_ref(const fp4lab::Tensor& a, const fp4lab::Tensor& b) {
  int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  fp4lab::Tensor c({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t)
        acc += static_cast<double>(a.data[static_cast<size_t>(i * k + t)]) *
               static_cast<double>(b.data[static_cast<size_t>(t * n + j)]);
      c.data[static_cast<size_t>(i * n + j)] = static_cast<float>(acc);
    }
  return c;
}

}  // namespace testutil
