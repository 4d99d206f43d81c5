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

#include "fp4lab/tensor.hpp"

namespace fp4lab::linalg {

/// C = A[m,k] * B[k,n]. Sequential, fixed accumulation order (deterministic).
Tensor matmul(const Tensor& a, const Tensor& b);

/// C = A^T * B with A[m,k], B[m,n] -> [k,n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

/// C = A * B^T with A[m,k], B[n,k] -> [m,n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose2d(const Tensor& a);

}  // namespace fp4lab::linalg
