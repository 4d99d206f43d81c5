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

#include <string>

#include "fp4lab/tensor.hpp"

namespace fp4lab::io {

/// Tensor container: 8-byte magic "FP4TNSR0", little-endian uint32 header
/// length, a JSON header (at least {"shape": [...]}, optionally geometry /
/// mode / seed defaults for the quantize tool), then the flat little-endian
/// FP32 payload in row-major order.
struct TensorFile {
  Tensor tensor;
  std::string header_json;
};

void write_tensor_file(const std::string& path, const Tensor& t,
                       const std::string& extra_header_json = "{}");

/// Throws std::runtime_error naming the byte offset of the first
/// inconsistency on malformed input.
TensorFile read_tensor_file(const std::string& path);

}  // namespace fp4lab::io
