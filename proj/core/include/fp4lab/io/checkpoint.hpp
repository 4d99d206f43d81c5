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

#include "fp4lab/models/model.hpp"

namespace fp4lab::io {

/// Checkpoint layout: manifest.json (parameter names, shapes, dtype, blob
/// file names, trainable flags, plus a free-form config object) and one flat
/// little-endian FP32 binary blob per parameter.
void save_checkpoint(const std::string& dir, models::Model& m,
                     const std::string& config_json = "{}");

/// Loads blobs into the model by parameter name; throws on missing names or
/// shape mismatches.
void load_checkpoint(const std::string& dir, models::Model& m);

std::string checkpoint_config(const std::string& dir);

}  // namespace fp4lab::io
