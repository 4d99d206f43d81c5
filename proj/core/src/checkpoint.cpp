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

#include "fp4lab/io/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace fp4lab::io {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

static_assert(sizeof(float) == 4, "FP32 storage assumed");

void save_checkpoint(const std::string& dir, models::Model& m, const std::string& config_json) {
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["format"] = "fp4lab-checkpoint-v1";
  manifest["config"] = json::parse(config_json);
  manifest["params"] = ordered_json::array();
  int idx = 0;
  for (auto* p : m.parameters()) {
    char file[32];
    std::snprintf(file, sizeof file, "p%04d.bin", idx++);
    ordered_json pj;
    pj["name"] = p->name;
    pj["shape"] = p->value.shape;
    pj["dtype"] = "f32";
    pj["trainable"] = p->trainable;
    pj["file"] = file;
    manifest["params"].push_back(pj);
    std::ofstream f(fs::path(dir) / file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint blob " + std::string(file));
    f.write(reinterpret_cast<const char*>(p->value.ptr()),
            static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

void load_checkpoint(const std::string& dir, models::Model& m) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("missing checkpoint manifest in " + dir);
  json manifest = json::parse(mf);
  std::map<std::string, json> by_name;
  for (const auto& pj : manifest.at("params")) by_name[pj.at("name").get<std::string>()] = pj;
  for (auto* p : m.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint missing parameter " + p->name);
    Shape shape = it->second.at("shape").get<Shape>();
    if (shape != p->value.shape)
      throw std::runtime_error("checkpoint shape mismatch for " + p->name + ": " +
                               shape_str(shape) + " vs " + shape_str(p->value.shape));
    std::ifstream f(fs::path(dir) / it->second.at("file").get<std::string>(), std::ios::binary);
    if (!f) throw std::runtime_error("missing checkpoint blob for " + p->name);
    f.read(reinterpret_cast<char*>(p->value.ptr()),
           static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(p->value.numel() * sizeof(float)))
      throw std::runtime_error("truncated checkpoint blob for " + p->name);
  }
}

std::string checkpoint_config(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("missing checkpoint manifest in " + dir);
  json manifest = json::parse(mf);
  return manifest.value("config", json::object()).dump();
}

}  // namespace fp4lab::io
