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

#include "fp4lab/io/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace fp4lab::io {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[8] = {'F', 'P', '4', 'T', 'N', 'S', 'R', '0'};

[[noreturn]] void malformed(const std::string& path, size_t offset, const std::string& what) {
  throw std::runtime_error("malformed tensor file " + path + " at byte " +
                           std::to_string(offset) + ": " + what);
}

}  // namespace

void write_tensor_file(const std::string& path, const Tensor& t,
                       const std::string& extra_header_json) {
  json header = json::parse(extra_header_json);
  header["shape"] = t.shape;
  std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(kMagic, 8);
  uint32_t len = static_cast<uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  f.write(reinterpret_cast<const char*>(t.ptr()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

TensorFile read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    malformed(path, 0, "bad magic (expected FP4TNSR0)");
  uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 4);
  if (f.gcount() != 4) malformed(path, 8, "truncated header length");
  if (len > (1u << 20)) malformed(path, 8, "unreasonable header length");
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  if (f.gcount() != static_cast<std::streamsize>(len))
    malformed(path, 12, "truncated header");
  json header;
  try {
    header = json::parse(hs);
  } catch (const std::exception& e) {
    malformed(path, 12, std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.contains("shape")) malformed(path, 12, "header missing \"shape\"");
  Shape shape = header["shape"].get<Shape>();
  int64_t n = shape_numel(shape);
  if (n < 0 || n > (int64_t(1) << 32)) malformed(path, 12, "implausible shape");
  TensorFile tf;
  tf.header_json = hs;
  tf.tensor = Tensor(shape);
  size_t payload_at = 12 + len;
  f.read(reinterpret_cast<char*>(tf.tensor.ptr()),
         static_cast<std::streamsize>(n * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
    malformed(path, payload_at + static_cast<size_t>(f.gcount()),
              "payload shorter than shape requires");
  return tf;
}

}  // namespace fp4lab::io
