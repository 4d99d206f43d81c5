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

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "fp4lab/data/dataset.hpp"

namespace fp4lab::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Minimal binary PGM (P5) / PPM (P6), 8-bit.
void write_pnm(const fs::path& path, const Tensor& t) {
  int64_t ch = t.shape[0], h = t.shape[1], w = t.shape[2];
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << (ch == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < ch; ++c) {
        double v = t.data[static_cast<size_t>((c * h + y) * w + x)];
        unsigned char byte =
            static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
        f.put(static_cast<char>(byte));
      }
}

Tensor read_pnm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  f >> magic;
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error(path.string() + ": unsupported format " + magic);
  auto next_int = [&f, &path]() {
    // Skip whitespace and '#' comments.
    for (;;) {
      int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    long long v;
    if (!(f >> v)) throw std::runtime_error(path.string() + ": truncated header");
    return v;
  };
  int64_t w = next_int(), h = next_int(), maxv = next_int();
  if (maxv != 255) throw std::runtime_error(path.string() + ": only 8-bit images supported");
  f.get();  // single whitespace after maxval
  int64_t ch = magic == "P5" ? 1 : 3;
  Tensor t({ch, h, w});
  std::vector<char> buf(static_cast<size_t>(ch * h * w));
  f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error(path.string() + ": truncated pixel data");
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < ch; ++c)
        t.data[static_cast<size_t>((c * h + y) * w + x)] =
            static_cast<float>(static_cast<unsigned char>(
                buf[static_cast<size_t>((y * w + x) * ch + c)])) /
            255.0f;
  return t;
}

Tensor to_gray(const Tensor& img) {
  int64_t h = img.shape[1], w = img.shape[2];
  Tensor g({1, h, w});
  for (int64_t i = 0; i < h * w; ++i)
    g.data[static_cast<size_t>(i)] =
        (img.data[static_cast<size_t>(i)] + img.data[static_cast<size_t>(h * w + i)] +
         img.data[static_cast<size_t>(2 * h * w + i)]) /
        3.0f;
  return g;
}

}  // namespace

void save_dataset(const std::string& dir, const std::vector<PatientVolume>& ds) {
  fs::create_directories(dir);
  json manifest;
  manifest["image_size"] = ds.empty() || ds[0].slices.empty() ? 0 : ds[0].slices[0].image.shape[2];
  manifest["patients"] = json::array();
  for (const auto& v : ds) {
    fs::path pdir = fs::path(dir) / ("patient_" + std::to_string(v.patient_id));
    fs::create_directories(pdir);
    for (size_t k = 0; k < v.slices.size(); ++k) {
      write_pnm(pdir / ("slice_" + std::to_string(k) + ".pgm"), to_gray(v.slices[k].image));
      write_pnm(pdir / ("slice_" + std::to_string(k) + "_mask.pgm"), v.slices[k].mask);
    }
    manifest["patients"].push_back(
        {{"id", v.patient_id}, {"slices", static_cast<int64_t>(v.slices.size())}});
  }
  std::ofstream f(fs::path(dir) / "manifest.json");
  f << manifest.dump(2) << "\n";
}

std::vector<PatientVolume> load_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json in " + dir);
  json manifest = json::parse(mf);
  std::vector<PatientVolume> ds;
  for (const auto& pj : manifest.at("patients")) {
    PatientVolume v;
    v.patient_id = pj.at("id").get<int64_t>();
    fs::path pdir = fs::path(dir) / ("patient_" + std::to_string(v.patient_id));
    int64_t n = pj.at("slices").get<int64_t>();
    for (int64_t k = 0; k < n; ++k) {
      SliceSample s;
      fs::path img_pgm = pdir / ("slice_" + std::to_string(k) + ".pgm");
      fs::path img_ppm = pdir / ("slice_" + std::to_string(k) + ".ppm");
      Tensor img = fs::exists(img_ppm) ? read_pnm(img_ppm) : read_pnm(img_pgm);
      if (img.shape[0] == 1) {
        // Grayscale: replicate to the 3-channel layout the models expect.
        Tensor rgb({3, img.shape[1], img.shape[2]});
        for (int c = 0; c < 3; ++c)
          std::copy(img.data.begin(), img.data.end(),
                    rgb.data.begin() + static_cast<int64_t>(c) * img.shape[1] * img.shape[2]);
        img = std::move(rgb);
      }
      s.image = std::move(img);
      Tensor m = read_pnm(pdir / ("slice_" + std::to_string(k) + "_mask.pgm"));
      for (auto& val : m.data) val = val > 0.5f ? 1.0f : 0.0f;
      s.mask = std::move(m);
      s.positive = s.mask.max_abs() > 0.0f;
      v.slices.push_back(std::move(s));
    }
    ds.push_back(std::move(v));
  }
  return ds;
}

}  // namespace fp4lab::data
