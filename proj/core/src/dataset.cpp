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

#include "fp4lab/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fp4lab::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct PatientStyle {
  double contrast;      // blob brightness lift
  double radius_scale;  // typical blob radius, pixels
  double cx_bias, cy_bias;
};

struct Blob {
  double cx, cy, rx, ry, angle;
};

// Smooth correlated background: a few low-frequency cosine waves plus a
// touch of per-pixel noise, per channel tint.
void fill_background(Tensor& img, RngStream& rng, int64_t hw) {
  struct Wave {
    double a, fx, fy, phase;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i)
    waves.push_back({rng.uniform(0.04, 0.10), rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5),
                     rng.uniform(0.0, 2.0 * kPi)});
  double tint[3] = {rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03),
                    rng.uniform(-0.03, 0.03)};
  for (int64_t y = 0; y < hw; ++y) {
    for (int64_t x = 0; x < hw; ++x) {
      double v = 0.42;
      for (const auto& w : waves)
        v += w.a * std::cos(2.0 * kPi * (w.fx * x + w.fy * y) / static_cast<double>(hw) +
                            w.phase);
      v += rng.uniform(-0.015, 0.015);
      for (int c = 0; c < 3; ++c) {
        double pv = std::clamp(v + tint[c], 0.0, 1.0);
        img.data[static_cast<size_t>((c * hw + y) * hw + x)] = static_cast<float>(pv);
      }
    }
  }
}

void stamp_blobs(Tensor& img, Tensor& mask, const std::vector<Blob>& blobs, double contrast,
                 int64_t hw) {
  for (int64_t y = 0; y < hw; ++y) {
    for (int64_t x = 0; x < hw; ++x) {
      double lift = 0.0;
      bool inside = false;
      for (const auto& b : blobs) {
        double dx = x - b.cx, dy = y - b.cy;
        double u = std::cos(b.angle) * dx + std::sin(b.angle) * dy;
        double v = -std::sin(b.angle) * dx + std::cos(b.angle) * dy;
        double d = std::sqrt((u / b.rx) * (u / b.rx) + (v / b.ry) * (v / b.ry));
        if (d <= 1.0) inside = true;
        // Soft edge: full lift inside, smooth rolloff just outside.
        double soft = 1.0 / (1.0 + std::exp((d - 1.0) * 6.0));
        lift = std::max(lift, soft);
      }
      if (lift > 0.0) {
        for (int c = 0; c < 3; ++c) {
          auto& pv = img.data[static_cast<size_t>((c * hw + y) * hw + x)];
          pv = static_cast<float>(std::clamp(pv + contrast * lift, 0.0, 1.0));
        }
      }
      if (inside) mask.data[static_cast<size_t>(y * hw + x)] = 1.0f;
    }
  }
}

}  // namespace

std::vector<PatientVolume> generate_dataset(const DataConfig& cfg) {
  if (cfg.positive_rate <= 0.0 || cfg.positive_rate >= 1.0)
    throw std::invalid_argument("positive_rate must lie in (0,1)");
  int64_t total = cfg.n_patients * cfg.slices_per_patient;
  int64_t n_pos = std::llround(cfg.positive_rate * static_cast<double>(total));

  // Deterministic positive-slot assignment: exact count, shuffled over all
  // (patient, slice) pairs.
  std::vector<int64_t> slots(static_cast<size_t>(total));
  for (int64_t i = 0; i < total; ++i) slots[static_cast<size_t>(i)] = i;
  RngStream slot_rng(RngStream::derive(cfg.seed, 0xA11));
  slot_rng.shuffle(slots);
  std::vector<char> is_pos(static_cast<size_t>(total), 0);
  for (int64_t i = 0; i < n_pos; ++i) is_pos[static_cast<size_t>(slots[static_cast<size_t>(i)])] = 1;

  std::vector<PatientVolume> ds;
  ds.reserve(static_cast<size_t>(cfg.n_patients));
  for (int64_t p = 0; p < cfg.n_patients; ++p) {
    RngStream style_rng(RngStream::derive(cfg.seed, 0x57E + static_cast<uint64_t>(p)));
    PatientStyle style;
    style.contrast = style_rng.uniform(0.28, 0.45);
    style.radius_scale = style_rng.uniform(3.5, 6.5) * static_cast<double>(cfg.image) / 32.0;
    style.cx_bias = style_rng.uniform(-0.15, 0.15);
    style.cy_bias = style_rng.uniform(-0.15, 0.15);

    PatientVolume vol;
    vol.patient_id = p;
    for (int64_t s = 0; s < cfg.slices_per_patient; ++s) {
      RngStream rng(RngStream::derive(cfg.seed, 0x100000 + static_cast<uint64_t>(p) * 4096 +
                                                    static_cast<uint64_t>(s)));
      SliceSample sample;
      sample.image = Tensor({3, cfg.image, cfg.image});
      sample.mask = Tensor({1, cfg.image, cfg.image});
      fill_background(sample.image, rng, cfg.image);
      sample.positive = is_pos[static_cast<size_t>(p * cfg.slices_per_patient + s)] != 0;
      if (sample.positive) {
        int n_blobs = 1 + static_cast<int>(rng.next_below(3));
        std::vector<Blob> blobs;
        for (int b = 0; b < n_blobs; ++b) {
          Blob bl;
          double margin = 0.22;
          bl.cx = (0.5 + style.cx_bias * 0.5 +
                   rng.uniform(-0.5 + margin, 0.5 - margin) * 0.9) *
                  static_cast<double>(cfg.image);
          bl.cy = (0.5 + style.cy_bias * 0.5 +
                   rng.uniform(-0.5 + margin, 0.5 - margin) * 0.9) *
                  static_cast<double>(cfg.image);
          bl.rx = style.radius_scale * rng.uniform(0.7, 1.3);
          bl.ry = style.radius_scale * rng.uniform(0.7, 1.3);
          bl.angle = rng.uniform(0.0, kPi);
          blobs.push_back(bl);
        }
        stamp_blobs(sample.image, sample.mask, blobs, style.contrast, cfg.image);
      }
      vol.slices.push_back(std::move(sample));
    }
    ds.push_back(std::move(vol));
  }
  return ds;
}

double positive_fraction(const std::vector<PatientVolume>& ds) {
  int64_t pos = 0, total = 0;
  for (const auto& v : ds)
    for (const auto& s : v.slices) {
      ++total;
      if (s.positive) ++pos;
    }
  return total ? static_cast<double>(pos) / static_cast<double>(total) : 0.0;
}

SplitSpec split_patients(const std::vector<PatientVolume>& ds, double train_frac,
                         double val_frac, double test_frac, uint64_t seed) {
  (void)train_frac;
  int64_t n = static_cast<int64_t>(ds.size());
  int64_t n_val = std::max<int64_t>(1, std::llround(val_frac * static_cast<double>(n)));
  int64_t n_test = std::max<int64_t>(1, std::llround(test_frac * static_cast<double>(n)));
  if (n_val + n_test >= n)
    throw std::invalid_argument("too few patients for the requested split ratios");
  std::vector<int64_t> ids;
  for (const auto& v : ds) ids.push_back(v.patient_id);
  RngStream rng(RngStream::derive(seed, 0x5F17));
  rng.shuffle(ids);
  SplitSpec s;
  s.test.assign(ids.begin(), ids.begin() + n_test);
  s.val.assign(ids.begin() + n_test, ids.begin() + n_test + n_val);
  s.train.assign(ids.begin() + n_test + n_val, ids.end());
  check_split(s, ds);
  return s;
}

std::vector<SplitSpec> kfold_splits(const std::vector<PatientVolume>& ds, int k, uint64_t seed) {
  int64_t n = static_cast<int64_t>(ds.size());
  if (k < 2 || n < 2 * k)
    throw std::invalid_argument("too few patients for " + std::to_string(k) + "-fold splitting");
  std::vector<int64_t> ids;
  for (const auto& v : ds) ids.push_back(v.patient_id);
  RngStream rng(RngStream::derive(seed, 0xF01D));
  rng.shuffle(ids);
  std::vector<std::vector<int64_t>> folds(static_cast<size_t>(k));
  for (int64_t i = 0; i < n; ++i)
    folds[static_cast<size_t>(i % k)].push_back(ids[static_cast<size_t>(i)]);
  std::vector<SplitSpec> out;
  for (int f = 0; f < k; ++f) {
    SplitSpec s;
    s.test = folds[static_cast<size_t>(f)];
    s.val = folds[static_cast<size_t>((f + 1) % k)];
    for (int g = 0; g < k; ++g)
      if (g != f && g != (f + 1) % k)
        s.train.insert(s.train.end(), folds[static_cast<size_t>(g)].begin(),
                       folds[static_cast<size_t>(g)].end());
    check_split(s, ds);
    out.push_back(std::move(s));
  }
  return out;
}

void check_split(const SplitSpec& s, const std::vector<PatientVolume>& ds) {
  std::vector<int64_t> all;
  all.insert(all.end(), s.train.begin(), s.train.end());
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::vector<int64_t> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::runtime_error("patient leakage: split partitions overlap");
  if (sorted.size() != ds.size())
    throw std::runtime_error("split partitions do not cover all patients");
}

// ---------------------------------------------------------------------------
// augmentation
// ---------------------------------------------------------------------------

AugmentParams sample_augment(RngStream& rng) {
  AugmentParams p;
  p.hflip = rng.coin();
  p.vflip = rng.coin();
  p.brightness = rng.uniform(-0.2, 0.2);
  p.contrast = rng.uniform(-0.2, 0.2);
  p.shift_x = rng.uniform(-0.1, 0.1);
  p.shift_y = rng.uniform(-0.1, 0.1);
  p.scale = rng.uniform(0.9, 1.1);
  p.rotate_deg = rng.uniform(-15.0, 15.0);
  return p;
}

namespace {

bool is_identity_geometry(const AugmentParams& p) {
  return !p.hflip && !p.vflip && p.shift_x == 0.0 && p.shift_y == 0.0 && p.scale == 1.0 &&
         p.rotate_deg == 0.0;
}

float sample_bilinear(const Tensor& img, int64_t c, double y, double x, int64_t hw) {
  double yc = std::clamp(y, 0.0, static_cast<double>(hw - 1));
  double xc = std::clamp(x, 0.0, static_cast<double>(hw - 1));
  int64_t y0 = static_cast<int64_t>(std::floor(yc)), x0 = static_cast<int64_t>(std::floor(xc));
  int64_t y1 = std::min(y0 + 1, hw - 1), x1 = std::min(x0 + 1, hw - 1);
  double fy = yc - y0, fx = xc - x0;
  auto at = [&](int64_t yy, int64_t xx) {
    return static_cast<double>(img.data[static_cast<size_t>((c * hw + yy) * hw + xx)]);
  };
  return static_cast<float>((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                            fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1)));
}

float sample_nearest(const Tensor& img, int64_t c, double y, double x, int64_t hw) {
  int64_t yy = static_cast<int64_t>(std::llround(y));
  int64_t xx = static_cast<int64_t>(std::llround(x));
  if (yy < 0 || yy >= hw || xx < 0 || xx >= hw) return 0.0f;
  return img.data[static_cast<size_t>((c * hw + yy) * hw + xx)];
}

}  // namespace

void apply_augment(Tensor& image, Tensor& mask, const AugmentParams& p) {
  int64_t hw = image.shape[2];
  if (p.hflip || p.vflip) {
    Tensor img2 = image, msk2 = mask;
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < hw; ++y)
        for (int64_t x = 0; x < hw; ++x) {
          int64_t sy = p.vflip ? hw - 1 - y : y;
          int64_t sx = p.hflip ? hw - 1 - x : x;
          img2.data[static_cast<size_t>((c * hw + y) * hw + x)] =
              image.data[static_cast<size_t>((c * hw + sy) * hw + sx)];
          if (c == 0)
            msk2.data[static_cast<size_t>(y * hw + x)] =
                mask.data[static_cast<size_t>(sy * hw + sx)];
        }
    image = std::move(img2);
    mask = std::move(msk2);
  }
  if (!is_identity_geometry(p) &&
      (p.shift_x != 0.0 || p.shift_y != 0.0 || p.scale != 1.0 || p.rotate_deg != 0.0)) {
    double theta = p.rotate_deg * kPi / 180.0;
    double ct = std::cos(theta), st = std::sin(theta);
    double cx = (hw - 1) / 2.0, cy = (hw - 1) / 2.0;
    Tensor img2({3, hw, hw});
    Tensor msk2({1, hw, hw});
    for (int64_t y = 0; y < hw; ++y)
      for (int64_t x = 0; x < hw; ++x) {
        double u = x - cx - p.shift_x * hw;
        double v = y - cy - p.shift_y * hw;
        // Inverse rotation then inverse scale.
        double su = (ct * u + st * v) / p.scale + cx;
        double sv = (-st * u + ct * v) / p.scale + cy;
        for (int64_t c = 0; c < 3; ++c)
          img2.data[static_cast<size_t>((c * hw + y) * hw + x)] =
              sample_bilinear(image, c, sv, su, hw);
        msk2.data[static_cast<size_t>(y * hw + x)] = sample_nearest(mask, 0, sv, su, hw);
      }
    image = std::move(img2);
    mask = std::move(msk2);
  }
  if (p.brightness != 0.0 || p.contrast != 0.0) {
    for (auto& v : image.data) {
      double out = (static_cast<double>(v) - 0.5) * (1.0 + p.contrast) + 0.5 + p.brightness;
      v = static_cast<float>(std::clamp(out, 0.0, 1.0));
    }
  }
}

void normalize_imagenet(Tensor& image) {
  static const double mean[3] = {0.485, 0.456, 0.406};
  static const double stdd[3] = {0.229, 0.224, 0.225};
  int64_t plane = image.shape[image.ndim() - 1] * image.shape[image.ndim() - 2];
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < plane; ++i) {
      auto& v = image.data[static_cast<size_t>(c * plane + i)];
      v = static_cast<float>((static_cast<double>(v) - mean[c]) / stdd[c]);
    }
}

}  // namespace fp4lab::data
