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
#include <vector>

#include "fp4lab/rng.hpp"
#include "fp4lab/tensor.hpp"

namespace fp4lab::data {

/// One 2-D slice: image in [0,1], binary mask (1 = anomaly pixel).
struct SliceSample {
  Tensor image;  // [3,H,W]
  Tensor mask;   // [1,H,W], values in {0,1}
  bool positive = false;
};

/// All slices of one patient; slices share the patient's anomaly style so
/// they are correlated the way repeated acquisitions are.
struct PatientVolume {
  int64_t patient_id = 0;
  std::vector<SliceSample> slices;
};

struct DataConfig {
  uint64_t seed = 1;
  int64_t n_patients = 40;
  int64_t slices_per_patient = 12;
  double positive_rate = 0.349;
  int64_t image = 32;
};

/// Synthetic anomaly-segmentation corpus: smooth correlated background plus
/// 1..3 soft-edged elliptical bright blobs on positive slices. A pure
/// function of the config (bitwise deterministic). The realized
/// positive-slice fraction equals round(rate * total) / total.
std::vector<PatientVolume> generate_dataset(const DataConfig& cfg);

double positive_fraction(const std::vector<PatientVolume>& ds);

/// Patient-level partitions: every slice of a patient lands in exactly one
/// of train/val/test.
struct SplitSpec {
  std::vector<int64_t> train, val, test;  // patient ids
};

/// Shuffles patients by seed and cuts ratio-sized partitions (each at least
/// one patient; throws when there are too few patients).
SplitSpec split_patients(const std::vector<PatientVolume>& ds, double train_frac,
                         double val_frac, double test_frac, uint64_t seed);

/// k disjoint test folds covering all patients exactly once; each fold's
/// validation set is the following fold's test patients, train is the rest.
std::vector<SplitSpec> kfold_splits(const std::vector<PatientVolume>& ds, int k, uint64_t seed);

/// Throws unless the partitions are pairwise disjoint and cover all ids.
void check_split(const SplitSpec& s, const std::vector<PatientVolume>& ds);

// ---------------------------------------------------------------------------
// augmentation
// ---------------------------------------------------------------------------

struct AugmentParams {
  bool hflip = false, vflip = false;
  double brightness = 0.0, contrast = 0.0;  // +-0.2
  double shift_x = 0.0, shift_y = 0.0;      // fraction of size, +-0.1
  double scale = 1.0;                       // 0.9..1.1
  double rotate_deg = 0.0;                  // +-15
};

AugmentParams sample_augment(RngStream& rng);

/// Joint geometric transform (bilinear image, nearest-neighbor mask — masks
/// stay binary), then brightness/contrast on the image only, clamped to
/// [0,1]. Identity params leave both tensors untouched.
void apply_augment(Tensor& image, Tensor& mask, const AugmentParams& p);

/// Per-channel ImageNet statistics; applied to train, val and test alike.
void normalize_imagenet(Tensor& image);

// ---------------------------------------------------------------------------
// on-disk layout: patient_<id>/slice_<k>.pgm (+ _mask.pgm) and manifest.json
// ---------------------------------------------------------------------------

void save_dataset(const std::string& dir, const std::vector<PatientVolume>& ds);
std::vector<PatientVolume> load_dataset(const std::string& dir);

}  // namespace fp4lab::data
