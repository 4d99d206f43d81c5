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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "fp4lab/data/dataset.hpp"

using namespace fp4lab;
using namespace fp4lab::data;

TEST_CASE("generated dataset hits the target positive fraction within 3%") {
  DataConfig cfg;
  cfg.seed = 5;
  cfg.n_patients = 40;
  cfg.slices_per_patient = 12;
  cfg.positive_rate = 0.349;
  auto ds = generate_dataset(cfg);
  double frac = positive_fraction(ds);
  CHECK(frac >= 0.319);
  CHECK(frac <= 0.379);
}

TEST_CASE("dataset generation is a pure function of the seed") {
  DataConfig cfg;
  cfg.seed = 7;
  cfg.n_patients = 4;
  cfg.slices_per_patient = 3;
  auto a = generate_dataset(cfg);
  auto b = generate_dataset(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t p = 0; p < a.size(); ++p)
    for (size_t s = 0; s < a[p].slices.size(); ++s) {
      CHECK(a[p].slices[s].image.bitwise_equal(b[p].slices[s].image));
      CHECK(a[p].slices[s].mask.bitwise_equal(b[p].slices[s].mask));
    }
  cfg.seed = 8;
  auto c = generate_dataset(cfg);
  CHECK(!a[0].slices[0].image.bitwise_equal(c[0].slices[0].image));
}

TEST_CASE("negative slices carry all-zero masks; positives are binary and nonempty") {
  DataConfig cfg;
  cfg.seed = 11;
  cfg.n_patients = 10;
  cfg.slices_per_patient = 6;
  for (const auto& v : generate_dataset(cfg)) {
    for (const auto& s : v.slices) {
      bool any = false;
      for (float m : s.mask.data) {
        CHECK((m == 0.0f || m == 1.0f));
        any |= m == 1.0f;
      }
      CHECK(any == s.positive);
    }
  }
}

TEST_CASE("80/10/10 split of 10 patients gives 8/1/1, disjoint, seed-deterministic") {
  DataConfig cfg;
  cfg.seed = 3;
  cfg.n_patients = 10;
  cfg.slices_per_patient = 2;
  auto ds = generate_dataset(cfg);
  auto s = split_patients(ds, 0.8, 0.1, 0.1, 42);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  auto s2 = split_patients(ds, 0.8, 0.1, 0.1, 42);
  CHECK(s.train == s2.train);
  auto s3 = split_patients(ds, 0.8, 0.1, 0.1, 43);
  CHECK_NOTHROW(check_split(s3, ds));
  CHECK(s.train != s3.train);  // overwhelmingly likely under a different seed
}

TEST_CASE("5-fold split of 10 patients: each patient in exactly one test fold") {
  DataConfig cfg;
  cfg.seed = 4;
  cfg.n_patients = 10;
  cfg.slices_per_patient = 2;
  auto ds = generate_dataset(cfg);
  auto folds = kfold_splits(ds, 5, 9);
  REQUIRE(folds.size() == 5);
  std::multiset<int64_t> seen;
  for (const auto& f : folds) {
    CHECK(f.test.size() == 2);
    seen.insert(f.test.begin(), f.test.end());
  }
  CHECK(seen.size() == 10);
  for (int64_t p = 0; p < 10; ++p) CHECK(seen.count(p) == 1);
}

TEST_CASE("splits reject too-few patients") {
  DataConfig cfg;
  cfg.seed = 4;
  cfg.n_patients = 2;
  cfg.slices_per_patient = 1;
  auto ds = generate_dataset(cfg);
  CHECK_THROWS_AS(split_patients(ds, 0.8, 0.1, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(kfold_splits(ds, 5, 1), std::invalid_argument);
}

TEST_CASE("identity augmentation parameters leave tensors untouched") {
  DataConfig cfg;
  cfg.seed = 6;
  cfg.n_patients = 1;
  cfg.slices_per_patient = 1;
  auto ds = generate_dataset(cfg);
  Tensor img = ds[0].slices[0].image, msk = ds[0].slices[0].mask;
  Tensor img0 = img, msk0 = msk;
  apply_augment(img, msk, AugmentParams{});
  CHECK(img.bitwise_equal(img0));
  CHECK(msk.bitwise_equal(msk0));
}

TEST_CASE("double horizontal flip is the identity on image and mask") {
  DataConfig cfg;
  cfg.seed = 12;
  cfg.n_patients = 1;
  cfg.slices_per_patient = 1;
  cfg.positive_rate = 0.9;
  auto ds = generate_dataset(cfg);
  Tensor img = ds[0].slices[0].image, msk = ds[0].slices[0].mask;
  Tensor img0 = img, msk0 = msk;
  AugmentParams p;
  p.hflip = true;
  apply_augment(img, msk, p);
  CHECK(!img.bitwise_equal(img0));
  apply_augment(img, msk, p);
  CHECK(img.bitwise_equal(img0));
  CHECK(msk.bitwise_equal(msk0));
}

TEST_CASE("masks stay binary under 1000 random augmentations") {
  DataConfig cfg;
  cfg.seed = 13;
  cfg.n_patients = 2;
  cfg.slices_per_patient = 2;
  cfg.positive_rate = 0.8;
  auto ds = generate_dataset(cfg);
  RngStream rng(77);
  for (int i = 0; i < 1000; ++i) {
    Tensor img = ds[i % 2].slices[i / 2 % 2].image;
    Tensor msk = ds[i % 2].slices[i / 2 % 2].mask;
    apply_augment(img, msk, sample_augment(rng));
    for (float m : msk.data) CHECK((m == 0.0f || m == 1.0f));
    for (float v : img.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("imagenet normalization applies the published constants") {
  Tensor img({3, 2, 2}, 0.5f);
  normalize_imagenet(img);
  CHECK(img.data[0] == doctest::Approx((0.5 - 0.485) / 0.229));
  CHECK(img.data[4] == doctest::Approx((0.5 - 0.456) / 0.224));
  CHECK(img.data[8] == doctest::Approx((0.5 - 0.406) / 0.225));
}

TEST_CASE("dataset save/load round-trips masks exactly and images to 8-bit") {
  DataConfig cfg;
  cfg.seed = 21;
  cfg.n_patients = 3;
  cfg.slices_per_patient = 2;
  cfg.positive_rate = 0.5;
  auto ds = generate_dataset(cfg);
  std::string dir = "test_ds_out";
  save_dataset(dir, ds);
  auto back = load_dataset(dir);
  REQUIRE(back.size() == ds.size());
  for (size_t p = 0; p < ds.size(); ++p) {
    for (size_t s = 0; s < ds[p].slices.size(); ++s) {
      CHECK(back[p].slices[s].mask.bitwise_equal(ds[p].slices[s].mask));
      CHECK(back[p].slices[s].positive == ds[p].slices[s].positive);
      // Saved grayscale: loaded channels agree with the channel mean to 8-bit.
      const Tensor& orig = ds[p].slices[s].image;
      const Tensor& got = back[p].slices[s].image;
      int64_t hw = orig.shape[1] * orig.shape[2];
      for (int64_t i = 0; i < hw; ++i) {
        double mean = (orig.data[static_cast<size_t>(i)] +
                       orig.data[static_cast<size_t>(hw + i)] +
                       orig.data[static_cast<size_t>(2 * hw + i)]) /
                      3.0;
        CHECK(std::fabs(got.data[static_cast<size_t>(i)] - mean) <= 1.0 / 255.0);
      }
    }
  }
  std::filesystem::remove_all(dir);
}
