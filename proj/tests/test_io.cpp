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
#include <fstream>

#include "fp4lab/io/checkpoint.hpp"
#include "fp4lab/io/tensor_file.hpp"
#include "fp4lab/train/sweep.hpp"
#include "test_util.hpp"

using namespace fp4lab;
namespace fs = std::filesystem;

TEST_CASE("checkpoint round-trips every parameter bitwise") {
  auto recipe = qat::recipe_from_name("baseline-bf16");
  auto m = models::build_model(models::model_config(models::Arch::kCnn, "25k"), recipe, 5);
  std::string dir = "test_ckpt";
  io::save_checkpoint(dir, *m, R"({"note":"unit"})");

  auto m2 = models::build_model(models::model_config(models::Arch::kCnn, "25k"), recipe, 999);
  bool differs = false;
  auto p1 = m->parameters(), p2 = m2->parameters();
  for (size_t i = 0; i < p1.size(); ++i) differs |= !p1[i]->value.bitwise_equal(p2[i]->value);
  CHECK(differs);
  io::load_checkpoint(dir, *m2);
  for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value.bitwise_equal(p2[i]->value));
  CHECK(io::checkpoint_config(dir).find("unit") != std::string::npos);

  // Shape mismatch is rejected.
  auto m3 = models::build_model(models::model_config(models::Arch::kCnn, "100k"), recipe, 5);
  CHECK_THROWS_AS(io::load_checkpoint(dir, *m3), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("tensor file round-trip and malformed-input errors name offsets") {
  RngStream rng(3);
  Tensor t = testutil::random_tensor({3, 17}, rng, -2.0, 2.0);
  std::string path = "test_tensor.bin";
  io::write_tensor_file(path, t, R"({"geometry":"1x16","mode":"nearest","seed":9})");
  auto tf = io::read_tensor_file(path);
  CHECK(tf.tensor.bitwise_equal(t));
  CHECK(tf.header_json.find("geometry") != std::string::npos);

  {
    std::ofstream f("test_tensor_bad.bin", std::ios::binary);
    f << "NOTMAGIC";
  }
  CHECK_THROWS_WITH_AS(io::read_tensor_file("test_tensor_bad.bin"),
                       doctest::Contains("at byte 0"), std::runtime_error);

  // Truncated payload names the byte offset region.
  {
    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out("test_tensor_trunc.bin", std::ios::binary);
    out.write(all.data(), static_cast<std::streamsize>(all.size() - 8));
  }
  CHECK_THROWS_WITH_AS(io::read_tensor_file("test_tensor_trunc.bin"),
                       doctest::Contains("payload shorter"), std::runtime_error);
  fs::remove(path);
  fs::remove("test_tensor_bad.bin");
  fs::remove("test_tensor_trunc.bin");
}

TEST_CASE("run spec and experiment spec JSON round-trips compare equal") {
  train::RunSpec s;
  s.arch = "swin";
  s.tier = "fragile";
  s.recipe = "2d-rht-sr";
  s.seed = 17;
  s.data.n_patients = 12;
  s.train.epochs = 33;
  s.train.loss.alpha = 0.25;
  s.literal_scaling = true;
  auto j = train::run_spec_to_json(s);
  auto back = train::run_spec_from_json(j);
  CHECK(back == s);
  CHECK(back.run_name() == "swin_fragile_2d-rht-sr_s17");

  train::ExperimentSpec e;
  e.archs = {"cnn", "swin"};
  e.recipes = {"baseline-bf16", "sr-only"};
  e.seeds = {1, 2, 3};
  e.train.batch = 8;
  auto ej = train::experiment_spec_to_json(e);
  CHECK(train::experiment_spec_from_json(ej) == e);

  auto runs = train::enumerate_runs(e);
  CHECK(runs.size() == 2 * 1 * 2 * 3);
  auto cv_runs = train::enumerate_runs(e, 5);
  CHECK(cv_runs.size() == 2 * 1 * 2 * 3 * 5);
  CHECK(cv_runs[0].run_name() == "cnn_25k_baseline-bf16_s1_f0");
}
