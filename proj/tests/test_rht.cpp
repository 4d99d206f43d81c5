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

#include <cmath>

#include "fp4lab/rht.hpp"
#include "test_util.hpp"

using namespace fp4lab;
using namespace fp4lab::rht;

TEST_CASE("build_hadamard base cases and integer orthogonality") {
  Tensor h1 = build_hadamard(1);
  CHECK(h1.data == std::vector<float>{1.0f});
  Tensor h2 = build_hadamard(2);
  CHECK(h2.data == std::vector<float>{1, 1, 1, -1});

  // H * H^T = h * I, checked exactly in integer arithmetic.
  for (int64_t h : {4LL, 16LL, 64LL}) {
    Tensor m = build_hadamard(h);
    for (int64_t i = 0; i < h; ++i) {
      for (int64_t j = 0; j < h; ++j) {
        long long acc = 0;
        for (int64_t k = 0; k < h; ++k)
          acc += static_cast<long long>(m.data[static_cast<size_t>(i * h + k)]) *
                 static_cast<long long>(m.data[static_cast<size_t>(j * h + k)]);
        CHECK(acc == (i == j ? h : 0));
      }
    }
  }
}

TEST_CASE("build_hadamard rejects invalid sizes") {
  CHECK_THROWS_AS(build_hadamard(3), std::invalid_argument);
  CHECK_THROWS_AS(build_hadamard(0), std::invalid_argument);
  CHECK_THROWS_AS(build_hadamard(2048), std::invalid_argument);
}

TEST_CASE("transform orthogonality: T * T^T = I within 1e-6") {
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto t = RhtTransform::from_seed(16, seed);
    Tensor m = t.matrix();
    for (int64_t i = 0; i < 16; ++i) {
      for (int64_t j = 0; j < 16; ++j) {
        double acc = 0.0;
        for (int64_t k = 0; k < 16; ++k)
          acc += static_cast<double>(m.data[static_cast<size_t>(i * 16 + k)]) *
                 static_cast<double>(m.data[static_cast<size_t>(j * 16 + k)]);
        CHECK(std::fabs(acc - (i == j ? 1.0 : 0.0)) < 1e-6);
      }
    }
  }
}

TEST_CASE("apply_rht matches the unit-basis example (h=2, identity signs)") {
  auto t = RhtTransform::with_signs({1.0f, 1.0f});
  Tensor e1 = Tensor::from({2}, {1.0f, 0.0f});
  Tensor out = apply_rht(e1, t, 0);
  CHECK(out.data[0] == doctest::Approx(0.70710678).epsilon(1e-6));
  CHECK(out.data[1] == doctest::Approx(0.70710678).epsilon(1e-6));
}

TEST_CASE("apply_rht preserves energy") {
  RngStream rng(5);
  auto t = RhtTransform::from_seed(16, 9);
  for (int iter = 0; iter < 50; ++iter) {
    Tensor x = testutil::random_tensor({8, 32}, rng, -3.0, 3.0);
    for (int axis : {0, 1}) {
      Tensor y = apply_rht(x, axis == 0 ? RhtTransform::from_seed(8, 9) : t, axis);
      double nx = 0.0, ny = 0.0;
      for (float v : x.data) nx += static_cast<double>(v) * v;
      for (float v : y.data) ny += static_cast<double>(v) * v;
      CHECK(std::fabs(std::sqrt(ny) - std::sqrt(nx)) <= 1e-5 * std::sqrt(nx));
    }
  }
}

TEST_CASE("apply_rht spreads a one-hot outlier to magnitude/sqrt(h)") {
  auto t = RhtTransform::from_seed(16, 123);
  Tensor x({16});
  x.data[5] = 80.0f;
  Tensor y = apply_rht(x, t, 0);
  for (float v : y.data) CHECK(std::fabs(v) == doctest::Approx(80.0 / 4.0).epsilon(1e-6));
}

TEST_CASE("apply_rht rejects non-divisible axes") {
  auto t = RhtTransform::from_seed(16, 1);
  Tensor x({3, 24});
  CHECK_THROWS_AS(apply_rht(x, t, 1), std::invalid_argument);
}

TEST_CASE("rht_pair_apply: GEMM cancellation within 1e-5") {
  RngStream rng(42);
  for (int iter = 0; iter < 50; ++iter) {
    int64_t m = 1 + static_cast<int64_t>(rng.next_below(24));
    int64_t k = 16 * (1 + static_cast<int64_t>(rng.next_below(4)));
    int64_t n = 1 + static_cast<int64_t>(rng.next_below(24));
    Tensor a = testutil::random_tensor({m, k}, rng, -2.0, 2.0);
    Tensor b = testutil::random_tensor({k, n}, rng, -2.0, 2.0);
    auto t = RhtTransform::from_seed(16, 1000 + static_cast<uint64_t>(iter));
    auto [ar, br] = rht_pair_apply(a, b, t);
    Tensor ref = testutil::matmul_ref(a, b);
    Tensor rot = testutil::matmul_ref(ar, br);
    CHECK(testutil::rel_frobenius_diff(rot, ref) < 1e-5);
  }
}

TEST_CASE("rht_pair_apply: h=1 returns inputs unchanged") {
  RngStream rng(3);
  Tensor a = testutil::random_tensor({4, 5}, rng);
  Tensor b = testutil::random_tensor({5, 6}, rng);
  auto t = RhtTransform::with_signs({1.0f});
  auto [ar, br] = rht_pair_apply(a, b, t);
  CHECK(ar.bitwise_equal(a));
  CHECK(br.bitwise_equal(b));
}

TEST_CASE("rht_pair_apply rejects mismatched contraction dims") {
  Tensor a({4, 16});
  Tensor b({32, 4});
  CHECK_THROWS_AS(rht_pair_apply(a, b, RhtTransform::from_seed(16, 1)),
                  std::invalid_argument);
}

TEST_CASE("seeded signs: same seed same signs, different seeds differ") {
  auto t1 = RhtTransform::from_seed(16, 7);
  auto t2 = RhtTransform::from_seed(16, 7);
  auto t3 = RhtTransform::from_seed(16, 8);
  CHECK(t1.signs == t2.signs);
  CHECK(t1.signs != t3.signs);  // collision probability 2^-16
}
