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

#include "fp4lab/graph.hpp"
#include "fp4lab/linalg.hpp"
#include "fp4lab/plans.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace fp4lab;
using namespace fp4lab::ad;
using testutil::gradcheck;
using testutil::random_tensor;

TEST_CASE("softmax on zeros is uniform with zero gradient of its sum") {
  Graph g;
  Var x = g.leaf(Tensor({1, 4}), true);
  Var y = g.softmax_last(x);
  for (float v : g.val(y).data) CHECK(v == doctest::Approx(0.25));
  Var s = g.sum_all(y);
  g.backward(s);
  for (float v : g.grad(x).data) CHECK(std::fabs(v) < 1e-7);
}

TEST_CASE("backward guards: non-scalar loss and double backward") {
  Graph g;
  Var x = g.leaf(Tensor({2, 2}, 1.0f), true);
  Var y = g.relu(x);
  CHECK_THROWS_AS(g.backward(y), std::runtime_error);
  Var s = g.sum_all(y);
  g.backward(s);
  CHECK_THROWS_AS(g.backward(s), std::runtime_error);
}

TEST_CASE("linear case: loss = sum(x*W) gives dW = X^T * ones") {
  RngStream rng(3);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({4, 5}, rng);
  Graph g;
  Var vx = g.leaf(x, false);
  Var vw = g.leaf(w, true);
  Var s = g.sum_all(g.matmul(vx, vw));
  g.backward(s);
  const Tensor& gw = g.grad(vw);
  for (int64_t k = 0; k < 4; ++k)
    for (int64_t j = 0; j < 5; ++j) {
      double expect = 0.0;
      for (int64_t i = 0; i < 3; ++i) expect += x.at2(i, k);
      CHECK(gw.at2(k, j) == doctest::Approx(expect).epsilon(1e-5));
    }
}

TEST_CASE("zero input with zero bias gives zero weight gradients") {
  Tensor x({3, 4});
  RngStream rng(4);
  Tensor w = random_tensor({4, 5}, rng);
  Graph g;
  Var vw = g.leaf(w, true);
  Var s = g.sum_all(g.matmul(g.leaf(x, false), vw));
  g.backward(s);
  for (float v : g.grad(vw).data) CHECK(v == 0.0f);
}

TEST_CASE("gradcheck: matmul") {
  RngStream rng(10);
  auto r = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.matmul(v[0], v[1]); },
      {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)});
  CHECK_MESSAGE(r.pass, r.worst_where, " rel=", r.worst_rel);
}

TEST_CASE("gradcheck: bmm and bmm_nt") {
  RngStream rng(11);
  auto r1 = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.bmm(v[0], v[1]); },
      {random_tensor({2, 3, 5}, rng), random_tensor({2, 5, 4}, rng)});
  CHECK_MESSAGE(r1.pass, r1.worst_where, " rel=", r1.worst_rel);
  auto r2 = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.bmm_nt(v[0], v[1]); },
      {random_tensor({2, 3, 5}, rng), random_tensor({2, 4, 5}, rng)});
  CHECK_MESSAGE(r2.pass, r2.worst_where, " rel=", r2.worst_rel);
}

TEST_CASE("gradcheck: elementwise activations") {
  RngStream rng(12);
  // Keep relu inputs away from the kink.
  Tensor xr = random_tensor({4, 6}, rng, 0.2, 2.0);
  for (size_t i = 0; i < xr.data.size(); i += 2) xr.data[i] *= -1.0f;
  auto relu_r = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.relu(v[0]); }, {xr});
  CHECK_MESSAGE(relu_r.pass, relu_r.worst_where, " rel=", relu_r.worst_rel);

  auto gelu_r = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.gelu(v[0]); },
      {random_tensor({4, 6}, rng, -2.0, 2.0)});
  CHECK_MESSAGE(gelu_r.pass, gelu_r.worst_where, " rel=", gelu_r.worst_rel);

  auto sig_r = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.sigmoid(v[0]); },
      {random_tensor({4, 6}, rng, -2.0, 2.0)});
  CHECK_MESSAGE(sig_r.pass, sig_r.worst_where, " rel=", sig_r.worst_rel);
}

TEST_CASE("gradcheck: softmax, layernorm") {
  RngStream rng(13);
  auto r1 = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.softmax_last(v[0]); },
      {random_tensor({3, 8}, rng, -2.0, 2.0)});
  CHECK_MESSAGE(r1.pass, r1.worst_where, " rel=", r1.worst_rel);

  auto r2 = gradcheck(
      [](Graph& g, const std::vector<Var>& v) { return g.layernorm(v[0], v[1], v[2]); },
      {random_tensor({4, 8}, rng, -2.0, 2.0), random_tensor({8}, rng, 0.5, 1.5),
       random_tensor({8}, rng, -0.5, 0.5)});
  CHECK_MESSAGE(r2.pass, r2.worst_where, " rel=", r2.worst_rel);
}

TEST_CASE("gradcheck: batchnorm2d train and eval modes") {
  RngStream rng(14);
  auto r1 = gradcheck(
      [](Graph& g, const std::vector<Var>& v) {
        BnState local;
        local.init(3);
        return g.batchnorm2d(v[0], v[1], v[2], &local, true);
      },
      {random_tensor({2, 3, 4, 4}, rng, -2.0, 2.0), random_tensor({3}, rng, 0.5, 1.5),
       random_tensor({3}, rng, -0.5, 0.5)});
  CHECK_MESSAGE(r1.pass, r1.worst_where, " rel=", r1.worst_rel);

  BnState st2;
  st2.init(3);
  RngStream r2rng(15);
  for (auto& v : st2.running_mean.data) v = static_cast<float>(r2rng.uniform(-0.5, 0.5));
  for (auto& v : st2.running_var.data) v = static_cast<float>(r2rng.uniform(0.5, 1.5));
  auto r2 = gradcheck(
      [&st2](Graph& g, const std::vector<Var>& v) {
        BnState local = st2;
        return g.batchnorm2d(v[0], v[1], v[2], &local, false);
      },
      {random_tensor({2, 3, 4, 4}, rng, -2.0, 2.0), random_tensor({3}, rng, 0.5, 1.5),
       random_tensor({3}, rng, -0.5, 0.5)});
  CHECK_MESSAGE(r2.pass, r2.worst_where, " rel=", r2.worst_rel);
}

TEST_CASE("batchnorm2d maintains running statistics with momentum") {
  Graph g;
  BnState state;
  state.init(1);
  Tensor x({4, 1, 2, 2});
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(i);
  g.batchnorm2d(g.leaf(x, false), g.leaf(Tensor({1}, 1.0f), false),
                g.leaf(Tensor({1}), false), &state, true);
  double mean = 7.5;  // mean of 0..15
  double var = 0.0;
  for (int i = 0; i < 16; ++i) var += (i - mean) * (i - mean);
  var /= 16.0;
  double unbiased = var * 16.0 / 15.0;
  CHECK(state.running_mean.data[0] == doctest::Approx(0.9 * 0.0 + 0.1 * mean));
  CHECK(state.running_var.data[0] == doctest::Approx(0.9 * 1.0 + 0.1 * unbiased));
}

TEST_CASE("gradcheck: bias adds, scale, concat, tiled rows") {
  RngStream rng(16);
  CHECK(gradcheck([](Graph& g, const std::vector<Var>& v) { return g.add_rowvec(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({4}, rng)})
            .pass);
  CHECK(gradcheck(
            [](Graph& g, const std::vector<Var>& v) { return g.add_chan_bias(v[0], v[1]); },
            {random_tensor({2, 3, 2, 2}, rng), random_tensor({3}, rng)})
            .pass);
  CHECK(gradcheck([](Graph& g, const std::vector<Var>& v) { return g.concat_ch(v[0], v[1]); },
                  {random_tensor({2, 2, 2, 2}, rng), random_tensor({2, 3, 2, 2}, rng)})
            .pass);
  CHECK(gradcheck(
            [](Graph& g, const std::vector<Var>& v) { return g.add_tiled_rows(v[0], v[1]); },
            {random_tensor({6, 4}, rng), random_tensor({3, 4}, rng)})
            .pass);
  CHECK(gradcheck([](Graph& g, const std::vector<Var>& v) { return g.scale(v[0], -1.7); },
                  {random_tensor({3, 4}, rng)})
            .pass);
  CHECK(gradcheck([](Graph& g, const std::vector<Var>& v) { return g.add(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)})
            .pass);
}

TEST_CASE("gradcheck: gather (im2col) and scatter_add (col2im)") {
  RngStream rng(17);
  auto ip = im2col_plan(1, 2, 5, 5, 3, 3, 2, 1);
  CHECK(gradcheck([&ip](Graph& g, const std::vector<Var>& v) { return g.gather(v[0], ip); },
                  {random_tensor({1, 2, 5, 5}, rng)})
            .pass);

  auto sp = col2im_plan(1, 2, 3, 3, 2, 2, 2);
  CHECK(gradcheck(
            [&sp](Graph& g, const std::vector<Var>& v) { return g.scatter_add(v[0], sp); },
            {random_tensor(sp->in_shape, rng)})
            .pass);
}

TEST_CASE("conv output shape algebra via im2col plan") {
  // floor((in + 2p - k)/s) + 1
  auto p = im2col_plan(1, 1, 32, 32, 3, 3, 2, 1);
  CHECK(p->out_shape[0] == 16 * 16);
  auto p2 = im2col_plan(1, 1, 8, 8, 3, 3, 1, 1);
  CHECK(p2->out_shape[0] == 8 * 8);
}

TEST_CASE("window partition / reverse round-trips bitwise") {
  RngStream rng(18);
  int64_t n = 1, g0 = 8, d = 5, w = 4;
  Tensor x = random_tensor({n * g0 * g0, d}, rng);
  Graph g;
  Var vx = g.leaf(x, false);
  Var win = g.gather(vx, window_partition_plan(n, g0, d, w));
  Var back = g.gather(win, window_reverse_plan(n, g0, d, w));
  CHECK(g.val(back).bitwise_equal(x));
}

TEST_CASE("roll shift and unshift round-trips bitwise") {
  RngStream rng(19);
  int64_t n = 2, g0 = 8, d = 3;
  Tensor x = random_tensor({n * g0 * g0, d}, rng);
  Graph g;
  Var vx = g.leaf(x, false);
  Var rolled = g.gather(vx, roll_tokens_plan(n, g0, d, 2));
  Var back = g.gather(rolled, roll_tokens_plan(n, g0, d, -2));
  CHECK(g.val(back).bitwise_equal(x));
}

TEST_CASE("patchify / unpatchify is the identity on pixel grids") {
  RngStream rng(20);
  Tensor x = random_tensor({2, 3, 8, 8}, rng);
  Graph g;
  Var vx = g.leaf(x, false);
  Var tok = g.gather(vx, patchify_plan(2, 3, 8, 8, 4));
  CHECK(g.val(tok).shape == Shape{2 * 4, 3 * 16});
  Var img = g.gather(tok, unpatchify_plan(2, 3, 8, 8, 4));
  CHECK(g.val(img).bitwise_equal(x));
}

TEST_CASE("split/merge heads round-trips bitwise") {
  RngStream rng(21);
  Tensor x = random_tensor({2 * 6, 8}, rng);
  Graph g;
  Var vx = g.leaf(x, false);
  Var heads = g.gather(vx, split_heads_plan(2, 6, 2, 4));
  CHECK(g.val(heads).shape == Shape{4, 6, 4});
  Var back = g.gather(heads, merge_heads_plan(2, 6, 2, 4));
  CHECK(g.val(back).bitwise_equal(x));
}

TEST_CASE("determinism: identical graphs produce bitwise-identical results") {
  auto run = [] {
    RngStream rng(42);
    Tensor x = random_tensor({4, 8}, rng);
    Tensor w = random_tensor({8, 8}, rng);
    Graph g;
    Var vw = g.leaf(w, true);
    Var y = g.gelu(g.matmul(g.leaf(x, false), vw));
    Var s = g.sum_all(y);
    g.backward(s);
    auto gr = g.grad(vw);
    auto val = g.val(y);
    return std::make_pair(val, gr);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1.bitwise_equal(v2));
  CHECK(g1.bitwise_equal(g2));
}

TEST_CASE("check_finite flag reports the offending op") {
  Graph g;
  g.check_finite = true;
  Tensor x({2}, 1e30f);
  Var vx = g.leaf(x, false);
  // 1e30 * 1e30 overflows to inf inside matmul.
  Tensor w({2, 1}, 1e30f);
  CHECK_THROWS_AS(g.matmul(g.reshape(vx, {1, 2}), g.leaf(w, false)), std::runtime_error);
}
