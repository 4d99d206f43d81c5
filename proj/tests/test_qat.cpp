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
#include <map>

#include "fp4lab/linalg.hpp"
#include "fp4lab/qat/qlinear.hpp"
#include "fp4lab/rht.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace fp4lab;
using namespace fp4lab::qat;
using fp4::BlockKind;
using fp4::Rounding;
using testutil::random_tensor;

static ad::Var dot_with_impl(ad::Graph& g, ad::Var v, const Tensor& w) {
  const Tensor& t = g.val(v);
  REQUIRE(t.shape == w.shape);
  double acc = 0.0;
  for (size_t i = 0; i < t.data.size(); ++i)
    acc += static_cast<double>(t.data[i]) * static_cast<double>(w.data[i]);
  int iv = v.id;
  Tensor saved = w;
  return g.custom({v}, Tensor::scalar(static_cast<float>(acc)), "dot_with",
                  [iv, saved](ad::Graph& gg, int self) {
                    float go = gg.node(ad::Var{self}).grad.data[0];
                    Tensor gi(saved.shape);
                    for (size_t i = 0; i < gi.data.size(); ++i) gi.data[i] = go * saved.data[i];
                    gg.accum_grad(iv, gi);
                  });
}

namespace {

struct StepResult {
  Tensor y, dx, dw;
  std::shared_ptr<LinearContext> ctx;
  EventLog log;
};

StepResult one_step(const std::string& recipe_name, const Tensor& x, const Tensor& w,
                    const Tensor& upstream, uint64_t seed = 5) {
  StepResult r;
  QLinearLayer layer("t.fc", recipe_from_name(recipe_name), seed);
  layer.events = &r.log;
  ad::Graph g;
  auto vx = g.leaf(x, true);
  auto vw = g.leaf(w, true);
  auto vy = qlinear(g, vx, vw, layer);
  auto loss = dot_with_impl(g, vy, upstream);
  g.backward(loss);
  r.y = g.val(vy);
  r.dx = g.grad(vx);
  r.dw = g.grad(vw);
  r.ctx = layer.last_ctx;
  return r;
}

}  // namespace

TEST_CASE("recipe presets carry the published switch sets") {
  auto r = recipe_from_name("nvfp4-full");
  CHECK((r.quantize && !r.two_d && !r.rht && !r.sr && !r.fwd_only && !r.chain_rule));
  r = recipe_from_name("fwd-only");
  CHECK((r.fwd_only && !r.rht));
  r = recipe_from_name("fwd-rht");
  CHECK((r.fwd_only && r.rht));
  r = recipe_from_name("chain-rule");
  CHECK((r.chain_rule && !r.fwd_only && !r.sr));
  r = recipe_from_name("sr-only");
  CHECK((r.sr && !r.two_d && !r.rht));
  r = recipe_from_name("2d-rht");
  CHECK((r.two_d && r.rht && !r.sr));
  r = recipe_from_name("2d-rht-sr");
  CHECK((r.two_d && r.rht && r.sr));
  CHECK(recipe_from_name("baseline-bf16").is_baseline());
  CHECK_THROWS_WITH_AS(recipe_from_name("nope"),
                       doctest::Contains("valid: baseline-bf16, nvfp4-full"),
                       std::invalid_argument);
}

TEST_CASE("baseline recipe is a plain matmul with exact gradients and empty log") {
  RngStream rng(1);
  Tensor x = random_tensor({8, 16}, rng);
  Tensor w = random_tensor({16, 8}, rng);
  Tensor up = random_tensor({8, 8}, rng);
  auto r = one_step("baseline-bf16", x, w, up);
  CHECK(r.log.empty());
  CHECK(r.y.bitwise_equal(linalg::matmul(x, w)));
  CHECK(r.dx.bitwise_equal(linalg::matmul_nt(up, w)));
  CHECK(r.dw.bitwise_equal(linalg::matmul_tn(x, up)));
}

TEST_CASE("grid-point operands pass through nvfp4-full exactly") {
  RngStream rng(2);
  Tensor x0 = random_tensor({16, 32}, rng, -3.0, 3.0);
  Tensor w0 = random_tensor({32, 16}, rng, -3.0, 3.0);
  Tensor x = fp4::fake_quantize(x0, {BlockKind::kRows1x16}, Rounding::nearest());
  Tensor wt = fp4::fake_quantize(linalg::transpose2d(w0), {BlockKind::kRows1x16},
                                 Rounding::nearest());
  Tensor w = linalg::transpose2d(wt);
  Tensor up = random_tensor({16, 16}, rng);
  auto r = one_step("nvfp4-full", x, w, up);
  CHECK(r.y.bitwise_equal(linalg::matmul(x, w)));
}

TEST_CASE("nvfp4-full forward error obeys the elementwise quantization bound") {
  RngStream rng(3);
  for (int iter = 0; iter < 20; ++iter) {
    Tensor x = random_tensor({8, 32}, rng, -2.0, 2.0);
    Tensor w = random_tensor({32, 8}, rng, -2.0, 2.0);
    Tensor up({8, 8});
    auto r = one_step("nvfp4-full", x, w, up);
    Tensor ref = linalg::matmul(x, w);
    const Tensor& xh = r.ctx->x_hat;
    const Tensor& wh = r.ctx->w_hat;
    for (int64_t i = 0; i < 8; ++i)
      for (int64_t j = 0; j < 8; ++j) {
        double bound = 1e-5;  // FP32 accumulation slack
        for (int64_t k = 0; k < 32; ++k) {
          double dx = std::fabs(xh.at2(i, k) - x.at2(i, k));
          double dw = std::fabs(wh.at2(k, j) - w.at2(k, j));
          bound += dx * std::fabs(w.at2(k, j)) + std::fabs(xh.at2(i, k)) * dw;
        }
        CHECK(std::fabs(r.y.at2(i, j) - ref.at2(i, j)) <= bound);
      }
  }
}

TEST_CASE("fwd-only keeps the whole backward in high precision") {
  RngStream rng(4);
  Tensor x = random_tensor({16, 32}, rng);
  Tensor w = random_tensor({32, 16}, rng);
  Tensor up = random_tensor({16, 16}, rng);
  auto r = one_step("fwd-only", x, w, up);
  CHECK(r.dx.bitwise_equal(linalg::matmul_nt(up, w)));
  CHECK(r.dw.bitwise_equal(linalg::matmul_tn(x, up)));
  int high_bwd = 0, fp4_bwd = 0;
  for (const auto& e : r.log) {
    if (e.pass != Pass::kFprop)
      (e.precision == Precision::kHigh ? high_bwd : fp4_bwd)++;
  }
  CHECK(high_bwd == 4);
  CHECK(fp4_bwd == 0);
}

TEST_CASE("chain-rule backward reuses the forward dequants bitwise") {
  RngStream rng(5);
  Tensor x = random_tensor({16, 32}, rng);
  Tensor w = random_tensor({32, 16}, rng);
  Tensor up = random_tensor({16, 16}, rng);
  auto r = one_step("chain-rule", x, w, up);
  REQUIRE(r.ctx != nullptr);
  CHECK(r.ctx->backward_ran);
  CHECK(r.ctx->bwd_dgrad_w.bitwise_equal(r.ctx->w_hat));
  CHECK(r.ctx->bwd_wgrad_x.bitwise_equal(r.ctx->x_hat));
  // Upstream gradient stays high precision and the values line up exactly.
  CHECK(r.ctx->bwd_dgrad_g.bitwise_equal(up));
  CHECK(r.dx.bitwise_equal(linalg::matmul_nt(up, r.ctx->w_hat)));
  CHECK(r.dw.bitwise_equal(linalg::matmul_tn(r.ctx->x_hat, up)));
  bool any_reused = false;
  for (const auto& e : r.log) any_reused |= e.reused;
  CHECK(any_reused);
}

TEST_CASE("2-D scaling is transpose-invariant exactly; 1-D generically is not") {
  RngStream rng(6);
  for (int iter = 0; iter < 50; ++iter) {
    Tensor w = random_tensor({32, 32}, rng, -2.0, 2.0);
    Tensor a = fp4::fake_quantize(linalg::transpose2d(w), {BlockKind::kSquare16x16},
                                  Rounding::nearest());
    Tensor b = linalg::transpose2d(
        fp4::fake_quantize(w, {BlockKind::kSquare16x16}, Rounding::nearest()));
    CHECK(a.bitwise_equal(b));
  }
  // Constructed 1-D counterexample: one dominant row skews row blocks but
  // not column blocks.
  Tensor w({32, 32});
  RngStream rng2(7);
  for (int64_t i = 0; i < 32; ++i)
    for (int64_t j = 0; j < 32; ++j)
      w.at2(i, j) = static_cast<float>((i == 0 ? 50.0 : 1.0) * rng2.uniform(0.5, 1.0));
  Tensor a = fp4::fake_quantize(linalg::transpose2d(w), {BlockKind::kRows1x16},
                                Rounding::nearest());
  Tensor b = linalg::transpose2d(
      fp4::fake_quantize(w, {BlockKind::kRows1x16}, Rounding::nearest()));
  CHECK(!a.bitwise_equal(b));
}

TEST_CASE("wgrad rotation cancels with the quantizer disabled") {
  RngStream rng(8);
  for (int iter = 0; iter < 30; ++iter) {
    Tensor x = random_tensor({32, 16}, rng);
    Tensor g = random_tensor({32, 8}, rng);
    auto t = rht::RhtTransform::from_seed(16, 100 + static_cast<uint64_t>(iter));
    WgradOptions with, without;
    with.transform = &t;
    with.quantize = false;
    without.quantize = false;
    Tensor a = wgrad_gemm(x, g, with).dw;
    Tensor b = wgrad_gemm(x, g, without).dw;
    CHECK(testutil::rel_frobenius_diff(a, b) < 1e-5);
  }
}

TEST_CASE("sr-only: stochastic DGRAD is unbiased around G * W_hat^T") {
  RngStream rng(9);
  Tensor x = random_tensor({16, 16}, rng);
  Tensor w = random_tensor({16, 16}, rng);
  Tensor up = random_tensor({16, 16}, rng);
  const int draws = 10000;

  // Deterministic parts of the pipeline.
  Tensor wq = fp4::fake_quantize(w, {BlockKind::kRows1x16}, Rounding::nearest());
  Tensor expected = linalg::matmul_nt(up, wq);

  // Per-element variance of the stochastic quantization of `up`.
  auto qref = fp4::quantize(up, {BlockKind::kRows1x16}, Rounding::nearest());
  Tensor mean_dx({16, 16});
  std::vector<double> acc(16 * 16, 0.0);
  for (int d = 0; d < draws; ++d) {
    auto r = one_step("sr-only", x, w, up, 1000 + static_cast<uint64_t>(d));
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += r.dx.data[i];
  }
  // Variance bound: each quantized G entry deviates at most half its local
  // grid gap (times block scale), so var(dx_ij) <= sum_k (halfgap_ik)^2 w_jk^2.
  double st = qref.tensor_scale;
  int64_t bpr = qref.padded[1] / 16;
  for (int64_t i = 0; i < 16; ++i) {
    for (int64_t j = 0; j < 16; ++j) {
      double var = 0.0;
      for (int64_t k = 0; k < 16; ++k) {
        double s =
            fp4::e4m3_decode_d(qref.block_scales[static_cast<size_t>(i * bpr + k / 16)]) * st;
        double v = s > 0 ? up.at2(i, k) / s : 0.0;
        double half = fp4::e2m1_half_gap(v) * s;
        var += half * half * static_cast<double>(wq.at2(j, k)) * wq.at2(j, k);
      }
      double sigma = std::sqrt(var / draws);
      double mean = acc[static_cast<size_t>(i * 16 + j)] / draws;
      CHECK(std::fabs(mean - expected.at2(i, j)) <= 3.0 * sigma + 1e-6);
    }
  }
}

TEST_CASE("recipe conformance holds for all eight presets on the probe network") {
  for (const auto& name : recipe_names()) {
    auto res = run_recipe_probe(recipe_from_name(name), 11);
    INFO(name);
    for (const auto& f : res.report.failures) INFO(f);
    CHECK(res.report.pass);
    if (name == "baseline-bf16") CHECK(res.log.empty());
  }
}

TEST_CASE("conformance rejects wrong footprints") {
  // fwd-only log containing an FP4 event in DGRAD must fail.
  auto res = run_recipe_probe(recipe_from_name("fwd-only"), 3);
  EventLog log = res.log;
  for (auto& e : log)
    if (e.pass == Pass::kDgrad && e.role == Role::kG) e.precision = Precision::kFp4;
  CHECK(!conformance_check(recipe_from_name("fwd-only"), log).pass);

  // nvfp4-full log missing its G quantization events must fail.
  auto res2 = run_recipe_probe(recipe_from_name("nvfp4-full"), 3);
  EventLog log2;
  for (const auto& e : res2.log)
    if (e.role != Role::kG) log2.push_back(e);
  CHECK(!conformance_check(recipe_from_name("nvfp4-full"), log2).pass);

  // Baseline with an empty log passes.
  CHECK(conformance_check(recipe_from_name("baseline-bf16"), {}).pass);
}

TEST_CASE("baseline qlinear passes a full finite-difference gradcheck") {
  RngStream rng(10);
  QLinearLayer layer("gc.fc", recipe_from_name("baseline-bf16"), 1);
  auto r = testutil::gradcheck(
      [&layer](ad::Graph& g, const std::vector<ad::Var>& v) {
        return qlinear(g, v[0], v[1], layer);
      },
      {random_tensor({4, 6}, rng), random_tensor({6, 4}, rng)});
  CHECK_MESSAGE(r.pass, r.worst_where, " rel=", r.worst_rel);
}

TEST_CASE("disabled layers run in full precision and log nothing") {
  RngStream rng(12);
  Tensor x = random_tensor({8, 16}, rng);
  Tensor w = random_tensor({16, 8}, rng);
  EventLog log;
  QLinearLayer layer("ex.fc", recipe_from_name("nvfp4-full"), 1);
  layer.enabled = false;
  layer.events = &log;
  ad::Graph g;
  auto vy = qlinear(g, g.leaf(x, false), g.leaf(w, true), layer);
  CHECK(g.val(vy).bitwise_equal(linalg::matmul(x, w)));
  CHECK(log.empty());
}

TEST_CASE("stochastic recipes replay bitwise under the same seed") {
  RngStream rng(13);
  Tensor x = random_tensor({16, 16}, rng);
  Tensor w = random_tensor({16, 16}, rng);
  Tensor up = random_tensor({16, 16}, rng);
  for (const char* name : {"sr-only", "2d-rht-sr", "2d-rht", "fwd-rht"}) {
    auto a = one_step(name, x, w, up, 99);
    auto b = one_step(name, x, w, up, 99);
    CHECK(a.y.bitwise_equal(b.y));
    CHECK(a.dx.bitwise_equal(b.dx));
    CHECK(a.dw.bitwise_equal(b.dw));
  }
}

TEST_CASE("event log serializes to json lines") {
  auto res = run_recipe_probe(recipe_from_name("2d-rht-sr"), 21);
  std::string lines = event_log_to_json_lines(res.log);
  CHECK(lines.find("\"pass\":\"WGRAD\"") != std::string::npos);
  CHECK(lines.find("\"geometry\":\"16x16\"") != std::string::npos);
  CHECK(lines.find("\"stochastic\":true") != std::string::npos);
}
