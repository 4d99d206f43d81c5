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

#include "fp4lab/train/aggregate.hpp"
#include "fp4lab/train/loss.hpp"
#include "fp4lab/train/metrics.hpp"
#include "fp4lab/train/optim.hpp"
#include "fp4lab/train/schedule.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace fp4lab;
using namespace fp4lab::train;

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

TEST_CASE("tversky term matches the 4-pixel hand computation to 1e-9") {
  // y = [1,1,0,0], y_hat = [0.8,0.6,0.4,0.2]:
  // TP = 1.4, FP = 0.6, FN = 0.6 -> 1 - 1.4/(1.4 + 0.3*0.6 + 0.7*0.6) = 0.3.
  LossConfig cfg;
  double term = tversky_term({0.8, 0.6, 0.4, 0.2}, {1, 1, 0, 0}, cfg);
  CHECK(std::fabs(term - 0.3) <= 1e-9);

  // Independent recomputation from the definition.
  double tp = 0.8 + 0.6, fp = 0.4 + 0.2, fn = 0.2 + 0.4;
  double oracle = 1.0 - tp / (tp + cfg.alpha * fp + cfg.beta * fn);
  CHECK(std::fabs(term - oracle) <= 1e-12);
}

TEST_CASE("perfect prediction drives both loss terms to zero") {
  LossConfig cfg;
  std::vector<float> y = {1, 0, 1, 0, 1, 1, 0, 0};
  std::vector<float> z(y.size());
  for (size_t i = 0; i < y.size(); ++i) z[i] = y[i] > 0.5f ? 20.0f : -20.0f;
  auto b = compute_loss(z.data(), y.data(), static_cast<int64_t>(y.size()), cfg);
  CHECK(b.tversky < 1e-6);
  CHECK(b.bce < 1e-6);
  CHECK(b.total < 2e-6);
}

TEST_CASE("fully inverted prediction gives Tversky term 1") {
  LossConfig cfg;
  std::vector<float> y = {1, 1, 0, 0};
  std::vector<float> z = {-20, -20, 20, 20};
  auto b = compute_loss(z.data(), y.data(), 4, cfg);
  CHECK(b.tversky == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("empty mask with near-zero predictions stays finite via the epsilon floor") {
  LossConfig cfg;
  std::vector<float> y = {0, 0, 0, 0};
  std::vector<float> z = {-30, -30, -30, -30};
  auto b = compute_loss(z.data(), y.data(), 4, cfg);
  CHECK(std::isfinite(b.total));
  CHECK(b.tversky == doctest::Approx(1.0));  // TP = 0
}

TEST_CASE("loss tape op matches finite differences") {
  RngStream rng(5);
  Tensor target({2, 1, 4, 4});
  for (auto& v : target.data) v = rng.coin() ? 1.0f : 0.0f;
  LossConfig cfg;
  auto r = testutil::gradcheck(
      [&](ad::Graph& g, const std::vector<ad::Var>& v) {
        return bce_tversky_loss(g, v[0], target, cfg);
      },
      {testutil::random_tensor({2, 1, 4, 4}, rng, -2.0, 2.0)},
      /*eps=*/1e-2);  // the loss value is an FP32 scalar; 1e-3 probes drown in rounding
  CHECK_MESSAGE(r.pass, r.worst_where, " rel=", r.worst_rel);
}

TEST_CASE("loss rejects non-binary targets") {
  ad::Graph g;
  Tensor t({2}, 0.5f);
  auto z = g.leaf(Tensor({2}), true);
  CHECK_THROWS_AS(bce_tversky_loss(g, z, t, LossConfig{}), std::runtime_error);
}

TEST_CASE("pooled loss accumulator is chunking-invariant") {
  RngStream rng(6);
  std::vector<float> z(64), y(64);
  for (auto& v : z) v = static_cast<float>(rng.uniform(-3, 3));
  for (auto& v : y) v = rng.coin() ? 1.0f : 0.0f;
  LossConfig cfg;
  LossAccum one;
  one.add(z.data(), y.data(), 64);
  LossAccum many;
  many.add(z.data(), y.data(), 10);
  many.add(z.data() + 10, y.data() + 10, 30);
  many.add(z.data() + 40, y.data() + 40, 24);
  CHECK(one.total(cfg) == doctest::Approx(many.total(cfg)).epsilon(1e-12));
  CHECK(one.total(cfg) ==
        doctest::Approx(compute_loss(z.data(), y.data(), 64, cfg).total).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

namespace {

// Brute-force oracle: rescan the whole list at every unique threshold.
double auprc_oracle(const std::vector<double>& scores, const std::vector<char>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  int64_t total_pos = 0;
  for (char l : labels) total_pos += l;
  double ap = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) (labels[i] ? tp : fp)++;
    }
    double recall = static_cast<double>(tp) / total_pos;
    double precision = static_cast<double>(tp) / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace

TEST_CASE("auprc: published scalar cases") {
  CHECK(auprc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) == doctest::Approx(0.5 + 0.5 * 2.0 / 3.0));
  // Perfect ranking.
  CHECK(auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  // Constant scores: AP equals prevalence.
  CHECK(auprc({0.5, 0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 1, 0}) == doctest::Approx(0.4));
  CHECK_THROWS_WITH_AS(auprc({0.1, 0.2}, {1, 1}), "AUPRC undefined", std::invalid_argument);
  CHECK_THROWS_AS(auprc({0.1, 0.2}, {0, 0}), std::invalid_argument);
}

TEST_CASE("auprc agrees exactly with the brute-force oracle on random instances") {
  RngStream rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    int64_t n = 2 + static_cast<int64_t>(rng.next_below(99));
    std::vector<double> scores;
    std::vector<char> labels;
    bool pos = false, neg = false;
    for (int64_t i = 0; i < n; ++i) {
      // Coarse grid forces plenty of score ties.
      scores.push_back(std::floor(rng.uniform(0, 8)) / 8.0);
      char l = rng.coin() ? 1 : 0;
      labels.push_back(l);
      (l ? pos : neg) = true;
    }
    if (!pos) labels[0] = 1;
    if (!neg) labels[labels.size() - 1] = 0;
    CHECK(auprc(scores, labels) == auprc_oracle(scores, labels));
  }
}

TEST_CASE("auprc is invariant under strictly monotone score transforms") {
  RngStream rng(8);
  std::vector<double> scores;
  std::vector<char> labels;
  for (int i = 0; i < 60; ++i) {
    scores.push_back(rng.uniform(-2, 2));
    labels.push_back(rng.coin() ? 1 : 0);
  }
  labels[0] = 1;
  labels[1] = 0;
  double base = auprc(scores, labels);
  auto apply = [&](auto f) {
    std::vector<double> t;
    for (double s : scores) t.push_back(f(s));
    return auprc(t, labels);
  };
  CHECK(apply([](double s) { return 3.0 * s + 7.0; }) == base);
  CHECK(apply([](double s) { return std::exp(s); }) == base);
  CHECK(apply([](double s) { return std::atan(s); }) == base);
}

TEST_CASE("prc curve starts and ends where it should") {
  auto pts = prc_curve({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0});
  REQUIRE(pts.size() == 4);
  CHECK(pts.front().first == doctest::Approx(0.5));
  CHECK(pts.front().second == 1.0);
  CHECK(pts.back().first == 1.0);  // recall reaches 1 at the lowest threshold
}

TEST_CASE("histogram spikiness: constant, two-spike and uniform distributions") {
  std::vector<double> same(1000, 0.371);
  CHECK(spikiness(pred_histogram(same)) == 1.0);

  std::vector<double> two;
  for (int i = 0; i < 500; ++i) {
    two.push_back(0.02);
    two.push_back(0.98);
  }
  CHECK(spikiness(pred_histogram(two)) == 1.0);

  RngStream rng(9);
  std::vector<double> uni;
  for (int i = 0; i < 100000; ++i) uni.push_back(rng.next_unit());
  double s = spikiness(pred_histogram(uni));
  // Analytic expectation 5/101 with top-5 selection bias of a few sigma.
  CHECK(s > 5.0 / 101.0 * 0.9);
  CHECK(s < 5.0 / 101.0 * 1.25);
}

TEST_CASE("metric probabilities clamp extreme logits") {
  CHECK(prob_from_logit(1000.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(prob_from_logit(-1000.0) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(std::isfinite(prob_from_logit(1e30)));
}

// ---------------------------------------------------------------------------
// optimizers
// ---------------------------------------------------------------------------

namespace {

models::Parameter make_param(std::initializer_list<float> vals) {
  models::Parameter p;
  p.name = "p";
  p.value = Tensor::from({static_cast<int64_t>(vals.size())}, std::vector<float>(vals));
  p.grad = Tensor(p.value.shape);
  return p;
}

}  // namespace

TEST_CASE("zero gradient with zero decay leaves parameters unchanged") {
  for (OptKind kind : {OptKind::kAdamax, OptKind::kAdamW}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.weight_decay = 0.0;
    Optimizer opt(cfg);
    auto p = make_param({1.5f, -2.5f});
    for (int i = 0; i < 10; ++i) opt.step({&p});
    CHECK(p.value.data[0] == 1.5f);
    CHECK(p.value.data[1] == -2.5f);
  }
}

TEST_CASE("adamw decoupled decay shrinks weights by (1 - lr*wd) per step") {
  OptimizerConfig cfg;
  cfg.kind = OptKind::kAdamW;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;  // large enough to see through FP32 storage
  Optimizer opt(cfg);
  auto p = make_param({2.0f});
  opt.step({&p});
  CHECK(p.value.data[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-6));
  opt.step({&p});
  CHECK(p.value.data[0] ==
        doctest::Approx(2.0 * (1.0 - 0.1 * 0.01) * (1.0 - 0.1 * 0.01)).epsilon(1e-6));
}

TEST_CASE("single-step closed forms for both optimizers") {
  double g = 0.3;
  {
    OptimizerConfig cfg;
    cfg.kind = OptKind::kAdamax;
    cfg.lr = 5e-4;
    Optimizer opt(cfg);
    auto p = make_param({1.0f});
    p.grad.data[0] = static_cast<float>(g);
    opt.step({&p});
    // m = 0.1*g, u = |g|; theta -= lr/(1-0.9) * m/(u+eps).
    double expect = 1.0 - 5e-4 / 0.1 * (0.1 * g) / (g + 1e-8);
    CHECK(p.value.data[0] == doctest::Approx(expect).epsilon(1e-6));
  }
  {
    OptimizerConfig cfg;
    cfg.kind = OptKind::kAdamW;
    cfg.lr = 1e-4;
    cfg.weight_decay = 1e-4;
    Optimizer opt(cfg);
    auto p = make_param({1.0f});
    p.grad.data[0] = static_cast<float>(g);
    opt.step({&p});
    double after_decay = 1.0 * (1.0 - 1e-4 * 1e-4);
    double mhat = g, vhat = g * g;  // bias corrections cancel at t=1
    double expect = after_decay - 1e-4 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p.value.data[0] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("single-parameter quadratic converges within 500 steps") {
  for (OptKind kind : {OptKind::kAdamax, OptKind::kAdamW}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    Optimizer opt(cfg);
    auto p = make_param({3.0f});
    for (int step = 0; step < 500; ++step) {
      p.grad.data[0] = 2.0f * p.value.data[0];  // d/dx x^2
      opt.step({&p});
    }
    CHECK(std::fabs(p.value.data[0]) < 0.02);
  }
}

TEST_CASE("untrainable parameters are never touched") {
  OptimizerConfig cfg;
  Optimizer opt(cfg);
  auto p = make_param({1.0f});
  p.trainable = false;
  p.grad.data[0] = 5.0f;
  opt.step({&p});
  CHECK(p.value.data[0] == 1.0f);
}

// ---------------------------------------------------------------------------
// schedules
// ---------------------------------------------------------------------------

TEST_CASE("plateau halves at exactly the 10th non-improving epoch") {
  PlateauSchedule sched;  // factor 0.5, patience 10
  for (int e = 0; e < 5; ++e) CHECK(!sched.observe(1.0 - 0.01 * e));  // improving
  double flat = sched.best + 0.1;
  for (int k = 1; k <= 9; ++k) CHECK(!sched.observe(flat));
  CHECK(sched.observe(flat));   // the 10th
  CHECK(!sched.observe(flat));  // counter reset
}

TEST_CASE("equal-to-best values do not count as improvement") {
  PlateauSchedule sched;
  CHECK(!sched.observe(0.5));
  for (int k = 1; k <= 9; ++k) CHECK(!sched.observe(0.5));
  CHECK(sched.observe(0.5));
}

TEST_CASE("early stop fires after 20 flat epochs past warmup, never earlier") {
  EarlyStop stop;  // patience 20, warmup 40
  int64_t epoch = 0;
  for (int e = 1; e <= 40; ++e) {
    epoch = e;
    CHECK(!stop.observe(1.0 - 0.001 * e, epoch));  // improving through warmup
  }
  // Epochs 41..60 never improve; the signal lands on epoch 60 (so epoch 61
  // would not execute), not before.
  for (int e = 41; e <= 59; ++e) CHECK(!stop.observe(2.0, e));
  CHECK(stop.observe(2.0, 60));
}

TEST_CASE("early stop is gated by warmup even after long stagnation") {
  EarlyStop stop;
  CHECK(!stop.observe(1.0, 1));
  for (int e = 2; e <= 40; ++e) CHECK(!stop.observe(2.0, e));  // stale during warmup
  CHECK(stop.observe(2.0, 41));  // first post-warmup epoch with streak >= 20
}

// ---------------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------------

TEST_CASE("normalization to the per-seed baselines") {
  std::vector<RunSummary> runs;
  for (uint64_t s = 1; s <= 3; ++s) {
    runs.push_back({"swin", "25k", "baseline-bf16", s, -1, 0.80});
    runs.push_back({"swin", "25k", "2d-rht-sr", s, -1, s == 1 ? 0.80 : 0.672});
  }
  auto rows = normalize_to_baseline(runs, "baseline-bf16");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].percents[0] == doctest::Approx(100.0));
  CHECK(rows[0].percents[1] == doctest::Approx(84.0));

  std::vector<RunSummary> missing = {{"swin", "25k", "2d-rht-sr", 1, -1, 0.8}};
  CHECK_THROWS_AS(normalize_to_baseline(missing, "baseline-bf16"), std::runtime_error);
}

TEST_CASE("confidence interval: identical seeds give zero width") {
  auto mc = mean_ci95({5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0});
  CHECK(mc.mean == 5.0);
  CHECK(mc.ci95 == 0.0);
  // Known t quantiles.
  CHECK(t_quantile_975(4) == doctest::Approx(2.776));
  CHECK(t_quantile_975(9) == doctest::Approx(2.262));
  CHECK(t_quantile_975(100) == doctest::Approx(1.960));
}
