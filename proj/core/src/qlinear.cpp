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

#include "fp4lab/qat/qlinear.hpp"

#include <stdexcept>

#include "fp4lab/linalg.hpp"
#include "fp4lab/rht.hpp"

namespace fp4lab::qat {

namespace {

using fp4::BlockKind;
using fp4::Rounding;

void log_event(QLinearLayer& layer, Pass pass, Role role, Precision prec, BlockKind geom,
               bool stochastic, bool rht_applied, bool reused) {
  if (!layer.events) return;
  QuantEvent e;
  e.layer = layer.name;
  e.step = layer.step;
  e.pass = pass;
  e.role = role;
  e.precision = prec;
  e.geometry = geom;
  e.stochastic = stochastic;
  e.rht = rht_applied;
  e.reused = reused;
  layer.events->push_back(e);
}

// Weight fake-quantization for the forward GEMM: blocks must run along the
// contracted dimension k, which for a [k,n] weight means quantizing the
// transposed matrix under 1x16 geometry. 16x16 square blocks are symmetric,
// so the matrix is quantized directly.
Tensor fake_quant_weight_fwd(const Tensor& w, const RecipeConfig& r) {
  if (r.two_d)
    return fp4::fake_quantize(w, {BlockKind::kSquare16x16}, Rounding::nearest(), r.scale_policy);
  Tensor wt = linalg::transpose2d(w);
  Tensor wq = fp4::fake_quantize(wt, {BlockKind::kRows1x16}, Rounding::nearest(), r.scale_policy);
  return linalg::transpose2d(wq);
}

}  // namespace

ad::Var qlinear(ad::Graph& g, ad::Var x, ad::Var w, QLinearLayer& layer) {
  if (!layer.enabled || layer.recipe.is_baseline()) return g.matmul(x, w);

  const RecipeConfig& r = layer.recipe;
  const Tensor& X = g.val(x);
  const Tensor& W = g.val(w);
  if (X.ndim() != 2 || W.ndim() != 2 || X.shape[1] != W.shape[0])
    throw std::runtime_error("qlinear: incompatible shapes " + shape_str(X.shape) + " * " +
                             shape_str(W.shape));
  layer.step += 1;
  auto ctx = std::make_shared<LinearContext>();
  layer.last_ctx = ctx;

  bool fwd_rht = r.rht && r.fwd_only;
  Tensor xop = X, wop = W;
  if (fwd_rht) {
    // Shared rotation of both forward operands along the contracted axis;
    // it cancels in exact arithmetic, only the quantization noise changes.
    if (X.shape[1] % rht::kDefaultSize != 0)
      throw std::runtime_error("qlinear: contracted dim not divisible by the transform size");
    auto t = rht::RhtTransform::from_stream(rht::kDefaultSize, *layer.rng);
    xop = rht::apply_rht(X, t, 1);
    wop = rht::apply_rht(W, t, 0);
  }

  Tensor x_hat = fp4::fake_quantize(xop, {BlockKind::kRows1x16}, Rounding::nearest(),
                                    r.scale_policy);
  log_event(layer, Pass::kFprop, Role::kX, Precision::kFp4, BlockKind::kRows1x16, false,
            fwd_rht, false);
  Tensor w_hat = fake_quant_weight_fwd(wop, r);
  log_event(layer, Pass::kFprop, Role::kW, Precision::kFp4,
            r.two_d ? BlockKind::kSquare16x16 : BlockKind::kRows1x16, false, fwd_rht, false);

  Tensor y = linalg::matmul(x_hat, w_hat);

  ctx->x_hat = x_hat;
  ctx->w_hat = w_hat;
  ctx->x_raw = X;
  ctx->w_raw = W;

  QLinearLayer* lp = &layer;
  int ix = x.id, iw = w.id;
  return g.custom({x, w}, std::move(y), "qlinear", [lp, ctx, ix, iw](ad::Graph& gg, int self) {
    const RecipeConfig& r = lp->recipe;
    const Tensor& G = gg.node(ad::Var{self}).grad;
    ctx->backward_ran = true;
    bool bwd_rht = r.rht && !r.fwd_only;
    bool x_needs = gg.node(ad::Var{ix}).needs_grad;
    bool w_needs = gg.node(ad::Var{iw}).needs_grad;

    // DGRAD: dX = Q(G) * W^T. G is quantized with 1x16 blocks along its own
    // innermost dim (the contracted output dim).
    if (x_needs) {
      Tensor gq = G;
      Precision gprec = Precision::kHigh;
      bool gsr = false;
      if (!r.fwd_only && !r.chain_rule) {
        gsr = r.sr;
        gq = fp4::fake_quantize(G, {BlockKind::kRows1x16},
                                gsr ? Rounding::stochastic(*lp->rng) : Rounding::nearest(),
                                r.scale_policy);
        gprec = Precision::kFp4;
      }
      log_event(*lp, Pass::kDgrad, Role::kG, gprec, BlockKind::kRows1x16, gsr, false, false);

      Tensor wd;
      if (r.fwd_only) {
        wd = ctx->w_raw;
        log_event(*lp, Pass::kDgrad, Role::kW, Precision::kHigh, BlockKind::kRows1x16, false,
                  false, false);
      } else if (r.chain_rule || r.two_d) {
        // Reuse the forward's dequantized weight bit for bit. Under 2-D
        // scaling the transposed re-quantization would be identical anyway;
        // that equality has its own test.
        wd = ctx->w_hat;
        log_event(*lp, Pass::kDgrad, Role::kW, Precision::kFp4,
                  r.two_d ? BlockKind::kSquare16x16 : BlockKind::kRows1x16, false, false, true);
      } else {
        // Fresh 1x16 blocks along the new contraction axis (the output dim):
        // this is exactly the forward/backward inconsistency 2-D removes.
        wd = fp4::fake_quantize(ctx->w_raw, {BlockKind::kRows1x16}, Rounding::nearest(),
                                r.scale_policy);
        log_event(*lp, Pass::kDgrad, Role::kW, Precision::kFp4, BlockKind::kRows1x16, false,
                  false, false);
      }
      ctx->bwd_dgrad_w = wd;
      ctx->bwd_dgrad_g = gq;
      gg.accum_grad(ix, linalg::matmul_nt(gq, wd));
    }

    // WGRAD: dW = X^T * G over the row dimension m, with optional shared
    // rotation of both operands along m and 1x16 quantization blocks along m.
    if (w_needs) {
      if (r.fwd_only) {
        log_event(*lp, Pass::kWgrad, Role::kX, Precision::kHigh, BlockKind::kRows1x16, false,
                  false, false);
        log_event(*lp, Pass::kWgrad, Role::kG, Precision::kHigh, BlockKind::kRows1x16, false,
                  false, false);
        ctx->bwd_wgrad_x = ctx->x_raw;
        ctx->bwd_wgrad_g = G;
        gg.accum_grad(iw, linalg::matmul_tn(ctx->x_raw, G));
      } else if (r.chain_rule) {
        log_event(*lp, Pass::kWgrad, Role::kX, Precision::kFp4, BlockKind::kRows1x16, false,
                  false, true);
        log_event(*lp, Pass::kWgrad, Role::kG, Precision::kHigh, BlockKind::kRows1x16, false,
                  false, false);
        ctx->bwd_wgrad_x = ctx->x_hat;
        ctx->bwd_wgrad_g = G;
        gg.accum_grad(iw, linalg::matmul_tn(ctx->x_hat, G));
      } else {
        WgradOptions opts;
        rht::RhtTransform t;
        if (bwd_rht) {
          if (ctx->x_raw.shape[0] % rht::kDefaultSize != 0)
            throw std::runtime_error(
                "qlinear: row count not divisible by the transform size in WGRAD");
          t = rht::RhtTransform::from_stream(rht::kDefaultSize, *lp->rng);
          opts.transform = &t;
        }
        opts.stochastic = r.sr;
        opts.rng = lp->rng.get();
        opts.scale_policy = r.scale_policy;
        WgradResult wr = wgrad_gemm(ctx->x_raw, G, opts);
        log_event(*lp, Pass::kWgrad, Role::kX, Precision::kFp4, BlockKind::kRows1x16, false,
                  bwd_rht, false);
        log_event(*lp, Pass::kWgrad, Role::kG, Precision::kFp4, BlockKind::kRows1x16, r.sr,
                  bwd_rht, false);
        ctx->bwd_wgrad_x = wr.x_op;
        ctx->bwd_wgrad_g = wr.g_op;
        gg.accum_grad(iw, wr.dw);
      }
    }
  });
}

WgradResult wgrad_gemm(const Tensor& x, const Tensor& g, const WgradOptions& opts) {
  Tensor xr = x, gr = g;
  if (opts.transform) {
    xr = rht::apply_rht(xr, *opts.transform, 0);
    gr = rht::apply_rht(gr, *opts.transform, 0);
  }
  WgradResult res;
  // Transpose first so 1x16 blocks run along the contracted dim m.
  res.x_op = linalg::transpose2d(xr);
  res.g_op = linalg::transpose2d(gr);
  if (opts.quantize) {
    res.x_op = fp4::fake_quantize(res.x_op, {BlockKind::kRows1x16}, Rounding::nearest(),
                                  opts.scale_policy);
    res.g_op = fp4::fake_quantize(
        res.g_op, {BlockKind::kRows1x16},
        opts.stochastic ? Rounding::stochastic(*opts.rng) : Rounding::nearest(),
        opts.scale_policy);
  }
  res.dw = linalg::matmul_nt(res.x_op, res.g_op);
  return res;
}

ProbeResult run_recipe_probe(const RecipeConfig& recipe, uint64_t seed) {
  ProbeResult res;
  RngStream init(seed);
  const int64_t m = 32, k = 32, n = 32;
  Tensor x({m, k}), w1({k, n}), w2({n, k});
  for (auto& v : x.data) v = static_cast<float>(init.normal());
  for (auto& v : w1.data) v = static_cast<float>(init.normal() * 0.1);
  for (auto& v : w2.data) v = static_cast<float>(init.normal() * 0.1);

  QLinearLayer l1("probe.fc1", recipe, RngStream::derive(seed, 1));
  QLinearLayer l2("probe.fc2", recipe, RngStream::derive(seed, 2));
  l1.events = &res.log;
  l2.events = &res.log;

  ad::Graph g;
  auto vx = g.leaf(x, true);  // wants a gradient so the DGRAD path runs
  auto vw1 = g.leaf(w1, true);
  auto vw2 = g.leaf(w2, true);
  auto h = g.relu(qlinear(g, vx, vw1, l1));
  auto y = qlinear(g, h, vw2, l2);
  auto loss = g.sum_all(y);
  g.backward(loss);

  res.report = conformance_check(recipe, res.log, /*expect_backward=*/true);
  return res;
}

}  // namespace fp4lab::qat
