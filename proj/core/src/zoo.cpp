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

#include <cmath>
#include <stdexcept>

#include "fp4lab/models/model.hpp"
#include "fp4lab/plans.hpp"

namespace fp4lab::models {

namespace {

Tensor kaiming_uniform(Shape shape, int64_t fan_in, RngStream& rng) {
  Tensor t(shape);
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

Tensor trunc_normal(Shape shape, double sigma, RngStream& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.truncated_normal(sigma));
  return t;
}

}  // namespace

// Shared layer assembly; friend of Model so it can bind parameters and use
// the plan caches.
struct LayerOps {
  static ad::GatherPlanPtr cached(Model& m, const std::string& key,
                                  const std::function<ad::GatherPlanPtr()>& make) {
    auto it = m.gather_cache_.find(key);
    if (it != m.gather_cache_.end()) return it->second;
    auto p = make();
    m.gather_cache_[key] = p;
    return p;
  }
  static ad::ScatterPlanPtr cached_s(Model& m, const std::string& key,
                                     const std::function<ad::ScatterPlanPtr()>& make) {
    auto it = m.scatter_cache_.find(key);
    if (it != m.scatter_cache_.end()) return it->second;
    auto p = make();
    m.scatter_cache_[key] = p;
    return p;
  }
  static ad::Var bind(Model& m, ad::Graph& g, Parameter* p) { return m.bind(g, p); }
};

namespace {

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

struct Conv {
  std::string name;
  Parameter* w = nullptr;  // [cin*k*k, cout]
  Parameter* b = nullptr;  // optional [cout]
  Parameter* bn_g = nullptr;
  Parameter* bn_b = nullptr;
  Parameter* bn_mean = nullptr;  // running stats live as untrainable params
  Parameter* bn_var = nullptr;
  ad::BnState bn;
  qat::QLinearLayer* q = nullptr;
  int64_t cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
  bool relu = false;
};

struct Tconv {
  std::string name;
  Parameter* w = nullptr;  // [cin, cout*k*k]
  Parameter* b = nullptr;  // [cout]
  qat::QLinearLayer* q = nullptr;
  int64_t cin = 0, cout = 0, k = 2, stride = 2;
};

struct Linear {
  Parameter* w = nullptr;  // [din, dout]
  Parameter* b = nullptr;  // [dout]
  qat::QLinearLayer* q = nullptr;
};

struct AttnBlock {
  Parameter *ln1_g, *ln1_b, *ln2_g, *ln2_b;
  Linear qkv, proj, fc1, fc2;
};

ad::Var conv_forward(Model& m, ad::Graph& g, ad::Var x, Conv& c, bool training) {
  const Tensor& vx = g.val(x);
  int64_t n = vx.shape[0], h = vx.shape[2], w2 = vx.shape[3];
  int64_t oh = (h + 2 * c.pad - c.k) / c.stride + 1;
  int64_t ow = (w2 + 2 * c.pad - c.k) / c.stride + 1;
  auto key = c.name + ".im2col." + std::to_string(n) + "x" + std::to_string(h) + "x" +
             std::to_string(w2);
  auto plan = LayerOps::cached(m, key, [&] {
    return ad::im2col_plan(n, c.cin, h, w2, c.k, c.k, c.stride, c.pad);
  });
  ad::Var cols = g.gather(x, plan);
  ad::Var wv = LayerOps::bind(m, g, c.w);
  ad::Var y2 = c.q ? qat::qlinear(g, cols, wv, *c.q) : g.matmul(cols, wv);
  if (c.b) y2 = g.add_rowvec(y2, LayerOps::bind(m, g, c.b));
  auto key2 = c.name + ".tonchw." + std::to_string(n) + "x" + std::to_string(oh);
  ad::Var y = g.gather(y2, LayerOps::cached(m, key2, [&] {
    return ad::rows_to_nchw_plan(n, oh, ow, c.cout);
  }));
  if (c.bn_g) {
    // Persistent running stats are stored in untrainable parameters; mirror
    // them through the BnState used by the op.
    c.bn.running_mean = c.bn_mean->value;
    c.bn.running_var = c.bn_var->value;
    y = g.batchnorm2d(y, LayerOps::bind(m, g, c.bn_g), LayerOps::bind(m, g, c.bn_b), &c.bn,
                      training);
    if (training) {
      c.bn_mean->value = c.bn.running_mean;
      c.bn_var->value = c.bn.running_var;
    }
  }
  if (c.relu) y = g.relu(y);
  return y;
}

ad::Var tconv_forward(Model& m, ad::Graph& g, ad::Var x, Tconv& t) {
  const Tensor& vx = g.val(x);
  int64_t n = vx.shape[0], h = vx.shape[2], w2 = vx.shape[3];
  auto rows = g.gather(x, LayerOps::cached(m, t.name + ".rows." + std::to_string(n) + "x" +
                                                  std::to_string(h),
                                           [&] { return ad::nchw_to_rows_plan(n, t.cin, h, w2); }));
  ad::Var wv = LayerOps::bind(m, g, t.w);
  ad::Var y2 = t.q ? qat::qlinear(g, rows, wv, *t.q) : g.matmul(rows, wv);
  auto y = g.scatter_add(y2, LayerOps::cached_s(m, t.name + ".col2im." + std::to_string(n) + "x" +
                                                       std::to_string(h),
                                                [&] {
                                                  return ad::col2im_plan(n, t.cout, h, w2, t.k,
                                                                         t.k, t.stride);
                                                }));
  return g.add_chan_bias(y, LayerOps::bind(m, g, t.b));
}

ad::Var linear_forward(Model& m, ad::Graph& g, ad::Var x, Linear& l) {
  ad::Var y = l.q ? qat::qlinear(g, x, LayerOps::bind(m, g, l.w), *l.q)
                  : g.matmul(x, LayerOps::bind(m, g, l.w));
  return g.add_rowvec(y, LayerOps::bind(m, g, l.b));
}

// Multi-head self-attention over [batch*T, d] token rows. `mask`, when
// present, is an additive [batch*heads, T, T] constant.
ad::Var attention_forward(Model& m, ad::Graph& g, ad::Var x, int64_t batch, int64_t t,
                          int64_t heads, AttnBlock& blk, const Tensor* mask) {
  int64_t d = g.val(x).shape[1];
  int64_t dh = d / heads;
  ad::Var qkv = linear_forward(m, g, x, blk.qkv);  // [batch*t, 3d]
  auto key = "attn." + std::to_string(batch) + "." + std::to_string(t) + "." + std::to_string(d);
  auto sq = LayerOps::cached(m, key + ".q", [&] {
    return ad::slice_cols_plan(batch * t, 3 * d, 0, d);
  });
  auto sk = LayerOps::cached(m, key + ".k", [&] {
    return ad::slice_cols_plan(batch * t, 3 * d, d, d);
  });
  auto sv = LayerOps::cached(m, key + ".v", [&] {
    return ad::slice_cols_plan(batch * t, 3 * d, 2 * d, d);
  });
  auto split = LayerOps::cached(m, key + ".split", [&] {
    return ad::split_heads_plan(batch, t, heads, dh);
  });
  ad::Var q = g.gather(g.gather(qkv, sq), split);  // [batch*heads, t, dh]
  ad::Var k = g.gather(g.gather(qkv, sk), split);
  ad::Var v = g.gather(g.gather(qkv, sv), split);
  q = g.scale(q, 1.0 / std::sqrt(static_cast<double>(dh)));
  ad::Var scores = g.bmm_nt(q, k);  // [batch*heads, t, t]
  if (mask) scores = g.add(scores, g.constant(*mask));
  Tensor* capture = nullptr;
  if (m.capture_attention) {
    m.attention_probs.emplace_back();
    capture = &m.attention_probs.back();
  }
  ad::Var probs = g.softmax_last(scores, capture);
  ad::Var ctx = g.bmm(probs, v);  // [batch*heads, t, dh]
  ad::Var merged = g.gather(ctx, LayerOps::cached(m, key + ".merge", [&] {
    return ad::merge_heads_plan(batch, t, heads, dh);
  }));
  return linear_forward(m, g, merged, blk.proj);
}

ad::Var mlp_forward(Model& m, ad::Graph& g, ad::Var x, AttnBlock& blk) {
  return linear_forward(m, g, g.gelu(linear_forward(m, g, x, blk.fc1)), blk.fc2);
}

// ---------------------------------------------------------------------------
// CNN: encoder-decoder with stride-2 downsampling, BN+ReLU stages, skip
// concatenation, transposed-conv upsampling. First conv, bottleneck and the
// final projection stay in full precision.
// ---------------------------------------------------------------------------

class CnnModel : public Model {
 public:
  CnnModel(const ModelConfig& cfg, const qat::RecipeConfig& recipe, uint64_t seed) {
    cfg_ = cfg;
    recipe_ = recipe;
    seed_ = seed;
    RngStream rng(seed);
    const auto& w = cfg.widths;
    if (w.empty()) throw std::invalid_argument("cnn: empty width list");
    for (int64_t c : w)
      if (c % 16) throw std::invalid_argument("cnn: channel widths must be multiples of 16");
    int64_t stages = static_cast<int64_t>(w.size());
    int64_t min_res = cfg.image >> (stages - 1);
    if (min_res < 1 || (cfg.image % (1 << (stages - 1))) != 0)
      throw std::invalid_argument("cnn: image size not divisible by the downsampling factor");

    stem_ = make_conv("stem", cfg.in_ch, w[0], 3, 1, 1, true, /*quant=*/false, rng);
    for (size_t i = 0; i + 1 < w.size(); ++i)
      downs_.push_back(make_conv("down" + std::to_string(i + 1), w[i], w[i + 1], 3, 2, 1, true,
                                 true, rng));
    bneck_ = make_conv("bottleneck", w.back(), w.back(), 3, 1, 1, true, /*quant=*/false, rng);
    for (size_t i = w.size() - 1; i >= 1; --i) {
      ups_.push_back(make_tconv("up" + std::to_string(i), w[i], w[i - 1], rng));
      fuses_.push_back(make_conv("fuse" + std::to_string(i), 2 * w[i - 1], w[i - 1], 3, 1, 1,
                                 true, true, rng));
    }
    final_ = make_conv("head", w[0], 1, 3, 1, 1, false, /*quant=*/false, rng);
    final_.relu = false;
    final_.b = add_param("head.b", Tensor({1}), true);
  }

  ad::Var forward(ad::Graph& g, const Tensor& images, bool training) override {
    begin_forward();
    ad::Var x = g.leaf(images, false);
    std::vector<ad::Var> skips;
    x = conv_forward(*this, g, x, stem_, training);
    skips.push_back(x);
    for (auto& d : downs_) {
      x = conv_forward(*this, g, x, d, training);
      skips.push_back(x);
    }
    x = conv_forward(*this, g, x, bneck_, training);
    for (size_t i = 0; i < ups_.size(); ++i) {
      x = tconv_forward(*this, g, x, ups_[i]);
      ad::Var skip = skips[skips.size() - 2 - i];
      x = g.concat_ch(x, skip);
      x = conv_forward(*this, g, x, fuses_[i], training);
    }
    return conv_forward(*this, g, x, final_, training);
  }

 private:
  Conv make_conv(const std::string& name, int64_t cin, int64_t cout, int64_t k, int64_t stride,
                 int64_t pad, bool bn, bool quant, RngStream& rng) {
    Conv c;
    c.name = name;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.stride = stride;
    c.pad = pad;
    c.relu = bn;
    c.w = add_param(name + ".w", kaiming_uniform({cin * k * k, cout}, cin * k * k, rng));
    if (bn) {
      c.bn_g = add_param(name + ".bn.g", Tensor({cout}, 1.0f));
      c.bn_b = add_param(name + ".bn.b", Tensor({cout}));
      c.bn_mean = add_param(name + ".bn.mean", Tensor({cout}), false);
      c.bn_var = add_param(name + ".bn.var", Tensor({cout}, 1.0f), false);
    }
    c.q = add_qlayer(name, quant);
    return c;
  }
  Tconv make_tconv(const std::string& name, int64_t cin, int64_t cout, RngStream& rng) {
    Tconv t;
    t.name = name;
    t.cin = cin;
    t.cout = cout;
    t.w = add_param(name + ".w", kaiming_uniform({cin, cout * 4}, cin, rng));
    t.b = add_param(name + ".b", Tensor({cout}));
    t.q = add_qlayer(name, true);
    return t;
  }

  Conv stem_, bneck_, final_;
  std::vector<Conv> downs_;
  std::vector<Tconv> ups_;
  std::vector<Conv> fuses_;
};

// ---------------------------------------------------------------------------
// Transformer common pieces
// ---------------------------------------------------------------------------

struct TransformerCore {
  Parameter* embed_w = nullptr;
  Parameter* embed_b = nullptr;
  Parameter* pos = nullptr;
  std::vector<AttnBlock> blocks;
  Parameter *lnf_g = nullptr, *lnf_b = nullptr;
};

AttnBlock make_block(const std::string& prefix, int64_t d, bool quant, RngStream& rng,
                     std::function<Parameter*(std::string, Tensor, bool)> addp,
                     std::function<qat::QLinearLayer*(std::string, bool)> addq) {
  AttnBlock b;
  b.ln1_g = addp(prefix + ".ln1.g", Tensor({d}, 1.0f), true);
  b.ln1_b = addp(prefix + ".ln1.b", Tensor({d}), true);
  b.qkv.w = addp(prefix + ".qkv.w", trunc_normal({d, 3 * d}, 0.02, rng), true);
  b.qkv.b = addp(prefix + ".qkv.b", Tensor({3 * d}), true);
  b.qkv.q = addq(prefix + ".qkv", quant);
  b.proj.w = addp(prefix + ".proj.w", trunc_normal({d, d}, 0.02, rng), true);
  b.proj.b = addp(prefix + ".proj.b", Tensor({d}), true);
  b.proj.q = addq(prefix + ".proj", quant);
  b.ln2_g = addp(prefix + ".ln2.g", Tensor({d}, 1.0f), true);
  b.ln2_b = addp(prefix + ".ln2.b", Tensor({d}), true);
  b.fc1.w = addp(prefix + ".fc1.w", trunc_normal({d, 4 * d}, 0.02, rng), true);
  b.fc1.b = addp(prefix + ".fc1.b", Tensor({4 * d}), true);
  b.fc1.q = addq(prefix + ".fc1", quant);
  b.fc2.w = addp(prefix + ".fc2.w", trunc_normal({4 * d, d}, 0.02, rng), true);
  b.fc2.b = addp(prefix + ".fc2.b", Tensor({d}), true);
  b.fc2.q = addq(prefix + ".fc2", quant);
  return b;
}

// ---------------------------------------------------------------------------
// ViT: patch embedding, learned positional embeddings, global-attention
// blocks, linear per-patch decoder reshaped back to pixels. Only the QKV /
// projection / MLP linears are quantized.
// ---------------------------------------------------------------------------

class VitModel : public Model {
 public:
  VitModel(const ModelConfig& cfg, const qat::RecipeConfig& recipe, uint64_t seed) {
    cfg_ = cfg;
    recipe_ = recipe;
    seed_ = seed;
    if (cfg.image % cfg.patch)
      throw std::invalid_argument("vit: image size not divisible by patch size");
    if (cfg.dim % cfg.heads) throw std::invalid_argument("vit: dim not divisible by heads");
    RngStream rng(seed);
    int64_t pd = cfg.in_ch * cfg.patch * cfg.patch;
    grid_ = cfg.image / cfg.patch;
    tokens_ = grid_ * grid_;
    core_.embed_w = add_param("embed.w", trunc_normal({pd, cfg.dim}, 0.02, rng));
    core_.embed_b = add_param("embed.b", Tensor({cfg.dim}));
    core_.pos = add_param("pos", Tensor({tokens_, cfg.dim}));
    auto addp = [this](std::string n, Tensor t, bool tr) { return add_param(n, std::move(t), tr); };
    auto addq = [this](std::string n, bool en) { return add_qlayer(n, en); };
    for (int64_t i = 0; i < cfg.depth; ++i)
      core_.blocks.push_back(
          make_block("block" + std::to_string(i), cfg.dim, true, rng, addp, addq));
    core_.lnf_g = add_param("lnf.g", Tensor({cfg.dim}, 1.0f));
    core_.lnf_b = add_param("lnf.b", Tensor({cfg.dim}));
    head_w_ = add_param("head.w", trunc_normal({cfg.dim, cfg.patch * cfg.patch}, 0.02, rng));
    head_b_ = add_param("head.b", Tensor({cfg.patch * cfg.patch}));
  }

  ad::Var forward(ad::Graph& g, const Tensor& images, bool training) override {
    (void)training;
    begin_forward();
    int64_t n = images.shape[0];
    ad::Var x = g.leaf(images, false);
    auto pp = LayerOps::cached(*this, "patchify." + std::to_string(n), [&] {
      return ad::patchify_plan(n, cfg_.in_ch, cfg_.image, cfg_.image, cfg_.patch);
    });
    ad::Var tok = g.gather(x, pp);  // [n*T, pd]
    tok = g.add_rowvec(g.matmul(tok, bind(g, core_.embed_w)), bind(g, core_.embed_b));
    tok = g.add_tiled_rows(tok, bind(g, core_.pos));
    for (auto& blk : core_.blocks) {
      ad::Var a = attention_forward(
          *this, g, g.layernorm(tok, bind(g, blk.ln1_g), bind(g, blk.ln1_b)), n, tokens_,
          cfg_.heads, blk, nullptr);
      tok = g.add(tok, a);
      ad::Var mlp = mlp_forward(*this, g, g.layernorm(tok, bind(g, blk.ln2_g), bind(g, blk.ln2_b)),
                                blk);
      tok = g.add(tok, mlp);
    }
    tok = g.layernorm(tok, bind(g, core_.lnf_g), bind(g, core_.lnf_b));
    ad::Var pix = g.add_rowvec(g.matmul(tok, bind(g, head_w_)), bind(g, head_b_));
    auto up = LayerOps::cached(*this, "unpatchify." + std::to_string(n), [&] {
      return ad::unpatchify_plan(n, 1, cfg_.image, cfg_.image, cfg_.patch);
    });
    return g.gather(pix, up);
  }

 private:
  TransformerCore core_;
  Parameter *head_w_, *head_b_;
  int64_t grid_ = 0, tokens_ = 0;
};

// ---------------------------------------------------------------------------
// Swin: windowed attention alternating W-MSA and SW-MSA (cyclic shift with
// the standard additive cross-region mask), transposed-conv decoder back to
// full resolution.
// ---------------------------------------------------------------------------

class SwinModel : public Model {
 public:
  SwinModel(const ModelConfig& cfg, const qat::RecipeConfig& recipe, uint64_t seed) {
    cfg_ = cfg;
    recipe_ = recipe;
    seed_ = seed;
    if (cfg.image % cfg.patch)
      throw std::invalid_argument("swin: image size not divisible by patch size");
    grid_ = cfg.image / cfg.patch;
    if (grid_ % cfg.window)
      throw std::invalid_argument("swin: token grid not divisible by window size");
    if (cfg.dim % cfg.heads) throw std::invalid_argument("swin: dim not divisible by heads");
    RngStream rng(seed);
    tokens_ = grid_ * grid_;
    shift_ = cfg.window / 2;
    int64_t pd = cfg.in_ch * cfg.patch * cfg.patch;
    core_.embed_w = add_param("embed.w", trunc_normal({pd, cfg.dim}, 0.02, rng));
    core_.embed_b = add_param("embed.b", Tensor({cfg.dim}));
    core_.pos = add_param("pos", Tensor({tokens_, cfg.dim}));
    auto addp = [this](std::string n, Tensor t, bool tr) { return add_param(n, std::move(t), tr); };
    auto addq = [this](std::string n, bool en) { return add_qlayer(n, en); };
    for (int64_t i = 0; i < cfg.depth; ++i)
      core_.blocks.push_back(
          make_block("block" + std::to_string(i), cfg.dim, true, rng, addp, addq));
    core_.lnf_g = add_param("lnf.g", Tensor({cfg.dim}, 1.0f));
    core_.lnf_b = add_param("lnf.b", Tensor({cfg.dim}));

    int64_t d = cfg.dim;
    int64_t d1 = std::max<int64_t>(d / 2, 8), d2 = std::max<int64_t>(d / 4, 8);
    dec1_ = make_tconv("dec1", d, d1, rng);
    dec2_ = make_tconv("dec2", d1, d2, rng);
    head_w_ = add_param("head.w", kaiming_uniform({d2, 1}, d2, rng));
    head_b_ = add_param("head.b", Tensor({1}));
  }

  ad::Var forward(ad::Graph& g, const Tensor& images, bool training) override {
    (void)training;
    begin_forward();
    int64_t n = images.shape[0];
    ad::Var x = g.leaf(images, false);
    auto pp = LayerOps::cached(*this, "patchify." + std::to_string(n), [&] {
      return ad::patchify_plan(n, cfg_.in_ch, cfg_.image, cfg_.image, cfg_.patch);
    });
    ad::Var tok = g.gather(x, pp);
    tok = g.add_rowvec(g.matmul(tok, bind(g, core_.embed_w)), bind(g, core_.embed_b));
    tok = g.add_tiled_rows(tok, bind(g, core_.pos));

    int64_t w = cfg_.window;
    int64_t nw = grid_ / w;
    int64_t wt = w * w;
    for (size_t i = 0; i < core_.blocks.size(); ++i) {
      auto& blk = core_.blocks[i];
      bool shifted = (i % 2) == 1;
      ad::Var t = g.layernorm(tok, bind(g, blk.ln1_g), bind(g, blk.ln1_b));
      if (shifted)
        t = g.gather(t, LayerOps::cached(*this, "roll+." + std::to_string(n), [&] {
          return ad::roll_tokens_plan(n, grid_, cfg_.dim, shift_);
        }));
      t = g.gather(t, LayerOps::cached(*this, "winpart." + std::to_string(n), [&] {
        return ad::window_partition_plan(n, grid_, cfg_.dim, w);
      }));
      const Tensor* mask = shifted ? &shift_mask(n) : nullptr;
      ad::Var a = attention_forward(*this, g, t, n * nw * nw, wt, cfg_.heads, blk, mask);
      a = g.gather(a, LayerOps::cached(*this, "winrev." + std::to_string(n), [&] {
        return ad::window_reverse_plan(n, grid_, cfg_.dim, w);
      }));
      if (shifted)
        a = g.gather(a, LayerOps::cached(*this, "roll-." + std::to_string(n), [&] {
          return ad::roll_tokens_plan(n, grid_, cfg_.dim, -shift_);
        }));
      tok = g.add(tok, a);
      ad::Var mlp = mlp_forward(*this, g, g.layernorm(tok, bind(g, blk.ln2_g), bind(g, blk.ln2_b)),
                                blk);
      tok = g.add(tok, mlp);
    }
    tok = g.layernorm(tok, bind(g, core_.lnf_g), bind(g, core_.lnf_b));
    ad::Var img = g.gather(tok, LayerOps::cached(*this, "tok2nchw." + std::to_string(n), [&] {
      return ad::rows_to_nchw_plan(n, grid_, grid_, cfg_.dim);
    }));
    img = g.gelu(tconv_forward(*this, g, img, dec1_));
    img = g.gelu(tconv_forward(*this, g, img, dec2_));
    // 1x1 projection to logits.
    int64_t hw = cfg_.image;
    ad::Var rows = g.gather(img, LayerOps::cached(*this, "dec.rows." + std::to_string(n), [&] {
      return ad::nchw_to_rows_plan(n, dec2_.cout, hw, hw);
    }));
    ad::Var logit_rows = g.add_rowvec(g.matmul(rows, bind(g, head_w_)), bind(g, head_b_));
    return g.gather(logit_rows, LayerOps::cached(*this, "dec.nchw." + std::to_string(n), [&] {
      return ad::rows_to_nchw_plan(n, hw, hw, 1);
    }));
  }

 private:
  Tconv make_tconv(const std::string& name, int64_t cin, int64_t cout, RngStream& rng) {
    Tconv t;
    t.name = name;
    t.cin = cin;
    t.cout = cout;
    t.w = add_param(name + ".w", kaiming_uniform({cin, cout * 4}, cin, rng));
    t.b = add_param(name + ".b", Tensor({cout}));
    t.q = add_qlayer(name, false);  // decoder stays high precision
    return t;
  }

  // Additive attention mask for the shifted layout: tokens from different
  // pre-shift regions inside one window must not attend to each other.
  const Tensor& shift_mask(int64_t n) {
    auto it = masks_.find(n);
    if (it != masks_.end()) return it->second;
    int64_t w = cfg_.window, nw = grid_ / w, wt = w * w;
    auto region = [&](int64_t coord) {
      if (coord < grid_ - w) return 0;
      if (coord < grid_ - shift_) return 1;
      return 2;
    };
    std::vector<int> ids(static_cast<size_t>(nw * nw * wt));
    for (int64_t wy = 0; wy < nw; ++wy)
      for (int64_t wx = 0; wx < nw; ++wx)
        for (int64_t ly = 0; ly < w; ++ly)
          for (int64_t lx = 0; lx < w; ++lx)
            ids[static_cast<size_t>(((wy * nw + wx) * w + ly) * w + lx)] =
                region(wy * w + ly) * 3 + region(wx * w + lx);
    Tensor mask({n * nw * nw * cfg_.heads, wt, wt});
    for (int64_t in = 0; in < n; ++in)
      for (int64_t win = 0; win < nw * nw; ++win)
        for (int64_t h = 0; h < cfg_.heads; ++h)
          for (int64_t i = 0; i < wt; ++i)
            for (int64_t j = 0; j < wt; ++j) {
              bool same = ids[static_cast<size_t>(win * wt + i)] ==
                          ids[static_cast<size_t>(win * wt + j)];
              mask.data[static_cast<size_t>(
                  ((((in * nw * nw + win) * cfg_.heads + h) * wt + i) * wt + j))] =
                  same ? 0.0f : -100.0f;
            }
    return masks_.emplace(n, std::move(mask)).first->second;
  }

  TransformerCore core_;
  Tconv dec1_, dec2_;
  Parameter *head_w_, *head_b_;
  int64_t grid_ = 0, tokens_ = 0, shift_ = 0;
  std::map<int64_t, Tensor> masks_;
};

}  // namespace

// ---------------------------------------------------------------------------
// tiers
// ---------------------------------------------------------------------------

const std::vector<std::string>& tier_names() {
  static const std::vector<std::string> names = {"25k", "100k", "400k"};
  return names;
}

ModelConfig model_config(Arch arch, const std::string& tier) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.tier = tier;
  if (arch == Arch::kCnn) {
    if (tier == "25k")
      cfg.widths = {16, 16, 32};
    else if (tier == "100k")
      cfg.widths = {32, 32, 64};
    else if (tier == "400k")
      cfg.widths = {32, 64, 128};
    else
      throw std::invalid_argument("unknown cnn tier '" + tier + "'");
    return cfg;
  }
  // Transformers share tier geometry except for the Swin-only fragile tier.
  if (tier == "25k") {
    cfg.dim = 32;
    cfg.depth = 2;
    cfg.heads = 1;
  } else if (tier == "100k") {
    cfg.dim = 64;
    cfg.depth = 2;
    cfg.heads = 2;
  } else if (tier == "400k") {
    cfg.dim = 96;
    cfg.depth = 3;
    cfg.heads = 3;
  } else if (tier == "fragile" && arch == Arch::kSwin) {
    cfg.dim = 32;
    cfg.depth = 4;
    cfg.heads = 2;  // head dim 16
  } else {
    throw std::invalid_argument("unknown tier '" + tier + "' for " +
                                std::string(to_string(arch)));
  }
  return cfg;
}

std::unique_ptr<Model> build_model(const ModelConfig& cfg, const qat::RecipeConfig& recipe,
                                   uint64_t seed) {
  switch (cfg.arch) {
    case Arch::kCnn: return std::make_unique<CnnModel>(cfg, recipe, seed);
    case Arch::kVit: return std::make_unique<VitModel>(cfg, recipe, seed);
    case Arch::kSwin: return std::make_unique<SwinModel>(cfg, recipe, seed);
  }
  throw std::invalid_argument("unknown architecture");
}

}  // namespace fp4lab::models
