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

#include "fp4lab/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "fp4lab/linalg.hpp"

namespace fp4lab::ad {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

void BnState::init(int64_t channels) {
  running_mean = Tensor({channels});
  running_var = Tensor({channels}, 1.0f);
}

Var Graph::push(Node n) {
  if (check_finite && !n.value.all_finite())
    throw std::runtime_error(std::string("non-finite output of op ") + n.op);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(Tensor v, bool needs_grad) {
  Node n;
  n.value = std::move(v);
  n.needs_grad = needs_grad;
  return push(std::move(n));
}

void Graph::ensure_grad(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad_alloc) {
    n.grad = Tensor(n.value.shape);
    n.grad_alloc = true;
  }
}

void Graph::accum_grad(int id, const Tensor& g) {
  ensure_grad(id);
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad.same_shape(g))
    throw std::runtime_error("gradient shape mismatch for op " + std::string(n.op));
  for (size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
}

const Tensor& Graph::grad(Var v) {
  ensure_grad(v.id);
  return node(v).grad;
}

void Graph::backward(Var loss) {
  if (backward_done_)
    throw std::runtime_error("backward already ran on this graph; build a new graph per step");
  Node& ln = node(loss);
  if (ln.value.numel() != 1)
    throw std::runtime_error("backward requires a scalar loss, got shape " +
                             shape_str(ln.value.shape));
  backward_done_ = true;
  ensure_grad(loss.id);
  node(loss).grad.data[0] = 1.0f;
  for (int i = loss.id; i >= 0; --i) {
    Node& nd = nodes_[static_cast<size_t>(i)];
    if (!nd.backward || !nd.needs_grad || !nd.grad_alloc) continue;
    nd.backward(*this, i);
  }
}

Var Graph::custom(const std::vector<Var>& parents, Tensor value, const char* name,
                  std::function<void(Graph&, int)> backward) {
  Node n;
  n.value = std::move(value);
  n.op = name;
  for (Var p : parents) n.needs_grad = n.needs_grad || node(p).needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// elementwise / structural
// ---------------------------------------------------------------------------

Var Graph::add(Var a, Var b) {
  check_same_shape(node(a).value, node(b).value, "add");
  Tensor out = node(a).value;
  const Tensor& vb = node(b).value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
  int ia = a.id, ib = b.id;
  return custom({a, b}, std::move(out), "add", [ia, ib](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    if (g.nodes_[static_cast<size_t>(ia)].needs_grad) g.accum_grad(ia, go);
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) g.accum_grad(ib, go);
  });
}

Var Graph::add_rowvec(Var a, Var bias) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(bias).value;
  if (va.ndim() != 2 || vb.ndim() != 1 || va.shape[1] != vb.shape[0])
    throw std::runtime_error("add_rowvec: incompatible shapes " + shape_str(va.shape) + " + " +
                             shape_str(vb.shape));
  int64_t m = va.shape[0], n = va.shape[1];
  Tensor out = va;
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.data[static_cast<size_t>(i * n + j)] += vb.data[static_cast<size_t>(j)];
  int ia = a.id, ib = bias.id;
  return custom({a, bias}, std::move(out), "add_rowvec", [ia, ib, m, n](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    if (g.nodes_[static_cast<size_t>(ia)].needs_grad) g.accum_grad(ia, go);
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) {
      Tensor gb({n});
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
          gb.data[static_cast<size_t>(j)] += go.data[static_cast<size_t>(i * n + j)];
      g.accum_grad(ib, gb);
    }
  });
}

Var Graph::add_chan_bias(Var x, Var bias) {
  const Tensor& vx = node(x).value;
  const Tensor& vb = node(bias).value;
  if (vx.ndim() != 4 || vb.ndim() != 1 || vx.shape[1] != vb.shape[0])
    throw std::runtime_error("add_chan_bias: incompatible shapes " + shape_str(vx.shape) +
                             " + " + shape_str(vb.shape));
  int64_t n = vx.shape[0], c = vx.shape[1], hw = vx.shape[2] * vx.shape[3];
  Tensor out = vx;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      float b = vb.data[static_cast<size_t>(ic)];
      float* p = out.ptr() + (in * c + ic) * hw;
      for (int64_t i = 0; i < hw; ++i) p[i] += b;
    }
  int ix = x.id, ib = bias.id;
  return custom({x, bias}, std::move(out), "add_chan_bias", [ix, ib, n, c, hw](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    if (g.nodes_[static_cast<size_t>(ix)].needs_grad) g.accum_grad(ix, go);
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) {
      Tensor gb({c});
      for (int64_t in = 0; in < n; ++in)
        for (int64_t ic = 0; ic < c; ++ic) {
          const float* p = go.ptr() + (in * c + ic) * hw;
          double acc = 0.0;
          for (int64_t i = 0; i < hw; ++i) acc += p[i];
          gb.data[static_cast<size_t>(ic)] += static_cast<float>(acc);
        }
      g.accum_grad(ib, gb);
    }
  });
}

Var Graph::add_tiled_rows(Var x, Var p) {
  const Tensor& vx = node(x).value;
  const Tensor& vp = node(p).value;
  if (vx.ndim() != 2 || vp.ndim() != 2 || vx.shape[1] != vp.shape[1] ||
      vx.shape[0] % vp.shape[0] != 0)
    throw std::runtime_error("add_tiled_rows: incompatible shapes " + shape_str(vx.shape) +
                             " + " + shape_str(vp.shape));
  int64_t rows = vx.shape[0], t = vp.shape[0], d = vx.shape[1];
  Tensor out = vx;
  for (int64_t r = 0; r < rows; ++r) {
    const float* src = vp.ptr() + (r % t) * d;
    float* dst = out.ptr() + r * d;
    for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  int ix = x.id, ip = p.id;
  return custom({x, p}, std::move(out), "add_tiled_rows", [ix, ip, rows, t, d](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    if (g.nodes_[static_cast<size_t>(ix)].needs_grad) g.accum_grad(ix, go);
    if (g.nodes_[static_cast<size_t>(ip)].needs_grad) {
      Tensor gp({t, d});
      for (int64_t r = 0; r < rows; ++r) {
        float* dst = gp.ptr() + (r % t) * d;
        const float* src = go.ptr() + r * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
      }
      g.accum_grad(ip, gp);
    }
  });
}

Var Graph::scale(Var a, double c) {
  Tensor out = node(a).value;
  float fc = static_cast<float>(c);
  for (auto& v : out.data) v *= fc;
  int ia = a.id;
  return custom({a}, std::move(out), "scale", [ia, fc](Graph& g, int self) {
    Tensor gi = g.nodes_[static_cast<size_t>(self)].grad;
    for (auto& v : gi.data) v *= fc;
    g.accum_grad(ia, gi);
  });
}

Var Graph::relu(Var a) {
  const Tensor& va = node(a).value;
  Tensor out = va;
  for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
  int ia = a.id;
  Tensor saved = va;
  return custom({a}, std::move(out), "relu", [ia, saved](Graph& g, int self) {
    Tensor gi = g.nodes_[static_cast<size_t>(self)].grad;
    for (size_t i = 0; i < gi.data.size(); ++i)
      if (saved.data[i] <= 0.0f) gi.data[i] = 0.0f;
    g.accum_grad(ia, gi);
  });
}

Var Graph::gelu(Var a) {
  const Tensor& va = node(a).value;
  Tensor out(va.shape);
  for (size_t i = 0; i < va.data.size(); ++i) {
    double x = va.data[i];
    out.data[i] = static_cast<float>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
  }
  int ia = a.id;
  Tensor saved = va;
  return custom({a}, std::move(out), "gelu", [ia, saved](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    Tensor gi(saved.shape);
    for (size_t i = 0; i < gi.data.size(); ++i) {
      double x = saved.data[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      gi.data[i] = static_cast<float>(go.data[i] * (cdf + x * pdf));
    }
    g.accum_grad(ia, gi);
  });
}

Var Graph::sigmoid(Var a) {
  const Tensor& va = node(a).value;
  Tensor out(va.shape);
  for (size_t i = 0; i < va.data.size(); ++i) {
    double x = va.data[i];
    double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    out.data[i] = static_cast<float>(y);
  }
  int ia = a.id;
  Tensor saved = out;
  return custom({a}, std::move(out), "sigmoid", [ia, saved](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    Tensor gi(saved.shape);
    for (size_t i = 0; i < gi.data.size(); ++i) {
      double y = saved.data[i];
      gi.data[i] = static_cast<float>(go.data[i] * y * (1.0 - y));
    }
    g.accum_grad(ia, gi);
  });
}

Var Graph::reshape(Var a, Shape s) {
  Tensor out = node(a).value.reshaped(std::move(s));
  int ia = a.id;
  Shape orig = node(a).value.shape;
  return custom({a}, std::move(out), "reshape", [ia, orig](Graph& g, int self) {
    Tensor gi = g.nodes_[static_cast<size_t>(self)].grad.reshaped(orig);
    g.accum_grad(ia, gi);
  });
}

Var Graph::gather(Var a, GatherPlanPtr plan) {
  const Tensor& va = node(a).value;
  if (va.shape != plan->in_shape)
    throw std::runtime_error("gather: input shape " + shape_str(va.shape) +
                             " does not match plan " + shape_str(plan->in_shape));
  Tensor out(plan->out_shape);
  for (size_t i = 0; i < plan->src.size(); ++i) {
    int64_t s = plan->src[i];
    out.data[i] = s < 0 ? 0.0f : va.data[static_cast<size_t>(s)];
  }
  int ia = a.id;
  return custom({a}, std::move(out), "gather", [ia, plan](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    Tensor gi(plan->in_shape);
    for (size_t i = 0; i < plan->src.size(); ++i) {
      int64_t s = plan->src[i];
      if (s >= 0) gi.data[static_cast<size_t>(s)] += go.data[i];
    }
    g.accum_grad(ia, gi);
  });
}

Var Graph::scatter_add(Var a, ScatterPlanPtr plan) {
  const Tensor& va = node(a).value;
  if (va.shape != plan->in_shape)
    throw std::runtime_error("scatter_add: input shape " + shape_str(va.shape) +
                             " does not match plan " + shape_str(plan->in_shape));
  Tensor out(plan->out_shape);
  for (size_t i = 0; i < plan->dst.size(); ++i) {
    int64_t d = plan->dst[i];
    if (d >= 0) out.data[static_cast<size_t>(d)] += va.data[i];
  }
  int ia = a.id;
  return custom({a}, std::move(out), "scatter_add", [ia, plan](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    Tensor gi(plan->in_shape);
    for (size_t i = 0; i < plan->dst.size(); ++i) {
      int64_t d = plan->dst[i];
      gi.data[i] = d < 0 ? 0.0f : go.data[static_cast<size_t>(d)];
    }
    g.accum_grad(ia, gi);
  });
}

Var Graph::concat_ch(Var a, Var b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.ndim() != 4 || vb.ndim() != 4 || va.shape[0] != vb.shape[0] ||
      va.shape[2] != vb.shape[2] || va.shape[3] != vb.shape[3])
    throw std::runtime_error("concat_ch: incompatible shapes " + shape_str(va.shape) + " and " +
                             shape_str(vb.shape));
  int64_t n = va.shape[0], ca = va.shape[1], cb = vb.shape[1];
  int64_t hw = va.shape[2] * va.shape[3];
  Tensor out({n, ca + cb, va.shape[2], va.shape[3]});
  for (int64_t in = 0; in < n; ++in) {
    std::copy(va.ptr() + in * ca * hw, va.ptr() + (in + 1) * ca * hw,
              out.ptr() + in * (ca + cb) * hw);
    std::copy(vb.ptr() + in * cb * hw, vb.ptr() + (in + 1) * cb * hw,
              out.ptr() + in * (ca + cb) * hw + ca * hw);
  }
  int ia = a.id, ib = b.id;
  return custom({a, b}, std::move(out), "concat_ch",
                [ia, ib, n, ca, cb, hw](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    if (g.nodes_[static_cast<size_t>(ia)].needs_grad) {
      Tensor ga(g.nodes_[static_cast<size_t>(ia)].value.shape);
      for (int64_t in = 0; in < n; ++in)
        std::copy(go.ptr() + in * (ca + cb) * hw, go.ptr() + in * (ca + cb) * hw + ca * hw,
                  ga.ptr() + in * ca * hw);
      g.accum_grad(ia, ga);
    }
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) {
      Tensor gb(g.nodes_[static_cast<size_t>(ib)].value.shape);
      for (int64_t in = 0; in < n; ++in)
        std::copy(go.ptr() + in * (ca + cb) * hw + ca * hw,
                  go.ptr() + (in + 1) * (ca + cb) * hw, gb.ptr() + in * cb * hw);
      g.accum_grad(ib, gb);
    }
  });
}

Var Graph::sum_all(Var a) {
  const Tensor& va = node(a).value;
  double acc = 0.0;
  for (float v : va.data) acc += v;
  int ia = a.id;
  Shape s = va.shape;
  return custom({a}, Tensor::scalar(static_cast<float>(acc)), "sum_all",
                [ia, s](Graph& g, int self) {
    float go = g.nodes_[static_cast<size_t>(self)].grad.data[0];
    Tensor gi(s, go);
    g.accum_grad(ia, gi);
  });
}

// ---------------------------------------------------------------------------
// dense algebra
// ---------------------------------------------------------------------------

Var Graph::matmul(Var a, Var b) {
  Tensor out = linalg::matmul(node(a).value, node(b).value);
  int ia = a.id, ib = b.id;
  return custom({a, b}, std::move(out), "matmul", [ia, ib](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va = g.nodes_[static_cast<size_t>(ia)].value;
    const Tensor& vb = g.nodes_[static_cast<size_t>(ib)].value;
    if (g.nodes_[static_cast<size_t>(ia)].needs_grad)
      g.accum_grad(ia, linalg::matmul_nt(go, vb));  // dA = G * B^T
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad)
      g.accum_grad(ib, linalg::matmul_tn(va, go));  // dB = A^T * G
  });
}

namespace {

void check_bmm(const Tensor& a, const Tensor& b, bool nt) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.shape[0] != b.shape[0])
    throw std::runtime_error("bmm: expected matching 3-D batches, got " + shape_str(a.shape) +
                             " and " + shape_str(b.shape));
  int64_t ka = a.shape[2];
  int64_t kb = nt ? b.shape[2] : b.shape[1];
  if (ka != kb)
    throw std::runtime_error("bmm: contraction mismatch " + shape_str(a.shape) + " and " +
                             shape_str(b.shape));
}

Tensor slice_mat(const Tensor& t, int64_t batch) {
  int64_t m = t.shape[1], n = t.shape[2];
  Tensor s({m, n});
  std::copy(t.ptr() + batch * m * n, t.ptr() + (batch + 1) * m * n, s.ptr());
  return s;
}

void put_mat(Tensor& t, int64_t batch, const Tensor& s) {
  int64_t m = t.shape[1], n = t.shape[2];
  std::copy(s.ptr(), s.ptr() + m * n, t.ptr() + batch * m * n);
}

void add_mat(Tensor& t, int64_t batch, const Tensor& s) {
  int64_t m = t.shape[1], n = t.shape[2];
  float* dst = t.ptr() + batch * m * n;
  for (int64_t i = 0; i < m * n; ++i) dst[i] += s.data[static_cast<size_t>(i)];
}

}  // namespace

Var Graph::bmm(Var a, Var b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  check_bmm(va, vb, false);
  int64_t bs = va.shape[0];
  Tensor out({bs, va.shape[1], vb.shape[2]});
  for (int64_t i = 0; i < bs; ++i)
    put_mat(out, i, linalg::matmul(slice_mat(va, i), slice_mat(vb, i)));
  int ia = a.id, ib = b.id;
  return custom({a, b}, std::move(out), "bmm", [ia, ib, bs](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va2 = g.nodes_[static_cast<size_t>(ia)].value;
    const Tensor& vb2 = g.nodes_[static_cast<size_t>(ib)].value;
    if (g.nodes_[static_cast<size_t>(ia)].needs_grad) {
      Tensor ga(va2.shape);
      for (int64_t i = 0; i < bs; ++i)
        add_mat(ga, i, linalg::matmul_nt(slice_mat(go, i), slice_mat(vb2, i)));
      g.accum_grad(ia, ga);
    }
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) {
      Tensor gb(vb2.shape);
      for (int64_t i = 0; i < bs; ++i)
        add_mat(gb, i, linalg::matmul_tn(slice_mat(va2, i), slice_mat(go, i)));
      g.accum_grad(ib, gb);
    }
  });
}

Var Graph::bmm_nt(Var a, Var b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  check_bmm(va, vb, true);
  int64_t bs = va.shape[0];
  Tensor out({bs, va.shape[1], vb.shape[1]});
  for (int64_t i = 0; i < bs; ++i)
    put_mat(out, i, linalg::matmul_nt(slice_mat(va, i), slice_mat(vb, i)));
  int ia = a.id, ib = b.id;
  return custom({a, b}, std::move(out), "bmm_nt", [ia, ib, bs](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va2 = g.nodes_[static_cast<size_t>(ia)].value;
    const Tensor& vb2 = g.nodes_[static_cast<size_t>(ib)].value;
    // out = A * B^T: dA = G * B, dB = G^T * A.
    if (g.nodes_[static_cast<size_t>(ia)].needs_grad) {
      Tensor ga(va2.shape);
      for (int64_t i = 0; i < bs; ++i)
        add_mat(ga, i, linalg::matmul(slice_mat(go, i), slice_mat(vb2, i)));
      g.accum_grad(ia, ga);
    }
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) {
      Tensor gb(vb2.shape);
      for (int64_t i = 0; i < bs; ++i)
        add_mat(gb, i, linalg::matmul_tn(slice_mat(go, i), slice_mat(va2, i)));
      g.accum_grad(ib, gb);
    }
  });
}

// ---------------------------------------------------------------------------
// normalization / attention helpers
// ---------------------------------------------------------------------------

Var Graph::softmax_last(Var a, Tensor* capture) {
  const Tensor& va = node(a).value;
  if (va.ndim() < 1) throw std::runtime_error("softmax_last: rank-0 input");
  int64_t d = va.shape.back();
  int64_t rows = va.numel() / d;
  Tensor out(va.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const float* x = va.ptr() + r * d;
    float* y = out.ptr() + r * d;
    double mx = x[0];
    for (int64_t j = 1; j < d; ++j) mx = std::max(mx, static_cast<double>(x[j]));
    double sum = 0.0;
    for (int64_t j = 0; j < d; ++j) sum += std::exp(static_cast<double>(x[j]) - mx);
    for (int64_t j = 0; j < d; ++j)
      y[j] = static_cast<float>(std::exp(static_cast<double>(x[j]) - mx) / sum);
  }
  if (capture) *capture = out;
  int ia = a.id;
  Tensor saved = out;
  return custom({a}, std::move(out), "softmax", [ia, saved, rows, d](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    Tensor gi(saved.shape);
    for (int64_t r = 0; r < rows; ++r) {
      const float* y = saved.ptr() + r * d;
      const float* dy = go.ptr() + r * d;
      float* dx = gi.ptr() + r * d;
      double dot = 0.0;
      for (int64_t j = 0; j < d; ++j) dot += static_cast<double>(dy[j]) * y[j];
      for (int64_t j = 0; j < d; ++j)
        dx[j] = static_cast<float>(y[j] * (static_cast<double>(dy[j]) - dot));
    }
    g.accum_grad(ia, gi);
  });
}

Var Graph::layernorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& vx = node(x).value;
  const Tensor& vg = node(gamma).value;
  const Tensor& vb = node(beta).value;
  int64_t d = vx.shape.back();
  if (vg.numel() != d || vb.numel() != d)
    throw std::runtime_error("layernorm: affine parameters must have length of last dim");
  int64_t rows = vx.numel() / d;
  Tensor out(vx.shape);
  Tensor xhat(vx.shape);
  Tensor invstd({rows});
  for (int64_t r = 0; r < rows; ++r) {
    const float* p = vx.ptr() + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += p[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double c = p[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    invstd.data[static_cast<size_t>(r)] = static_cast<float>(inv);
    for (int64_t j = 0; j < d; ++j) {
      double xh = (p[j] - mean) * inv;
      xhat.data[static_cast<size_t>(r * d + j)] = static_cast<float>(xh);
      out.data[static_cast<size_t>(r * d + j)] =
          static_cast<float>(xh * vg.data[static_cast<size_t>(j)] + vb.data[static_cast<size_t>(j)]);
    }
  }
  int ix = x.id, ig = gamma.id, ib = beta.id;
  return custom({x, gamma, beta}, std::move(out), "layernorm",
                [ix, ig, ib, xhat, invstd, rows, d](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& vg = g.nodes_[static_cast<size_t>(ig)].value;
    if (g.nodes_[static_cast<size_t>(ig)].needs_grad) {
      Tensor gg({d});
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < d; ++j)
          gg.data[static_cast<size_t>(j)] += go.data[static_cast<size_t>(r * d + j)] *
                                             xhat.data[static_cast<size_t>(r * d + j)];
      g.accum_grad(ig, gg);
    }
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) {
      Tensor gb({d});
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < d; ++j)
          gb.data[static_cast<size_t>(j)] += go.data[static_cast<size_t>(r * d + j)];
      g.accum_grad(ib, gb);
    }
    if (g.nodes_[static_cast<size_t>(ix)].needs_grad) {
      Tensor gx(xhat.shape);
      for (int64_t r = 0; r < rows; ++r) {
        double sum_dyg = 0.0, sum_dyg_xh = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          double dyg = static_cast<double>(go.data[static_cast<size_t>(r * d + j)]) *
                       vg.data[static_cast<size_t>(j)];
          sum_dyg += dyg;
          sum_dyg_xh += dyg * xhat.data[static_cast<size_t>(r * d + j)];
        }
        double inv = invstd.data[static_cast<size_t>(r)];
        for (int64_t j = 0; j < d; ++j) {
          double dyg = static_cast<double>(go.data[static_cast<size_t>(r * d + j)]) *
                       vg.data[static_cast<size_t>(j)];
          double xh = xhat.data[static_cast<size_t>(r * d + j)];
          gx.data[static_cast<size_t>(r * d + j)] = static_cast<float>(
              inv / static_cast<double>(d) *
              (static_cast<double>(d) * dyg - sum_dyg - xh * sum_dyg_xh));
        }
      }
      g.accum_grad(ix, gx);
    }
  });
}

Var Graph::batchnorm2d(Var x, Var gamma, Var beta, BnState* state, bool training) {
  const Tensor& vx = node(x).value;
  if (vx.ndim() != 4) throw std::runtime_error("batchnorm2d: expected NCHW input");
  int64_t n = vx.shape[0], c = vx.shape[1], h = vx.shape[2], w = vx.shape[3];
  const Tensor& vg = node(gamma).value;
  const Tensor& vb = node(beta).value;
  if (vg.numel() != c || vb.numel() != c)
    throw std::runtime_error("batchnorm2d: affine parameters must have length C");
  if (state->running_mean.numel() != c) state->init(c);
  int64_t m = n * h * w;  // samples per channel
  Tensor out(vx.shape);
  Tensor xhat(vx.shape);
  std::vector<double> invstd(static_cast<size_t>(c));

  auto idx = [&](int64_t in, int64_t ic, int64_t s) { return (in * c + ic) * h * w + s; };

  if (training) {
    for (int64_t ic = 0; ic < c; ++ic) {
      double mean = 0.0;
      for (int64_t in = 0; in < n; ++in) {
        const float* p = vx.ptr() + idx(in, ic, 0);
        for (int64_t s = 0; s < h * w; ++s) mean += p[s];
      }
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (int64_t in = 0; in < n; ++in) {
        const float* p = vx.ptr() + idx(in, ic, 0);
        for (int64_t s = 0; s < h * w; ++s) {
          double d0 = p[s] - mean;
          var += d0 * d0;
        }
      }
      var /= static_cast<double>(m);
      double inv = 1.0 / std::sqrt(var + state->eps);
      invstd[static_cast<size_t>(ic)] = inv;
      double gam = vg.data[static_cast<size_t>(ic)], bet = vb.data[static_cast<size_t>(ic)];
      for (int64_t in = 0; in < n; ++in) {
        for (int64_t s = 0; s < h * w; ++s) {
          double xh = (vx.data[static_cast<size_t>(idx(in, ic, s))] - mean) * inv;
          xhat.data[static_cast<size_t>(idx(in, ic, s))] = static_cast<float>(xh);
          out.data[static_cast<size_t>(idx(in, ic, s))] = static_cast<float>(xh * gam + bet);
        }
      }
      // Running statistics use the unbiased variance.
      double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      auto& rm = state->running_mean.data[static_cast<size_t>(ic)];
      auto& rv = state->running_var.data[static_cast<size_t>(ic)];
      rm = static_cast<float>((1.0 - state->momentum) * rm + state->momentum * mean);
      rv = static_cast<float>((1.0 - state->momentum) * rv + state->momentum * unbiased);
    }
  } else {
    for (int64_t ic = 0; ic < c; ++ic) {
      double mean = state->running_mean.data[static_cast<size_t>(ic)];
      double var = state->running_var.data[static_cast<size_t>(ic)];
      double inv = 1.0 / std::sqrt(var + state->eps);
      invstd[static_cast<size_t>(ic)] = inv;
      double gam = vg.data[static_cast<size_t>(ic)], bet = vb.data[static_cast<size_t>(ic)];
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < h * w; ++s) {
          double xh = (vx.data[static_cast<size_t>(idx(in, ic, s))] - mean) * inv;
          xhat.data[static_cast<size_t>(idx(in, ic, s))] = static_cast<float>(xh);
          out.data[static_cast<size_t>(idx(in, ic, s))] = static_cast<float>(xh * gam + bet);
        }
    }
  }

  int ix = x.id, ig = gamma.id, ib = beta.id;
  return custom({x, gamma, beta}, std::move(out), "batchnorm2d",
                [ix, ig, ib, xhat, invstd, n, c, h, w, m, training](Graph& g, int self) {
    const Tensor& go = g.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& vg = g.nodes_[static_cast<size_t>(ig)].value;
    auto idx = [&](int64_t in, int64_t ic, int64_t s) { return (in * c + ic) * h * w + s; };
    Tensor gg({c}), gb({c});
    for (int64_t ic = 0; ic < c; ++ic) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < h * w; ++s) {
          double dy = go.data[static_cast<size_t>(idx(in, ic, s))];
          sum_dy += dy;
          sum_dy_xh += dy * xhat.data[static_cast<size_t>(idx(in, ic, s))];
        }
      gg.data[static_cast<size_t>(ic)] = static_cast<float>(sum_dy_xh);
      gb.data[static_cast<size_t>(ic)] = static_cast<float>(sum_dy);
      if (g.nodes_[static_cast<size_t>(ix)].needs_grad) {
        double gam = vg.data[static_cast<size_t>(ic)];
        double inv = invstd[static_cast<size_t>(ic)];
        g.ensure_grad(ix);
        Tensor& gx = g.nodes_[static_cast<size_t>(ix)].grad;
        for (int64_t in = 0; in < n; ++in)
          for (int64_t s = 0; s < h * w; ++s) {
            double dy = go.data[static_cast<size_t>(idx(in, ic, s))];
            double xh = xhat.data[static_cast<size_t>(idx(in, ic, s))];
            double v;
            if (training) {
              v = gam * inv / static_cast<double>(m) *
                  (static_cast<double>(m) * dy - sum_dy - xh * sum_dy_xh);
            } else {
              v = gam * inv * dy;
            }
            gx.data[static_cast<size_t>(idx(in, ic, s))] += static_cast<float>(v);
          }
      }
    }
    if (g.nodes_[static_cast<size_t>(ig)].needs_grad) g.accum_grad(ig, gg);
    if (g.nodes_[static_cast<size_t>(ib)].needs_grad) g.accum_grad(ib, gb);
  });
}

}  // namespace fp4lab::ad
