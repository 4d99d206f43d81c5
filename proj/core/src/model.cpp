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

#include "fp4lab/models/model.hpp"

#include <cmath>
#include <stdexcept>

namespace fp4lab::models {

Arch arch_from_name(const std::string& name) {
  if (name == "cnn") return Arch::kCnn;
  if (name == "vit") return Arch::kVit;
  if (name == "swin") return Arch::kSwin;
  throw std::invalid_argument("unknown architecture '" + name + "' (valid: cnn, vit, swin)");
}

const char* to_string(Arch a) {
  switch (a) {
    case Arch::kCnn: return "cnn";
    case Arch::kVit: return "vit";
    case Arch::kSwin: return "swin";
  }
  return "?";
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

int64_t Model::param_count(bool trainable_only) const {
  int64_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p->trainable) n += p->value.numel();
  return n;
}

void Model::pull_grads(ad::Graph& g) {
  for (auto& [p, v] : bindings_) {
    if (!p->trainable) continue;
    p->grad = g.node(v).grad_alloc ? g.grad(v) : Tensor(p->value.shape);
  }
}

void Model::set_event_sink(qat::EventLog* sink) {
  for (auto& q : qlayers_) q->events = sink;
}

std::vector<qat::QLinearLayer*> Model::quant_layers() {
  std::vector<qat::QLinearLayer*> out;
  for (auto& q : qlayers_) out.push_back(q.get());
  return out;
}

Parameter* Model::add_param(std::string name, Tensor init, bool trainable) {
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(init);
  p->grad = Tensor(p->value.shape);
  p->trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back().get();
}

qat::QLinearLayer* Model::add_qlayer(std::string name, bool quantize_enabled) {
  auto q = std::make_unique<qat::QLinearLayer>(std::move(name), recipe_,
                                               RngStream::derive(seed_, next_layer_salt_++));
  q->enabled = quantize_enabled;
  qlayers_.push_back(std::move(q));
  return qlayers_.back().get();
}

ad::Var Model::bind(ad::Graph& g, Parameter* p) {
  for (auto& [bp, bv] : bindings_)
    if (bp == p) return bv;
  ad::Var v = g.leaf(p->value, p->trainable);
  bindings_.emplace_back(p, v);
  return v;
}

void Model::begin_forward() {
  bindings_.clear();
  attention_probs.clear();
}

AttentionStats attention_stats(Model& m, const Tensor& batch) {
  if (m.arch() == Arch::kCnn)
    throw std::invalid_argument("attention stats are undefined for the CNN");
  bool prev = m.capture_attention;
  m.capture_attention = true;
  ad::Graph g;
  m.forward(g, batch, /*training=*/false);
  m.capture_attention = prev;

  AttentionStats s;
  double ent_sum = 0.0, max_sum = 0.0;
  int64_t rows_total = 0, near_binary = 0;
  for (const Tensor& probs : m.attention_probs) {
    int64_t d = probs.shape.back();
    int64_t rows = probs.numel() / d;
    double layer_ent = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
      const float* p = probs.ptr() + r * d;
      double ent = 0.0, mx = 0.0;
      for (int64_t j = 0; j < d; ++j) {
        double q = p[j];
        if (q > 0.0) ent -= q * std::log(q);
        mx = std::max(mx, q);
      }
      layer_ent += ent;
      ent_sum += ent;
      max_sum += mx;
      if (mx > 0.99) ++near_binary;
    }
    rows_total += rows;
    s.per_layer_entropy.push_back(rows ? layer_ent / static_cast<double>(rows) : 0.0);
  }
  if (rows_total) {
    s.mean_entropy = ent_sum / static_cast<double>(rows_total);
    s.mean_max_weight = max_sum / static_cast<double>(rows_total);
    s.near_binary_fraction = static_cast<double>(near_binary) / static_cast<double>(rows_total);
  }
  return s;
}

}  // namespace fp4lab::models
