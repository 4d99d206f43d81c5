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

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fp4lab/graph.hpp"
#include "fp4lab/qat/qlinear.hpp"

namespace fp4lab::models {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;  // false: persistent buffer (e.g. BN running stats)
};

enum class Arch { kCnn, kVit, kSwin };
Arch arch_from_name(const std::string& name);
const char* to_string(Arch a);

/// Architecture hyper-parameters for one (arch, tier). Transformer fields
/// are ignored for the CNN and vice versa.
struct ModelConfig {
  Arch arch = Arch::kCnn;
  std::string tier = "25k";
  int64_t image = 32;
  int64_t in_ch = 3;
  std::vector<int64_t> widths;  // CNN stage widths (multiples of 16)
  int64_t patch = 4;
  int64_t dim = 32;
  int64_t depth = 2;
  int64_t heads = 1;
  int64_t window = 4;
  int64_t head_dim() const { return dim / heads; }
};

/// Segmentation model: forward maps [N,3,H,W] images to [N,1,H,W] logits.
/// Parameters persist across steps; a fresh Graph is built per call.
class Model {
 public:
  virtual ~Model() = default;
  virtual ad::Var forward(ad::Graph& g, const Tensor& images, bool training) = 0;
  Arch arch() const { return cfg_.arch; }
  const ModelConfig& config() const { return cfg_; }
  const qat::RecipeConfig& recipe() const { return recipe_; }

  std::vector<Parameter*> parameters();
  int64_t param_count(bool trainable_only = true) const;
  void pull_grads(ad::Graph& g);
  void set_event_sink(qat::EventLog* sink);
  std::vector<qat::QLinearLayer*> quant_layers();

  /// Softmax outputs of each attention layer from the most recent forward,
  /// captured when capture_attention is set (transformers only).
  bool capture_attention = false;
  std::vector<Tensor> attention_probs;

 protected:
  Parameter* add_param(std::string name, Tensor init, bool trainable = true);
  qat::QLinearLayer* add_qlayer(std::string name, bool quantize_enabled);
  ad::Var bind(ad::Graph& g, Parameter* p);
  void begin_forward();

  ModelConfig cfg_;
  qat::RecipeConfig recipe_;
  uint64_t seed_ = 0;
  uint64_t next_layer_salt_ = 1;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::vector<std::unique_ptr<qat::QLinearLayer>> qlayers_;
  std::vector<std::pair<Parameter*, ad::Var>> bindings_;
  std::map<std::string, ad::GatherPlanPtr> gather_cache_;
  std::map<std::string, ad::ScatterPlanPtr> scatter_cache_;

  friend struct LayerOps;
};

/// Named tiers per architecture; "fragile" exists for the Swin only (head
/// dim 16, the capacity point where attention is most quantization-exposed).
const std::vector<std::string>& tier_names();
ModelConfig model_config(Arch arch, const std::string& tier);
std::unique_ptr<Model> build_model(const ModelConfig& cfg, const qat::RecipeConfig& recipe,
                                   uint64_t seed);

struct AttentionStats {
  double mean_entropy = 0.0;        // nats, over all rows of all layers
  double mean_max_weight = 0.0;
  double near_binary_fraction = 0.0;  // rows whose max weight exceeds 0.99
  std::vector<double> per_layer_entropy;
};

/// Runs one eval-mode forward with capture enabled and summarizes the
/// attention rows. Throws std::invalid_argument for the CNN.
AttentionStats attention_stats(Model& m, const Tensor& batch);

}  // namespace fp4lab::models
