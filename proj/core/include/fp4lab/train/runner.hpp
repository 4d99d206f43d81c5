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

#include <array>
#include <json.hpp>
#include <string>
#include <vector>

#include "fp4lab/data/dataset.hpp"
#include "fp4lab/models/model.hpp"
#include "fp4lab/train/loss.hpp"
#include "fp4lab/train/metrics.hpp"

namespace fp4lab::train {

struct TrainConfig {
  int64_t epochs = 100;
  int64_t batch = 16;
  std::string optimizer = "auto";  // auto | adamax | adamw
  double lr = 0.0;                 // 0: architecture preset
  double weight_decay = -1.0;      // negative: architecture preset
  double plateau_factor = 0.5;
  int64_t plateau_patience = 10;
  int64_t stop_patience = 20;
  int64_t stop_warmup = 40;
  LossConfig loss;
};

struct RunSpec {
  std::string arch = "cnn";
  std::string tier = "25k";
  std::string recipe = "baseline-bf16";
  uint64_t seed = 1;
  data::DataConfig data;
  TrainConfig train;
  bool literal_scaling = false;
  int fold = -1;  // >= 0 selects a cross-validation fold
  int kfolds = 5;
  std::string out_dir;  // when set, the checkpoint is written beneath it

  std::string run_name() const;
  friend bool operator==(const RunSpec&, const RunSpec&);
};

struct EpochStat {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct RunRecord {
  RunSpec spec;
  std::vector<EpochStat> epochs;
  int64_t stopped_epoch = 0;  // last epoch that executed
  int64_t best_epoch = 0;
  double best_val_loss = 0.0;
  double test_auprc = 0.0;
  double test_auprc_per_image = 0.0;  // mean over images with both classes
  int64_t param_count = 0;
  double realized_positive_rate = 0.0;
  std::vector<std::pair<double, double>> prc;  // (recall, precision)
  std::array<double, 101> histogram{};
  double spikiness = 0.0;
  bool has_attention = false;
  models::AttentionStats attention;
  bool conformance_pass = true;
  int64_t fp4_events = 0;
  int64_t high_events = 0;
  std::string checkpoint;  // relative path under the run dir, when written
  double wall_seconds = 0.0;
};

/// Full training protocol: augmented mini-batches, plateau LR halving,
/// early stopping with warmup, best-validation checkpointing, and held-out
/// test evaluation (pooled-pixel average precision, per-image mean, PRC
/// points, prediction histogram, attention statistics for transformers).
/// One recipe-conformance probe step runs on a throwaway model copy before
/// training. Bitwise deterministic in the spec.
RunRecord train_run(const RunSpec& spec);

nlohmann::ordered_json run_spec_to_json(const RunSpec& s);
RunSpec run_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Writes record.json, prc.csv, hist.csv and epochs.jsonl into `dir`.
void write_run_artifacts(const std::string& dir, const RunRecord& r);
RunRecord load_run_record(const std::string& record_json_path);

}  // namespace fp4lab::train
