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

#include "fp4lab/train/aggregate.hpp"
#include "fp4lab/train/runner.hpp"

namespace fp4lab::train {

/// A grid of runs: the cartesian product of architectures, tiers, recipes
/// and seeds over one data/training configuration.
struct ExperimentSpec {
  std::vector<std::string> archs = {"cnn"};
  std::vector<std::string> tiers = {"25k"};
  std::vector<std::string> recipes = {"baseline-bf16"};
  std::vector<uint64_t> seeds = {1};
  data::DataConfig data;
  TrainConfig train;
  bool literal_scaling = false;
  std::string out_dir = "out";

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&);
};

nlohmann::ordered_json experiment_spec_to_json(const ExperimentSpec& s);
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

/// Deterministic enumeration order: arch, tier, recipe, seed (folds
/// innermost when `folds` > 0).
std::vector<RunSpec> enumerate_runs(const ExperimentSpec& spec, int folds = 0);

struct SweepResult {
  int executed = 0;
  int skipped = 0;  // records already present (resume)
  bool all_conformant = true;
  std::vector<RunSummary> summaries;
};

/// Executes the grid with `jobs` worker threads. Each run's artifacts land
/// in <out_dir>/<run_name>/ and a run is skipped when its record.json is
/// already present and parseable (crash-safe resume). Writes report.json and
/// summary.csv at the end.
SweepResult run_sweep(const ExperimentSpec& spec, int jobs);

/// k-fold patient-level cross-validation over the same grid; writes
/// per-fold records plus cv_summary.json (mean +- std over folds).
SweepResult run_cv(const ExperimentSpec& spec, int folds, int jobs);

/// Scans a directory tree for record.json files.
std::vector<RunRecord> load_records(const std::string& dir);

}  // namespace fp4lab::train
