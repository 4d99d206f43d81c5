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
#include <string>
#include <vector>

namespace fp4lab::train {

struct RunSummary {
  std::string arch, tier, recipe;
  uint64_t seed = 0;
  int fold = -1;
  double auprc = 0.0;
};

struct NormalizedRow {
  std::string arch, tier, recipe;
  std::vector<double> percents;  // one per seed, 100 * recipe / baseline
  double mean = 0.0;
  double ci95 = 0.0;  // half-width, Student-t over seeds
};

/// Normalizes every run's AUPRC to the baseline recipe of the same
/// (arch, tier, seed); throws std::runtime_error("missing baseline ...")
/// when a group lacks its baseline run.
std::vector<NormalizedRow> normalize_to_baseline(const std::vector<RunSummary>& runs,
                                                 const std::string& baseline_recipe);

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
  double stddev = 0.0;
  int n = 0;
};

/// Mean with a 95% Student-t confidence half-width (n-1 dof).
MeanCi mean_ci95(const std::vector<double>& xs);

/// Two-sided 97.5% Student-t quantile for `dof` degrees of freedom.
double t_quantile_975(int dof);

}  // namespace fp4lab::train
