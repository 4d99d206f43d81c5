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

#include "fp4lab/train/aggregate.hpp"

#include <cmath>
#include <stdexcept>

namespace fp4lab::train {

double t_quantile_975(int dof) {
  static const double table[30] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                   2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                   2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                   2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof <= 0) return 0.0;
  if (dof <= 30) return table[dof - 1];
  return 1.960;
}

MeanCi mean_ci95(const std::vector<double>& xs) {
  MeanCi m;
  m.n = static_cast<int>(xs.size());
  if (m.n == 0) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / m.n;
  if (m.n == 1) return m;
  double sq = 0.0;
  for (double x : xs) sq += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(sq / (m.n - 1));
  m.ci95 = t_quantile_975(m.n - 1) * m.stddev / std::sqrt(static_cast<double>(m.n));
  return m;
}

std::vector<NormalizedRow> normalize_to_baseline(const std::vector<RunSummary>& runs,
                                                 const std::string& baseline_recipe) {
  // Baselines keyed by (arch, tier, seed, fold).
  std::map<std::string, double> baselines;
  auto key = [](const RunSummary& r) {
    return r.arch + "|" + r.tier + "|" + std::to_string(r.seed) + "|" + std::to_string(r.fold);
  };
  for (const auto& r : runs)
    if (r.recipe == baseline_recipe) baselines[key(r)] = r.auprc;

  std::map<std::string, NormalizedRow> rows;
  for (const auto& r : runs) {
    if (r.recipe == baseline_recipe) continue;
    auto it = baselines.find(key(r));
    if (it == baselines.end())
      throw std::runtime_error("missing baseline for " + r.arch + "/" + r.tier + " seed " +
                               std::to_string(r.seed));
    if (it->second <= 0.0)
      throw std::runtime_error("baseline AUPRC is zero for " + r.arch + "/" + r.tier);
    auto& row = rows[r.arch + "|" + r.tier + "|" + r.recipe];
    row.arch = r.arch;
    row.tier = r.tier;
    row.recipe = r.recipe;
    row.percents.push_back(100.0 * r.auprc / it->second);
  }
  std::vector<NormalizedRow> out;
  for (auto& [k, row] : rows) {
    auto mc = mean_ci95(row.percents);
    row.mean = mc.mean;
    row.ci95 = mc.ci95;
    out.push_back(row);
  }
  return out;
}

}  // namespace fp4lab::train
