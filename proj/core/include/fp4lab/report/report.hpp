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

#include <string>

namespace fp4lab::report {

/// Reads every record.json under `records_dir` and writes into `out_dir`:
///   summary.csv       one row per run
///   report.json       normalized-AUPRC table (when baselines exist) + flags
///   prc_curves.svg    PRC curves, one per run
///   pred_hist.svg     prediction-probability histograms
///   norm_auprc.svg    normalized-AUPRC bars with per-seed dots
///   auprc_vs_tier.svg AUPRC against model tier per (arch, recipe)
/// Output bytes are a pure function of the records. Throws on an empty dir.
void generate_report(const std::string& records_dir, const std::string& out_dir);

}  // namespace fp4lab::report
