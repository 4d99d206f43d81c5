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

#include "fp4lab/train/sweep.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "fp4lab/report/report.hpp"

namespace fp4lab::train {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

bool operator==(const ExperimentSpec& a, const ExperimentSpec& b) {
  return experiment_spec_to_json(a) == experiment_spec_to_json(b);
}

ordered_json experiment_spec_to_json(const ExperimentSpec& s) {
  RunSpec probe;
  probe.data = s.data;
  probe.train = s.train;
  ordered_json base = run_spec_to_json(probe);
  ordered_json j;
  j["archs"] = s.archs;
  j["tiers"] = s.tiers;
  j["recipes"] = s.recipes;
  j["seeds"] = s.seeds;
  j["data"] = base["data"];
  j["train"] = base["train"];
  j["literal_scaling"] = s.literal_scaling;
  j["out_dir"] = s.out_dir;
  return j;
}

ExperimentSpec experiment_spec_from_json(const json& j) {
  ExperimentSpec s;
  if (j.contains("archs")) s.archs = j["archs"].get<std::vector<std::string>>();
  if (j.contains("tiers")) s.tiers = j["tiers"].get<std::vector<std::string>>();
  if (j.contains("recipes")) s.recipes = j["recipes"].get<std::vector<std::string>>();
  if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<uint64_t>>();
  json wrapper;
  if (j.contains("data")) wrapper["data"] = j["data"];
  if (j.contains("train")) wrapper["train"] = j["train"];
  RunSpec probe = run_spec_from_json(wrapper);
  s.data = probe.data;
  s.train = probe.train;
  s.literal_scaling = j.value("literal_scaling", false);
  s.out_dir = j.value("out_dir", "out");
  return s;
}

std::vector<RunSpec> enumerate_runs(const ExperimentSpec& spec, int folds) {
  std::vector<RunSpec> out;
  for (const auto& arch : spec.archs)
    for (const auto& tier : spec.tiers)
      for (const auto& recipe : spec.recipes)
        for (uint64_t seed : spec.seeds) {
          RunSpec r;
          r.arch = arch;
          r.tier = tier;
          r.recipe = recipe;
          r.seed = seed;
          r.data = spec.data;
          r.train = spec.train;
          r.literal_scaling = spec.literal_scaling;
          if (folds > 0) {
            r.kfolds = folds;
            for (int f = 0; f < folds; ++f) {
              r.fold = f;
              r.out_dir = (fs::path(spec.out_dir) / r.run_name()).string();
              out.push_back(r);
            }
          } else {
            r.out_dir = (fs::path(spec.out_dir) / r.run_name()).string();
            out.push_back(r);
          }
        }
  return out;
}

namespace {

// A run is complete when its record parses and was produced by the same spec.
bool has_valid_record(const RunSpec& spec) {
  fs::path rec = fs::path(spec.out_dir) / "record.json";
  if (!fs::exists(rec)) return false;
  try {
    RunRecord r = load_run_record(rec.string());
    RunSpec stored = r.spec;
    stored.out_dir = spec.out_dir;
    return stored == spec;
  } catch (...) {
    return false;
  }
}

void write_record_atomically(const RunSpec& spec, const RunRecord& rec) {
  write_run_artifacts(spec.out_dir, rec);
}

SweepResult execute_grid(const std::vector<RunSpec>& runs, int jobs) {
  SweepResult result;
  std::atomic<size_t> next{0};
  std::atomic<int> executed{0}, skipped{0};
  std::atomic<bool> conformant{true};
  std::mutex mu;
  std::vector<RunSummary> summaries;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const RunSpec& spec = runs[i];
      try {
        RunRecord rec;
        if (has_valid_record(spec)) {
          rec = load_run_record((fs::path(spec.out_dir) / "record.json").string());
          skipped.fetch_add(1);
        } else {
          rec = train_run(spec);
          write_record_atomically(spec, rec);
          executed.fetch_add(1);
        }
        if (!rec.conformance_pass) conformant.store(false);
        RunSummary s;
        s.arch = spec.arch;
        s.tier = spec.tier;
        s.recipe = spec.recipe;
        s.seed = spec.seed;
        s.fold = spec.fold;
        s.auprc = rec.test_auprc;
        std::lock_guard<std::mutex> lock(mu);
        summaries.push_back(s);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int nthreads = std::max(1, jobs);
  std::vector<std::thread> threads;
  for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  result.executed = executed.load();
  result.skipped = skipped.load();
  result.all_conformant = conformant.load();
  result.summaries = std::move(summaries);
  return result;
}

}  // namespace

SweepResult run_sweep(const ExperimentSpec& spec, int jobs) {
  auto runs = enumerate_runs(spec, 0);
  auto result = execute_grid(runs, jobs);
  report::generate_report(spec.out_dir, spec.out_dir);
  return result;
}

SweepResult run_cv(const ExperimentSpec& spec, int folds, int jobs) {
  auto runs = enumerate_runs(spec, folds);
  auto result = execute_grid(runs, jobs);

  // Per (arch, tier, recipe): mean +- std of test AUPRC over folds.
  std::map<std::string, std::vector<double>> groups;
  for (const auto& s : result.summaries)
    groups[s.arch + "|" + s.tier + "|" + s.recipe].push_back(s.auprc);
  ordered_json summary = ordered_json::array();
  for (auto& [key, vals] : groups) {
    std::sort(vals.begin(), vals.end());
    auto mc = mean_ci95(vals);
    auto bar = key.find('|');
    auto bar2 = key.find('|', bar + 1);
    summary.push_back({{"arch", key.substr(0, bar)},
                       {"tier", key.substr(bar + 1, bar2 - bar - 1)},
                       {"recipe", key.substr(bar2 + 1)},
                       {"folds", vals.size()},
                       {"mean_auprc", mc.mean},
                       {"std_auprc", mc.stddev},
                       {"per_fold", vals}});
  }
  fs::create_directories(spec.out_dir);
  std::ofstream f(fs::path(spec.out_dir) / "cv_summary.json");
  f << summary.dump(2) << "\n";
  report::generate_report(spec.out_dir, spec.out_dir);
  return result;
}

std::vector<RunRecord> load_records(const std::string& dir) {
  std::vector<RunRecord> out;
  if (!fs::exists(dir)) return out;
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "record.json") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) out.push_back(load_run_record(p.string()));
  return out;
}

}  // namespace fp4lab::train
