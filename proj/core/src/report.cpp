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

#include "fp4lab/report/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "fp4lab/report/svg.hpp"
#include "fp4lab/train/sweep.hpp"

namespace fp4lab::report {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using train::RunRecord;

namespace {

std::string csv_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_prc_curves(const std::vector<RunRecord>& recs, const fs::path& out) {
  SvgCanvas c(560, 420);
  AxisFrame fr{60, 20, 540, 360, 0.0, 1.0, 0.0, 1.0};
  fr.draw(c, "recall", "precision");
  for (size_t i = 0; i < recs.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (auto [r, p] : recs[i].prc) pts.emplace_back(fr.map_x(r), fr.map_y(p));
    if (!pts.empty()) c.polyline(pts, palette(i));
    c.text(60, 380 + 0, "", 9.0);
  }
  // Legend.
  double ly = 30;
  for (size_t i = 0; i < recs.size() && i < 12; ++i) {
    c.rect(440, ly - 8, 10, 10, palette(i));
    c.text(454, ly, recs[i].spec.run_name(), 9.0);
    ly += 14;
  }
  std::ofstream f(out);
  f << c.finish();
}

void write_pred_hist(const std::vector<RunRecord>& recs, const fs::path& out) {
  SvgCanvas c(560, 420);
  double ymax = 0.0;
  for (const auto& r : recs)
    for (double m : r.histogram) ymax = std::max(ymax, m);
  if (ymax == 0.0) ymax = 1.0;
  AxisFrame fr{60, 20, 540, 360, 0.0, 1.0, 0.0, ymax};
  fr.draw(c, "predicted probability", "mass");
  for (size_t i = 0; i < recs.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (size_t b = 0; b < recs[i].histogram.size(); ++b)
      pts.emplace_back(fr.map_x((static_cast<double>(b) + 0.5) / 101.0),
                       fr.map_y(recs[i].histogram[b]));
    c.polyline(pts, palette(i), 1.0);
  }
  double ly = 30;
  for (size_t i = 0; i < recs.size() && i < 12; ++i) {
    c.rect(440, ly - 8, 10, 10, palette(i));
    c.text(454, ly, recs[i].spec.run_name(), 9.0);
    ly += 14;
  }
  std::ofstream f(out);
  f << c.finish();
}

void write_norm_bars(const std::vector<train::NormalizedRow>& rows, const fs::path& out) {
  SvgCanvas c(640, 420);
  double ymin = 50.0, ymax = 110.0;
  for (const auto& r : rows)
    for (double p : r.percents) {
      ymin = std::min(ymin, p - 5.0);
      ymax = std::max(ymax, p + 5.0);
    }
  AxisFrame fr{70, 20, 620, 340, 0.0, static_cast<double>(std::max<size_t>(rows.size(), 1)),
               ymin, ymax};
  fr.draw(c, "", "AUPRC, % of baseline");
  double line100 = fr.map_y(100.0);
  c.line(fr.px0, line100, fr.px1, line100, "#999999", 0.8);
  for (size_t i = 0; i < rows.size(); ++i) {
    double x0 = fr.map_x(static_cast<double>(i) + 0.15);
    double x1 = fr.map_x(static_cast<double>(i) + 0.85);
    double base = fr.map_y(std::max(ymin, 0.0));
    double top = fr.map_y(rows[i].mean);
    c.rect(x0, std::min(top, base), x1 - x0, std::fabs(base - top), palette(i));
    for (double p : rows[i].percents)
      c.circle((x0 + x1) / 2, fr.map_y(p), 2.5, "#333333");
    c.text((x0 + x1) / 2, 360, rows[i].arch + "/" + rows[i].tier, 8.0, "middle");
    c.text((x0 + x1) / 2, 372, rows[i].recipe, 8.0, "middle");
  }
  std::ofstream f(out);
  f << c.finish();
}

void write_auprc_vs_tier(const std::vector<RunRecord>& recs, const fs::path& out) {
  // Mean AUPRC per (arch, recipe) across the tier order.
  const std::vector<std::string> tiers = {"25k", "100k", "400k", "fragile"};
  std::map<std::string, std::map<std::string, std::vector<double>>> series;
  for (const auto& r : recs)
    series[r.spec.arch + " " + r.spec.recipe][r.spec.tier].push_back(r.test_auprc);
  SvgCanvas c(560, 420);
  AxisFrame fr{60, 20, 540, 360, 0.0, static_cast<double>(tiers.size() - 1), 0.0, 1.0};
  fr.draw(c, "tier index (25k,100k,400k,fragile)", "test AUPRC");
  size_t idx = 0;
  double ly = 30;
  for (const auto& [name, by_tier] : series) {
    std::vector<std::pair<double, double>> pts;
    for (size_t t = 0; t < tiers.size(); ++t) {
      auto it = by_tier.find(tiers[t]);
      if (it == by_tier.end()) continue;
      double mean = 0.0;
      for (double v : it->second) mean += v;
      mean /= static_cast<double>(it->second.size());
      pts.emplace_back(fr.map_x(static_cast<double>(t)), fr.map_y(mean));
    }
    if (pts.size() >= 1) {
      c.polyline(pts, palette(idx));
      for (auto [x, y] : pts) c.circle(x, y, 2.5, palette(idx));
      c.rect(400, ly - 8, 10, 10, palette(idx));
      c.text(414, ly, name, 9.0);
      ly += 14;
    }
    ++idx;
  }
  std::ofstream f(out);
  f << c.finish();
}

}  // namespace

void generate_report(const std::string& records_dir, const std::string& out_dir) {
  auto recs = train::load_records(records_dir);
  if (recs.empty()) throw std::runtime_error("no record.json found under " + records_dir);
  std::sort(recs.begin(), recs.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.spec.run_name() < b.spec.run_name();
  });
  fs::create_directories(out_dir);

  {
    std::ofstream f(fs::path(out_dir) / "summary.csv");
    f << "arch,tier,recipe,seed,fold,test_auprc,test_auprc_per_image,spikiness,"
         "attn_mean_entropy,attn_near_binary_fraction,best_epoch,stopped_epoch,"
         "conformance_pass,param_count\n";
    for (const auto& r : recs) {
      f << r.spec.arch << "," << r.spec.tier << "," << r.spec.recipe << "," << r.spec.seed << ","
        << r.spec.fold << "," << csv_num(r.test_auprc) << "," << csv_num(r.test_auprc_per_image)
        << "," << csv_num(r.spikiness) << ","
        << csv_num(r.has_attention ? r.attention.mean_entropy : 0.0) << ","
        << csv_num(r.has_attention ? r.attention.near_binary_fraction : 0.0) << ","
        << r.best_epoch << "," << r.stopped_epoch << "," << (r.conformance_pass ? 1 : 0) << ","
        << r.param_count << "\n";
    }
  }

  std::vector<train::RunSummary> sums;
  bool has_baseline = false;
  for (const auto& r : recs) {
    train::RunSummary s;
    s.arch = r.spec.arch;
    s.tier = r.spec.tier;
    s.recipe = r.spec.recipe;
    s.seed = r.spec.seed;
    s.fold = r.spec.fold;
    s.auprc = r.test_auprc;
    sums.push_back(s);
    has_baseline |= r.spec.recipe == "baseline-bf16";
  }

  ordered_json rep;
  rep["runs"] = recs.size();
  rep["flags"] = ordered_json::array();
  std::vector<train::NormalizedRow> rows;
  bool only_baseline = true;
  for (const auto& s : sums) only_baseline &= s.recipe == "baseline-bf16";
  if (has_baseline && !only_baseline) {
    rows = train::normalize_to_baseline(sums, "baseline-bf16");
    ordered_json nj = ordered_json::array();
    for (const auto& row : rows) {
      nj.push_back({{"arch", row.arch},
                    {"tier", row.tier},
                    {"recipe", row.recipe},
                    {"mean_percent", row.mean},
                    {"ci95", row.ci95},
                    {"per_seed_percent", row.percents}});
      if (row.mean < 90.0)
        rep["flags"].push_back("normalized AUPRC of " + row.arch + "/" + row.tier + "/" +
                               row.recipe + " below 90% of baseline: needs investigation");
    }
    rep["normalized_auprc"] = nj;
  } else {
    rep["normalized_auprc"] = nullptr;
  }
  for (const auto& r : recs)
    if (!r.conformance_pass)
      rep["flags"].push_back("recipe conformance failed for " + r.spec.run_name());
  {
    std::ofstream f(fs::path(out_dir) / "report.json");
    f << rep.dump(2) << "\n";
  }

  write_prc_curves(recs, fs::path(out_dir) / "prc_curves.svg");
  write_pred_hist(recs, fs::path(out_dir) / "pred_hist.svg");
  if (!rows.empty()) write_norm_bars(rows, fs::path(out_dir) / "norm_auprc.svg");
  write_auprc_vs_tier(recs, fs::path(out_dir) / "auprc_vs_tier.svg");
}

}  // namespace fp4lab::report
