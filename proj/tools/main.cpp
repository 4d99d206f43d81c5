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

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "fp4lab/io/tensor_file.hpp"
#include "fp4lab/qat/qlinear.hpp"
#include "fp4lab/report/report.hpp"
#include "fp4lab/rht.hpp"
#include "fp4lab/train/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace fp4lab;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open spec file " + path);
  return json::parse(f);
}

int cmd_run(const std::string& spec_path, const std::string& out, int64_t seed_override,
            bool literal) {
  train::RunSpec spec = train::run_spec_from_json(load_json(spec_path));
  if (seed_override >= 0) spec.seed = static_cast<uint64_t>(seed_override);
  if (literal) spec.literal_scaling = true;
  std::string base = out.empty() ? "out" : out;
  spec.out_dir = (fs::path(base) / spec.run_name()).string();
  train::RunRecord rec = train::train_run(spec);
  train::write_run_artifacts(spec.out_dir, rec);
  std::printf("%s: test AUPRC %.4f (best epoch %lld/%lld, conformance %s)\n",
              spec.run_name().c_str(), rec.test_auprc, static_cast<long long>(rec.best_epoch),
              static_cast<long long>(rec.stopped_epoch), rec.conformance_pass ? "pass" : "FAIL");
  std::printf("artifacts: %s\n", spec.out_dir.c_str());
  return rec.conformance_pass ? 0 : 1;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, int jobs, bool literal,
              bool cv, int folds) {
  train::ExperimentSpec spec = train::experiment_spec_from_json(load_json(spec_path));
  if (!out.empty()) spec.out_dir = out;
  if (literal) spec.literal_scaling = true;
  train::SweepResult res = cv ? train::run_cv(spec, folds, jobs) : train::run_sweep(spec, jobs);
  std::printf("%s: %d trained, %d resumed, conformance %s\n", cv ? "cv" : "sweep", res.executed,
              res.skipped, res.all_conformant ? "pass" : "FAIL");
  std::printf("report: %s\n", (fs::path(spec.out_dir) / "report.json").string().c_str());
  return res.all_conformant ? 0 : 1;
}

int cmd_quantize(const std::string& in, const std::string& out, std::string geometry,
                 std::string mode, int64_t seed_override, bool rht_pre, bool literal) {
  io::TensorFile tf = io::read_tensor_file(in);
  json header = json::parse(tf.header_json);
  if (geometry.empty()) geometry = header.value("geometry", "1x16");
  if (mode.empty()) mode = header.value("mode", "nearest");
  uint64_t seed =
      seed_override >= 0 ? static_cast<uint64_t>(seed_override) : header.value("seed", 0ULL);

  fp4::BlockGeometry geom;
  if (geometry == "1x16")
    geom.kind = fp4::BlockKind::kRows1x16;
  else if (geometry == "16x16")
    geom.kind = fp4::BlockKind::kSquare16x16;
  else
    throw std::runtime_error("unknown geometry '" + geometry + "' (1x16 or 16x16)");

  Tensor input = tf.tensor;
  bool rotated = false;
  if (rht_pre) {
    int axis = input.ndim() - 1;
    auto t = rht::RhtTransform::from_seed(rht::kDefaultSize, seed);
    input = rht::apply_rht(input, t, axis);
    rotated = true;
  }

  RngStream stream(seed);
  if (mode != "stochastic" && mode != "nearest")
    throw std::runtime_error("unknown rounding mode '" + mode + "' (nearest or stochastic)");
  fp4::Rounding rounding =
      mode == "stochastic" ? fp4::Rounding::stochastic(stream) : fp4::Rounding::nearest();
  auto policy = literal ? fp4::ScalePolicy::kLiteral : fp4::ScalePolicy::kFp4Max;
  auto q = fp4::quantize(input, geom, rounding, policy);
  auto stats = fp4::quant_stats(input, q);

  fs::create_directories(out);
  {
    std::ofstream f(fs::path(out) / "codes.bin", std::ios::binary);
    for (auto c : q.codes) f.put(static_cast<char>(c.bits));
  }
  {
    std::ofstream f(fs::path(out) / "scales.bin", std::ios::binary);
    for (auto s : q.block_scales) f.put(static_cast<char>(s.bits));
  }
  {
    ordered_json meta;
    meta["shape"] = q.shape;
    meta["padded"] = q.padded;
    meta["geometry"] = geometry;
    meta["mode"] = mode;
    meta["seed"] = seed;
    meta["rht"] = rotated;
    meta["tensor_scale"] = q.tensor_scale;
    meta["scale_policy"] = literal ? "literal" : "fp4max";
    meta["blocks"] = q.block_count();
    std::ofstream f(fs::path(out) / "meta.json");
    f << meta.dump(2) << "\n";
  }
  {
    ordered_json sj;
    sj["max_abs_err"] = stats.max_abs_err;
    sj["rmse"] = stats.rmse;
    sj["saturation_fraction"] = stats.saturation_fraction;
    sj["zero_crush_fraction"] = stats.zero_crush_fraction;
    std::ofstream f(fs::path(out) / "stats.json");
    f << sj.dump(2) << "\n";
  }
  std::printf("quantized %s: max_abs_err %.6g, rmse %.6g, saturation %.4f, zero_crush %.4f\n",
              shape_str(q.shape).c_str(), stats.max_abs_err, stats.rmse,
              stats.saturation_fraction, stats.zero_crush_fraction);
  return 0;
}

int cmd_conformance(int64_t seed) {
  bool all = true;
  for (const auto& name : qat::recipe_names()) {
    auto res = qat::run_recipe_probe(qat::recipe_from_name(name),
                                     seed >= 0 ? static_cast<uint64_t>(seed) : 11);
    std::printf("%-14s %s\n", name.c_str(), res.report.pass ? "PASS" : "FAIL");
    for (const auto& f : res.report.failures) std::printf("    %s\n", f.c_str());
    all &= res.report.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-scaled FP4 quantization-aware training workbench"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, records_dir, in_path, geometry, mode;
  int jobs = 1, folds = 5;
  int64_t seed = -1;
  bool literal = false, rht_pre = false;

  auto* run = app.add_subcommand("run", "Train one configuration and write its record");
  run->add_option("--spec", spec_path, "Run spec JSON")->required();
  run->add_option("--out", out_dir, "Output directory (default: out)");
  run->add_option("--seed", seed, "Override the run seed");
  run->add_flag("--literal-scaling", literal, "Use the literal per-block max scale");

  auto* sweep = app.add_subcommand("sweep", "Train a recipe/arch/tier/seed grid (resumable)");
  sweep->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  sweep->add_option("--out", out_dir, "Output directory override");
  sweep->add_option("--jobs", jobs, "Parallel worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--literal-scaling", literal, "Use the literal per-block max scale");

  auto* cv = app.add_subcommand("cv", "k-fold patient-level cross-validation over a grid");
  cv->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  cv->add_option("--out", out_dir, "Output directory override");
  cv->add_option("--k", folds, "Number of folds")->check(CLI::PositiveNumber);
  cv->add_option("--jobs", jobs, "Parallel worker threads")->check(CLI::PositiveNumber);
  cv->add_flag("--literal-scaling", literal, "Use the literal per-block max scale");

  auto* quant = app.add_subcommand("quantize", "Quantize a tensor file and report error stats");
  quant->add_option("--in", in_path, "Input tensor file")->required();
  quant->add_option("--out", out_dir, "Output directory")->required();
  quant->add_option("--geometry", geometry, "1x16 or 16x16 (default: header or 1x16)");
  quant->add_option("--mode", mode, "nearest or stochastic (default: header or nearest)");
  quant->add_option("--seed", seed, "Seed for stochastic rounding / the rotation");
  quant->add_flag("--rht", rht_pre, "Apply the sign-randomized rotation before quantizing");
  quant->add_flag("--literal-scaling", literal, "Use the literal per-block max scale");

  auto* conf = app.add_subcommand("conformance", "Check all recipe presets on a probe network");
  conf->add_option("--seed", seed, "Probe seed");

  auto* rep = app.add_subcommand("report", "Summaries and SVG plots from run records");
  rep->add_option("--records", records_dir, "Directory containing run records")->required();
  rep->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(spec_path, out_dir, seed, literal);
    if (sweep->parsed()) return cmd_sweep(spec_path, out_dir, jobs, literal, false, 0);
    if (cv->parsed()) return cmd_sweep(spec_path, out_dir, jobs, literal, true, folds);
    if (quant->parsed())
      return cmd_quantize(in_path, out_dir, geometry, mode, seed, rht_pre, literal);
    if (conf->parsed()) return cmd_conformance(seed);
    if (rep->parsed()) {
      report::generate_report(records_dir, out_dir);
      std::printf("report written to %s\n", out_dir.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
