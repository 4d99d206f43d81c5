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

#include "fp4lab/train/runner.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fp4lab/io/checkpoint.hpp"
#include "fp4lab/train/optim.hpp"
#include "fp4lab/train/schedule.hpp"

namespace fp4lab::train {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string RunSpec::run_name() const {
  std::string name = arch + "_" + tier + "_" + recipe + "_s" + std::to_string(seed);
  if (fold >= 0) name += "_f" + std::to_string(fold);
  return name;
}

bool operator==(const RunSpec& a, const RunSpec& b) {
  return run_spec_to_json(a) == run_spec_to_json(b);
}

namespace {

struct SampleRef {
  int64_t patient = 0;
  int64_t slice = 0;
  int64_t flat = 0;  // patient * slices_per_patient + slice
};

std::vector<SampleRef> collect_samples(const std::vector<data::PatientVolume>& ds,
                                       const std::vector<int64_t>& patient_ids,
                                       int64_t slices_per_patient) {
  std::set<int64_t> wanted(patient_ids.begin(), patient_ids.end());
  std::vector<SampleRef> out;
  for (const auto& v : ds) {
    if (!wanted.count(v.patient_id)) continue;
    for (size_t s = 0; s < v.slices.size(); ++s)
      out.push_back({v.patient_id, static_cast<int64_t>(s),
                     v.patient_id * slices_per_patient + static_cast<int64_t>(s)});
  }
  return out;
}

// Assembles one batch; augments (train) or normalizes only (eval).
void fill_batch(const std::vector<data::PatientVolume>& ds, const std::vector<SampleRef>& refs,
                size_t begin, size_t count, bool train, uint64_t seed, int64_t epoch,
                Tensor* images, Tensor* masks) {
  int64_t hw = ds[0].slices[0].image.shape[2];
  *images = Tensor({static_cast<int64_t>(count), 3, hw, hw});
  *masks = Tensor({static_cast<int64_t>(count), 1, hw, hw});
  for (size_t i = 0; i < count; ++i) {
    const SampleRef& r = refs[begin + i];
    const auto& slice = ds[static_cast<size_t>(r.patient)].slices[static_cast<size_t>(r.slice)];
    Tensor img = slice.image;
    Tensor msk = slice.mask;
    if (train) {
      RngStream arng(RngStream::derive(
          seed, 0xAA000000ULL + static_cast<uint64_t>(epoch) * 1000003ULL +
                    static_cast<uint64_t>(r.flat)));
      data::apply_augment(img, msk, data::sample_augment(arng));
    }
    data::normalize_imagenet(img);
    std::copy(img.data.begin(), img.data.end(),
              images->data.begin() + static_cast<int64_t>(i) * 3 * hw * hw);
    std::copy(msk.data.begin(), msk.data.end(),
              masks->data.begin() + static_cast<int64_t>(i) * hw * hw);
  }
}

double eval_pooled_loss(models::Model& m, const std::vector<data::PatientVolume>& ds,
                        const std::vector<SampleRef>& refs, int64_t batch,
                        const LossConfig& cfg, uint64_t seed) {
  LossAccum acc;
  for (size_t b = 0; b < refs.size(); b += static_cast<size_t>(batch)) {
    size_t count = std::min(static_cast<size_t>(batch), refs.size() - b);
    Tensor images, masks;
    fill_batch(ds, refs, b, count, /*train=*/false, seed, 0, &images, &masks);
    ad::Graph g;
    ad::Var out = m.forward(g, images, /*training=*/false);
    acc.add(g.val(out).ptr(), masks.ptr(), g.val(out).numel());
  }
  return acc.total(cfg);
}

std::vector<Tensor> snapshot_params(models::Model& m) {
  std::vector<Tensor> snap;
  for (auto* p : m.parameters()) snap.push_back(p->value);
  return snap;
}

void restore_params(models::Model& m, const std::vector<Tensor>& snap) {
  auto params = m.parameters();
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace

RunRecord train_run(const RunSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.spec = spec;

  auto ds = data::generate_dataset(spec.data);
  rec.realized_positive_rate = data::positive_fraction(ds);

  data::SplitSpec split;
  if (spec.fold >= 0) {
    auto folds = data::kfold_splits(ds, spec.kfolds, spec.data.seed);
    if (spec.fold >= static_cast<int>(folds.size()))
      throw std::invalid_argument("fold index out of range");
    split = folds[static_cast<size_t>(spec.fold)];
  } else {
    split = data::split_patients(ds, 0.8, 0.1, 0.1, spec.data.seed);
  }

  auto recipe = qat::recipe_from_name(spec.recipe);
  if (spec.literal_scaling) recipe.scale_policy = fp4::ScalePolicy::kLiteral;
  auto arch = models::arch_from_name(spec.arch);
  auto cfg = models::model_config(arch, spec.tier);

  auto train_refs = collect_samples(ds, split.train, spec.data.slices_per_patient);
  auto val_refs = collect_samples(ds, split.val, spec.data.slices_per_patient);
  auto test_refs = collect_samples(ds, split.test, spec.data.slices_per_patient);
  if (static_cast<int64_t>(train_refs.size()) < spec.train.batch)
    throw std::invalid_argument("too few training slices for one batch");

  // Recipe-conformance probe on a throwaway copy so training state is not
  // perturbed: one forward/backward over the first training batch.
  {
    auto probe = models::build_model(cfg, recipe, spec.seed);
    qat::EventLog log;
    probe->set_event_sink(&log);
    Tensor images, masks;
    size_t count = std::min<size_t>(static_cast<size_t>(spec.train.batch), train_refs.size());
    fill_batch(ds, train_refs, 0, count, true, spec.seed, 1, &images, &masks);
    ad::Graph g;
    ad::Var out = probe->forward(g, images, true);
    g.backward(bce_tversky_loss(g, out, masks, spec.train.loss));
    auto report = qat::conformance_check(recipe, log, true);
    rec.conformance_pass = report.pass;
    for (const auto& e : log)
      (e.precision == qat::Precision::kFp4 ? rec.fp4_events : rec.high_events)++;
  }

  auto model = models::build_model(cfg, recipe, spec.seed);
  rec.param_count = model->param_count(true);

  OptimizerConfig ocfg = optimizer_for_arch(arch, spec.train.optimizer == "adamax");
  if (spec.train.optimizer == "adamw") ocfg = optimizer_for_arch(models::Arch::kSwin);
  if (spec.train.lr > 0) ocfg.lr = spec.train.lr;
  if (spec.train.weight_decay >= 0) ocfg.weight_decay = spec.train.weight_decay;
  Optimizer opt(ocfg);

  PlateauSchedule plateau{spec.train.plateau_factor, spec.train.plateau_patience};
  EarlyStop stopper{spec.train.stop_patience, spec.train.stop_warmup};
  rec.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_snapshot = snapshot_params(*model);
  rec.best_epoch = 0;

  std::vector<size_t> order(train_refs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int64_t epoch = 1; epoch <= spec.train.epochs; ++epoch) {
    RngStream shuffle_rng(RngStream::derive(spec.seed, 0xEE000000ULL + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    std::vector<SampleRef> shuffled;
    shuffled.reserve(order.size());
    for (size_t i : order) shuffled.push_back(train_refs[i]);

    double loss_sum = 0.0;
    int64_t batches = 0;
    size_t usable = shuffled.size() / static_cast<size_t>(spec.train.batch) *
                    static_cast<size_t>(spec.train.batch);  // drop the remainder
    for (size_t b = 0; b < usable; b += static_cast<size_t>(spec.train.batch)) {
      Tensor images, masks;
      fill_batch(ds, shuffled, b, static_cast<size_t>(spec.train.batch), true, spec.seed, epoch,
                 &images, &masks);
      ad::Graph g;
      ad::Var out = model->forward(g, images, true);
      ad::Var loss = bce_tversky_loss(g, out, masks, spec.train.loss);
      g.backward(loss);
      model->pull_grads(g);
      opt.step(model->parameters());
      loss_sum += g.val(loss).data[0];
      ++batches;
    }

    double val_loss = eval_pooled_loss(*model, ds, val_refs, spec.train.batch, spec.train.loss,
                                       spec.seed);
    rec.epochs.push_back({loss_sum / std::max<int64_t>(batches, 1), val_loss, opt.lr()});
    rec.stopped_epoch = epoch;

    if (val_loss < rec.best_val_loss) {
      rec.best_val_loss = val_loss;
      rec.best_epoch = epoch;
      best_snapshot = snapshot_params(*model);
    }
    if (plateau.observe(val_loss)) opt.set_lr(opt.lr() * spec.train.plateau_factor);
    if (stopper.observe(val_loss, epoch)) break;
  }

  restore_params(*model, best_snapshot);

  // Held-out test evaluation with the best checkpoint.
  std::vector<double> probs;
  std::vector<char> labels;
  std::vector<double> per_image;
  for (size_t b = 0; b < test_refs.size(); b += static_cast<size_t>(spec.train.batch)) {
    size_t count = std::min(static_cast<size_t>(spec.train.batch), test_refs.size() - b);
    Tensor images, masks;
    fill_batch(ds, test_refs, b, count, false, spec.seed, 0, &images, &masks);
    ad::Graph g;
    ad::Var out = model->forward(g, images, false);
    const Tensor& z = g.val(out);
    int64_t px = z.numel() / static_cast<int64_t>(count);
    for (size_t i = 0; i < count; ++i) {
      std::vector<double> img_probs;
      std::vector<char> img_labels;
      int64_t pos = 0;
      for (int64_t k = 0; k < px; ++k) {
        double p = prob_from_logit(z.data[static_cast<size_t>(static_cast<int64_t>(i) * px + k)]);
        char y = masks.data[static_cast<size_t>(static_cast<int64_t>(i) * px + k)] > 0.5f ? 1 : 0;
        probs.push_back(p);
        labels.push_back(y);
        img_probs.push_back(p);
        img_labels.push_back(y);
        pos += y;
      }
      if (pos > 0 && pos < px) per_image.push_back(auprc(img_probs, img_labels));
    }
  }
  rec.test_auprc = auprc(probs, labels);
  if (!per_image.empty()) {
    double s = 0.0;
    for (double v : per_image) s += v;
    rec.test_auprc_per_image = s / static_cast<double>(per_image.size());
  }
  rec.prc = prc_curve(probs, labels);
  rec.histogram = pred_histogram(probs);
  rec.spikiness = spikiness(rec.histogram);

  if (arch != models::Arch::kCnn && !test_refs.empty()) {
    Tensor images, masks;
    size_t count = std::min<size_t>(static_cast<size_t>(spec.train.batch), test_refs.size());
    fill_batch(ds, test_refs, 0, count, false, spec.seed, 0, &images, &masks);
    rec.attention = models::attention_stats(*model, images);
    rec.has_attention = true;
  }

  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    std::string ckpt_dir = (fs::path(spec.out_dir) / "checkpoint").string();
    io::save_checkpoint(ckpt_dir, *model, run_spec_to_json(spec).dump());
    rec.checkpoint = "checkpoint";
  }

  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

ordered_json run_spec_to_json(const RunSpec& s) {
  ordered_json j;
  j["arch"] = s.arch;
  j["tier"] = s.tier;
  j["recipe"] = s.recipe;
  j["seed"] = s.seed;
  j["data"] = {{"seed", s.data.seed},
               {"n_patients", s.data.n_patients},
               {"slices_per_patient", s.data.slices_per_patient},
               {"positive_rate", s.data.positive_rate},
               {"image", s.data.image}};
  j["train"] = {{"epochs", s.train.epochs},
                {"batch", s.train.batch},
                {"optimizer", s.train.optimizer},
                {"lr", s.train.lr},
                {"weight_decay", s.train.weight_decay},
                {"plateau_factor", s.train.plateau_factor},
                {"plateau_patience", s.train.plateau_patience},
                {"stop_patience", s.train.stop_patience},
                {"stop_warmup", s.train.stop_warmup},
                {"loss", {{"alpha", s.train.loss.alpha},
                          {"beta", s.train.loss.beta},
                          {"eps", s.train.loss.eps}}}};
  j["literal_scaling"] = s.literal_scaling;
  j["fold"] = s.fold;
  j["kfolds"] = s.kfolds;
  return j;
}

RunSpec run_spec_from_json(const json& j) {
  RunSpec s;
  s.arch = j.value("arch", s.arch);
  s.tier = j.value("tier", s.tier);
  s.recipe = j.value("recipe", s.recipe);
  s.seed = j.value("seed", s.seed);
  if (j.contains("data")) {
    const auto& d = j["data"];
    s.data.seed = d.value("seed", s.data.seed);
    s.data.n_patients = d.value("n_patients", s.data.n_patients);
    s.data.slices_per_patient = d.value("slices_per_patient", s.data.slices_per_patient);
    s.data.positive_rate = d.value("positive_rate", s.data.positive_rate);
    s.data.image = d.value("image", s.data.image);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    s.train.epochs = t.value("epochs", s.train.epochs);
    s.train.batch = t.value("batch", s.train.batch);
    s.train.optimizer = t.value("optimizer", s.train.optimizer);
    s.train.lr = t.value("lr", s.train.lr);
    s.train.weight_decay = t.value("weight_decay", s.train.weight_decay);
    s.train.plateau_factor = t.value("plateau_factor", s.train.plateau_factor);
    s.train.plateau_patience = t.value("plateau_patience", s.train.plateau_patience);
    s.train.stop_patience = t.value("stop_patience", s.train.stop_patience);
    s.train.stop_warmup = t.value("stop_warmup", s.train.stop_warmup);
    if (t.contains("loss")) {
      s.train.loss.alpha = t["loss"].value("alpha", s.train.loss.alpha);
      s.train.loss.beta = t["loss"].value("beta", s.train.loss.beta);
      s.train.loss.eps = t["loss"].value("eps", s.train.loss.eps);
    }
  }
  s.literal_scaling = j.value("literal_scaling", false);
  s.fold = j.value("fold", -1);
  s.kfolds = j.value("kfolds", 5);
  return s;
}

ordered_json run_record_to_json(const RunRecord& r) {
  ordered_json j;
  j["spec"] = run_spec_to_json(r.spec);
  j["stopped_epoch"] = r.stopped_epoch;
  j["best_epoch"] = r.best_epoch;
  j["best_val_loss"] = r.best_val_loss;
  j["test_auprc"] = r.test_auprc;
  j["test_auprc_per_image"] = r.test_auprc_per_image;
  j["param_count"] = r.param_count;
  j["realized_positive_rate"] = r.realized_positive_rate;
  j["spikiness"] = r.spikiness;
  j["conformance_pass"] = r.conformance_pass;
  j["fp4_events"] = r.fp4_events;
  j["high_events"] = r.high_events;
  j["checkpoint"] = r.checkpoint;
  j["wall_seconds"] = r.wall_seconds;
  auto epochs = ordered_json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}});
  j["epochs"] = epochs;
  auto prc = ordered_json::array();
  for (auto [rec_, prec] : r.prc) prc.push_back({rec_, prec});
  j["prc"] = prc;
  j["histogram"] = r.histogram;
  if (r.has_attention) {
    j["attention"] = {{"mean_entropy", r.attention.mean_entropy},
                      {"mean_max_weight", r.attention.mean_max_weight},
                      {"near_binary_fraction", r.attention.near_binary_fraction},
                      {"per_layer_entropy", r.attention.per_layer_entropy}};
  }
  return j;
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.spec = run_spec_from_json(j.at("spec"));
  r.stopped_epoch = j.value("stopped_epoch", 0);
  r.best_epoch = j.value("best_epoch", 0);
  r.best_val_loss = j.value("best_val_loss", 0.0);
  r.test_auprc = j.value("test_auprc", 0.0);
  r.test_auprc_per_image = j.value("test_auprc_per_image", 0.0);
  r.param_count = j.value("param_count", 0);
  r.realized_positive_rate = j.value("realized_positive_rate", 0.0);
  r.spikiness = j.value("spikiness", 0.0);
  r.conformance_pass = j.value("conformance_pass", true);
  r.fp4_events = j.value("fp4_events", 0);
  r.high_events = j.value("high_events", 0);
  r.checkpoint = j.value("checkpoint", "");
  r.wall_seconds = j.value("wall_seconds", 0.0);
  for (const auto& e : j.value("epochs", json::array()))
    r.epochs.push_back({e.value("train_loss", 0.0), e.value("val_loss", 0.0), e.value("lr", 0.0)});
  for (const auto& p : j.value("prc", json::array()))
    r.prc.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  if (j.contains("histogram")) {
    auto h = j["histogram"].get<std::vector<double>>();
    for (size_t i = 0; i < std::min<size_t>(h.size(), 101); ++i) r.histogram[i] = h[i];
  }
  if (j.contains("attention")) {
    r.has_attention = true;
    const auto& a = j["attention"];
    r.attention.mean_entropy = a.value("mean_entropy", 0.0);
    r.attention.mean_max_weight = a.value("mean_max_weight", 0.0);
    r.attention.near_binary_fraction = a.value("near_binary_fraction", 0.0);
    r.attention.per_layer_entropy = a.value("per_layer_entropy", std::vector<double>{});
  }
  return r;
}

void write_run_artifacts(const std::string& dir, const RunRecord& r) {
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "record.json");
    f << run_record_to_json(r).dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / "prc.csv");
    f << "recall,precision\n";
    char line[80];
    for (auto [rec_, prec] : r.prc) {
      std::snprintf(line, sizeof line, "%.9g,%.9g\n", rec_, prec);
      f << line;
    }
  }
  {
    std::ofstream f(fs::path(dir) / "hist.csv");
    f << "bin_low,mass\n";
    char line[80];
    for (size_t i = 0; i < r.histogram.size(); ++i) {
      std::snprintf(line, sizeof line, "%.9g,%.9g\n", static_cast<double>(i) / 101.0,
                    r.histogram[i]);
      f << line;
    }
  }
  {
    std::ofstream f(fs::path(dir) / "epochs.jsonl");
    int64_t epoch = 1;
    for (const auto& e : r.epochs) {
      ordered_json j = {{"epoch", epoch++},
                        {"train_loss", e.train_loss},
                        {"val_loss", e.val_loss},
                        {"lr", e.lr}};
      f << j.dump() << "\n";
    }
  }
}

RunRecord load_run_record(const std::string& record_json_path) {
  std::ifstream f(record_json_path);
  if (!f) throw std::runtime_error("cannot read " + record_json_path);
  return run_record_from_json(json::parse(f));
}

}  // namespace fp4lab::train
