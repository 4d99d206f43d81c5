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

#include "fp4lab/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fp4lab::train {

namespace {

void check_two_class(const std::vector<double>& scores, const std::vector<char>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels must have equal length");
  int64_t pos = std::count(labels.begin(), labels.end(), static_cast<char>(1));
  if (pos == 0 || pos == static_cast<int64_t>(labels.size()))
    throw std::invalid_argument("AUPRC undefined");
}

}  // namespace

std::vector<std::pair<double, double>> prc_curve(const std::vector<double>& scores,
                                                 const std::vector<char>& labels) {
  check_two_class(scores, labels);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  int64_t total_pos = std::count(labels.begin(), labels.end(), static_cast<char>(1));

  std::vector<std::pair<double, double>> pts;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    double thr = scores[order[i]];
    // Group ties at one threshold.
    while (i < order.size() && scores[order[i]] == thr) {
      if (labels[order[i]]) ++tp;
      else ++fp;
      ++i;
    }
    double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    pts.emplace_back(recall, precision);
  }
  return pts;
}

double auprc(const std::vector<double>& scores, const std::vector<char>& labels) {
  auto pts = prc_curve(scores, labels);
  double ap = 0.0, prev_r = 0.0;
  for (auto [r, p] : pts) {
    ap += (r - prev_r) * p;
    prev_r = r;
  }
  return ap;
}

std::array<double, 101> pred_histogram(const std::vector<double>& probs) {
  std::array<double, 101> h{};
  if (probs.empty()) return h;
  for (double p : probs) {
    int64_t bin = static_cast<int64_t>(std::floor(p * 101.0));
    bin = std::clamp<int64_t>(bin, 0, 100);
    h[static_cast<size_t>(bin)] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(probs.size());
  return h;
}

double spikiness(const std::array<double, 101>& hist) {
  std::array<double, 101> sorted = hist;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += sorted[static_cast<size_t>(i)];
  return s;
}

double prob_from_logit(double z) {
  double c = std::clamp(z, -20.0, 20.0);
  return c >= 0.0 ? 1.0 / (1.0 + std::exp(-c)) : std::exp(c) / (1.0 + std::exp(c));
}

}  // namespace fp4lab::train
