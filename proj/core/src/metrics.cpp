// Copyright 2026 The bcpnn-higgs Authors.
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

#include "bcpnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bcpnn/error.hpp"

namespace bcpnn {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw ShapeError("metric inputs have different lengths");
  if (a == 0) throw MetricError("metric undefined on empty input");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const std::uint8_t> labels) {
  std::size_t pos = 0;
  for (const auto l : labels) {
    if (l > 1) throw MetricError("label outside {0,1}");
    pos += l;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("AUC undefined: only one class present");
  return {pos, neg};
}

}  // namespace

double accuracy(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
  check_pair(predictions.size(), labels.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::string RocCurve::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "fpr,tpr\n";
  for (const auto& p : points) out << p.fpr << ',' << p.tpr << '\n';
  return out.str();
}

RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_pair(scores.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  for (const double s : scores) {
    if (std::isnan(s)) throw MetricError("NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  // Twice the area in units of (1 negative) x (1 positive); integer valued
  // until the final division, so it matches the pairwise count exactly.
  double doubled_area = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t group_tp = 0;
    std::size_t group_fp = 0;
    const double s = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == s; ++k) {
      (labels[order[k]] == 1 ? group_tp : group_fp) += 1;
    }
    doubled_area += static_cast<double>(group_fp) * static_cast<double>(2 * tp + group_tp);
    tp += group_tp;
    fp += group_fp;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.auc = doubled_area / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

double auc_oracle(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_pair(scores.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  double concordant = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) {
        concordant += 1.0;
      } else if (scores[i] == scores[j]) {
        concordant += 0.5;
      }
    }
  }
  return concordant / (static_cast<double>(pos) * static_cast<double>(neg));
}

Confusion confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
  check_pair(predictions.size(), labels.size());
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predictions[i] == 1 ? c.true_positive : c.false_negative) += 1;
    } else {
      (predictions[i] == 1 ? c.false_positive : c.true_negative) += 1;
    }
  }
  return c;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace bcpnn
