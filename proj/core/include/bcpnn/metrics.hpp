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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bcpnn {

// Fraction of positions where predictions equal labels.
double accuracy(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;

  // "fpr,tpr" header then one line per point.
  std::string to_csv() const;
};

// Thresholds at every distinct score, highest first; tied scores form a
// single (diagonal) step. AUC is the trapezoidal area, which equals the
// Mann-Whitney statistic with half credit for ties.
RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// O(P*N) pairwise concordance count. Reference implementation for tests.
double auc_oracle(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct Confusion {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
};

Confusion confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

// Population mean and sample standard deviation (n-1); std is 0 for n < 2.
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace bcpnn
