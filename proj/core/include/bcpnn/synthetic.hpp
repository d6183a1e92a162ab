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
#include <vector>

#include "bcpnn/ingestion.hpp"

namespace bcpnn {

// Two-class data where only a few features carry the label: informative
// feature = +-shift + N(0, sigma^2) by class, every other feature N(0, 1)
// independent of the class. Classes alternate then get shuffled, so the set
// is balanced up to one row.
struct PlantedSpec {
  std::size_t n_samples = 10000;
  std::size_t n_features = kHiggsFeatures;
  std::vector<std::size_t> informative = {5, 22};
  double shift = 0.5;
  double sigma = 0.35;
  std::uint64_t seed = 7;
};

RawDataset make_planted_dataset(const PlantedSpec& spec);

// Accuracy of the Bayes rule on the raw (unbinned) features:
// Phi(shift * sqrt(k) / sigma) for k informative features.
double planted_bayes_accuracy(const PlantedSpec& spec);

// Higgs-shaped stand-in (28 skewed, correlated features, weak distributed
// signal) used for smoke runs and timing when the real file is absent.
RawDataset make_higgs_like_dataset(std::size_t n_samples, std::uint64_t seed);

}  // namespace bcpnn
