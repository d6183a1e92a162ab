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

#include "bcpnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "bcpnn/error.hpp"

namespace bcpnn {

RawDataset make_planted_dataset(const PlantedSpec& spec) {
  for (const auto f : spec.informative) {
    if (f >= spec.n_features) throw ConfigError("informative feature index out of range");
  }
  if (!(spec.sigma > 0.0)) throw ConfigError("sigma must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<std::uint8_t> labels(spec.n_samples);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 2);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<bool> informative(spec.n_features, false);
  for (const auto f : spec.informative) informative[f] = true;

  RawDataset out;
  out.n_features = spec.n_features;
  out.source = "planted(seed=" + std::to_string(spec.seed) + ")";
  out.labels = labels;
  out.values.resize(spec.n_samples * spec.n_features);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const double centre = labels[i] == kSignal ? spec.shift : -spec.shift;
    for (std::size_t f = 0; f < spec.n_features; ++f) {
      const double v = informative[f] ? centre + spec.sigma * unit(rng) : unit(rng);
      out.values[i * spec.n_features + f] = static_cast<float>(v);
    }
  }
  return out;
}

double planted_bayes_accuracy(const PlantedSpec& spec) {
  // Equal priors, shared isotropic noise: the Bayes rule thresholds the sum
  // of informative features at 0, and that sum has mean +-k*shift and
  // standard deviation sigma*sqrt(k).
  const double k = static_cast<double>(spec.informative.size());
  const double z = spec.shift * std::sqrt(k) / spec.sigma;
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

RawDataset make_higgs_like_dataset(std::size_t n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::bernoulli_distribution coin(0.5);

  RawDataset out;
  out.n_features = kHiggsFeatures;
  out.source = "higgs-like(seed=" + std::to_string(seed) + ")";
  out.values.resize(n_samples * kHiggsFeatures);
  out.labels.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const bool signal = coin(rng);
    out.labels[i] = signal ? kSignal : kBackground;
    const double s = signal ? 1.0 : -1.0;
    const double energy = unit(rng);  // shared scale, correlates momenta
    float* row = out.values.data() + i * kHiggsFeatures;
    double sum_pt = 0.0;
    // Seven objects x (pt, eta, phi): momenta carry a weak class shift,
    // angles carry none.
    for (std::size_t obj = 0; obj < 7; ++obj) {
      const double pt = std::exp(0.35 * energy + 0.04 * s * static_cast<double>(obj % 3) + 0.45 * unit(rng));
      row[3 * obj] = static_cast<float>(pt);
      row[3 * obj + 1] = static_cast<float>((1.0 - 0.08 * s) * unit(rng));
      row[3 * obj + 2] = static_cast<float>(angle(rng));
      sum_pt += pt;
    }
    // Derived masses: signal has resonant peaks, background a broad tail.
    for (std::size_t k = 0; k < 7; ++k) {
      const double broad = std::exp(0.3 * energy + 0.5 * unit(rng)) * (1.0 + 0.05 * sum_pt);
      const double peak = 1.0 + 0.12 * unit(rng);
      const double strength = 0.25 + 0.05 * static_cast<double>(k);
      const bool resonant = signal && std::bernoulli_distribution(strength)(rng);
      row[21 + k] = static_cast<float>(resonant ? peak : broad);
    }
  }
  return out;
}

}  // namespace bcpnn
