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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcpnn/layer.hpp"
#include "bcpnn/training.hpp"

namespace bcpnn::pipeline {

struct DataSection {
  std::filesystem::path csv;        // HIGGS-format CSV
  std::optional<std::size_t> limit; // read at most this many valid rows
  double train_fraction = 0.9;
  std::size_t train_per_class = 50000;
  std::size_t test_per_class = 25000;
  std::size_t n_bins = kDefaultBins;
};

struct LayerSection {
  std::size_t n_hcus = 1;
  std::size_t n_mcus = 300;
  double density = 0.3;
  MaskGranularity granularity = MaskGranularity::kComponent;
};

struct CapacitySweep {
  std::vector<std::size_t> mcus = {30, 300, 3000};
  std::vector<std::size_t> hcus = {1, 2, 4, 8};
  double density = 0.3;
};

struct ReceptiveFieldSweep {
  std::size_t n_hcus = 1;
  std::size_t n_mcus = 3000;
  std::vector<double> densities;  // 0, 0.05, ..., 1 unless given

  static std::vector<double> default_grid();
};

// Everything a run needs, read from one JSON document. Unknown keys are
// rejected so a typo cannot silently fall back to a default.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t repetitions = 10;
  std::filesystem::path out = "runs/default";
  std::size_t threads = 1;
  std::size_t jobs = 1;  // sweep worker processes
  bool snapshots = true;

  DataSection data;
  LayerSection layer;
  TrainConfig train;
  CapacitySweep capacity;
  ReceptiveFieldSweep receptive_field;

  static ExperimentConfig from_json(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
  // Canonical form: sorted keys, every field present.
  std::string to_json() const;

  // `path` is dotted ("train.alpha"); `value` is JSON, or a bare string.
  void set(std::string_view path, std::string_view value);

  void validate() const;

  // FNV-1a over the canonical JSON minus the fields that cannot change a
  // result (out, threads, jobs).
  std::string hash() const;
  // Same, restricted to what the prepared data depends on.
  std::string data_hash() const;

  LayerGeometry geometry(std::size_t n_inputs) const;
};

std::string fnv1a_hex(std::string_view bytes);

}  // namespace bcpnn::pipeline
