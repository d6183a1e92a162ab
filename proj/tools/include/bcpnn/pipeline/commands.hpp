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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bcpnn/encoding.hpp"
#include "bcpnn/metrics.hpp"
#include "bcpnn/pipeline/config.hpp"
#include "bcpnn/training.hpp"

namespace bcpnn::pipeline {

// Encoded, balanced train and test sets plus the table that encoded them.
struct PreparedData {
  std::filesystem::path dir;
  EncodedDataset train;
  EncodedDataset test;
  QuantileTable table;
  bool reused = false;  // a valid cache for the same data config was found
};

// load -> split -> balance -> fit quantiles on the balanced train half ->
// encode both halves -> write caches and a manifest under <out>/data.
// A second call with the same data config reuses the caches.
PreparedData cmd_prepare(const ExperimentConfig& config, std::ostream& log);

struct TrainOptions {
  // Checkpoint to continue from; training runs until train.epochs in total.
  std::optional<std::filesystem::path> resume;
  // Per-epoch mask snapshots and checkpoints (off inside sweeps).
  bool per_epoch_outputs = true;
};

struct TrainResult {
  std::filesystem::path dir;
  BcpnnLayer hidden;
  ReadoutModel readout;
  EpochLog log;
  double hidden_seconds = 0.0;   // this invocation only
  double readout_seconds = 0.0;
  double train_accuracy = 0.0;
};

// Trains hidden layer and readout on prepared.train and writes into `dir`:
// hidden.lyr, readout.rdo, epochs.csv, masks/, config.json. An INCOMPLETE
// marker exists until every file is in place.
TrainResult train_model(const ExperimentConfig& config, const PreparedData& prepared,
                        const std::filesystem::path& dir, const TrainOptions& options,
                        std::ostream& log);

// cmd_prepare followed by train_model into <out>/train.
TrainResult cmd_train(const ExperimentConfig& config, const TrainOptions& options,
                      std::ostream& log);

struct EvalReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string split;
  std::size_t samples = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  Confusion counts;
  RocCurve roc;

  std::string to_json() const;
};

// Scores `samples` with a trained model. FormatError when the model was not
// trained on data encoded with the same quantile table and width.
EvalReport evaluate(const BcpnnLayer& hidden, const ReadoutModel& readout,
                    const std::string& model_table_hash, const EncodedDataset& samples);

// Loads <model_dir>/{hidden.lyr,readout.rdo}, evaluates on the prepared
// `split` ("test" or "train") and writes metrics.json and roc.csv to <out>/eval.
EvalReport cmd_eval(const ExperimentConfig& config, const std::filesystem::path& model_dir,
                    const std::string& split, std::ostream& log);

// Writes PGM + index.json for a saved hidden layer.
std::vector<std::filesystem::path> cmd_export_masks(const std::filesystem::path& model,
                                                    const std::filesystem::path& out_dir,
                                                    std::size_t image_width);

// --- sweeps ---------------------------------------------------------------

struct SweepRow {
  std::size_t n_hcus = 0;
  std::size_t n_mcus = 0;
  double density = 0.0;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  double train_seconds = 0.0;
  std::string status = "ok";  // anything else describes the failure
  std::string masks;

  bool ok() const { return status == "ok"; }
};

struct SweepSummaryRow {
  std::size_t n_hcus = 0;
  std::size_t n_mcus = 0;
  double density = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  double seconds_mean = 0.0;
  double seconds_std = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummaryRow> summary;

  // Both carry "# config_hash=..." and "# seed=..." header lines.
  std::string rows_csv(const std::string& config_hash, std::uint64_t seed) const;
  std::string summary_csv(const std::string& config_hash, std::uint64_t seed) const;
};

// Groups rows by (H, M, d) in first-seen order; failed rows are counted but
// left out of the statistics.
std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows);

struct SweepCell {
  std::size_t n_hcus = 0;
  std::size_t n_mcus = 0;
  double density = 0.0;
  std::size_t repetition = 0;
};

// Runs every cell (each repetition r uses seed config.seed + r) with up to
// config.jobs worker processes. A failing cell is recorded and the sweep
// carries on. Results land in <out>/<name>.
SweepResult run_sweep(const ExperimentConfig& config, const std::string& name,
                      const std::vector<SweepCell>& cells, std::ostream& log);

std::vector<SweepCell> capacity_cells(const ExperimentConfig& config);
std::vector<SweepCell> receptive_field_cells(const ExperimentConfig& config);

SweepResult cmd_sweep_capacity(const ExperimentConfig& config, std::ostream& log);
SweepResult cmd_sweep_receptive_field(const ExperimentConfig& config, std::ostream& log);

}  // namespace bcpnn::pipeline
