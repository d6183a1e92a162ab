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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bcpnn/encoding.hpp"
#include "bcpnn/layer.hpp"

namespace bcpnn {

enum class ReadoutKind : std::uint8_t { kBcpnn = 0, kSgd = 1 };

std::string_view to_string(ReadoutKind kind);
ReadoutKind parse_readout_kind(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  float alpha = 0.005f;
  // Swaps per hypercolumn per epoch; 0 picks 1% of the active count (min 1).
  std::size_t plasticity_swaps = 0;
  float noise_amplitude = 1e-4f;
  std::uint64_t seed = 1;
  ReadoutKind readout = ReadoutKind::kSgd;
  double sgd_lr = 0.1;
  std::size_t sgd_epochs = 30;
  std::size_t sgd_batch_size = 128;
  TraceUpdate trace_update = TraceUpdate::kBatchMean;
  // Hidden-layer log regularisers and prior scale; see LayerOptions. The
  // readout layer always uses the alpha-derived regularisers and full prior.
  // Small fixed regularisers keep a fresh unit's weights from being swamped
  // while p_out ~ 1/M, and dropping the prior stops one unit from winning
  // every sample early on.
  std::optional<Regularization> regularization = Regularization{1e-10f, 1e-5f};
  float prior_gain = 0.0f;

  void validate() const;
  // Options for a hidden layer trained under this config.
  LayerOptions hidden_options(std::uint64_t layer_seed, float input_prior) const;
  std::size_t swaps_for(const LayerGeometry& geometry) const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, counted across resumes
  double seconds = 0.0;
  std::size_t swaps = 0;
  std::optional<double> train_accuracy;
  std::optional<double> heldout_accuracy;
};

struct EpochLog {
  std::vector<EpochRecord> records;
  std::vector<std::string> warnings;

  // epoch,seconds,swaps,train_acc,heldout_acc; missing values are empty.
  // Each line of `header_comment` is written first as "# ...".
  std::string to_csv(std::string_view header_comment = {}) const;
};

using EpochCallback = std::function<void(const BcpnnLayer&, const EpochRecord&)>;

// Unsupervised training: config.epochs more epochs of
//   shuffle -> per batch {noisy forward, trace update, weight refresh}
//   -> plasticity step.
// Shuffle order and noise derive from (config.seed, absolute epoch), so a
// resumed run replays an uninterrupted one. Labels are never read.
EpochLog train_hidden(BcpnnLayer& layer, const EncodedDataset& data, const TrainConfig& config,
                      const EpochCallback& on_epoch = {});

// Noise-free hidden activations for the given rows (all rows when empty).
RowMatrix hidden_activations(const BcpnnLayer& layer, const EncodedDataset& data,
                             std::span<const std::size_t> rows = {});

// Softmax regression head trained by minibatch SGD on cross-entropy.
struct SgdReadout {
  Eigen::MatrixXd weights;  // n_inputs x 2
  Eigen::Vector2d bias = Eigen::Vector2d::Zero();

  // Mean cross-entropy over the rows and its gradient. Computed in double.
  static double loss_and_gradient(const Eigen::MatrixXd& weights, const Eigen::Vector2d& bias,
                                  const Eigen::MatrixXd& inputs,
                                  std::span<const std::uint8_t> labels,
                                  Eigen::MatrixXd* grad_weights, Eigen::Vector2d* grad_bias);
};

class ReadoutModel {
 public:
  ReadoutKind kind = ReadoutKind::kSgd;
  BcpnnLayer bcpnn;  // 1 hypercolumn, 2 minicolumns, full field (kBcpnn)
  SgdReadout sgd;    // kSgd

  std::size_t n_inputs() const;
  // rows x 2 class probabilities (background, signal).
  Eigen::MatrixXd probabilities(const RowMatrix& hidden) const;
};

// Throws DegenerateDataError if only one class is present.
ReadoutModel train_readout(const RowMatrix& hidden, std::span<const std::uint8_t> labels,
                           const TrainConfig& config);
// Same, computing hidden activations from `layer` batch by batch when the
// full activation matrix would be too large to hold.
ReadoutModel train_readout(const BcpnnLayer& layer, const EncodedDataset& data,
                           const TrainConfig& config);

struct Predictions {
  std::vector<double> scores;         // P(signal)
  std::vector<std::uint8_t> labels;   // argmax, ties -> background
};

Predictions predict(const BcpnnLayer& hidden, const ReadoutModel& readout,
                    const EncodedDataset& samples);

inline constexpr std::uint32_t kReadoutFormatVersion = 1;
void save_readout(const ReadoutModel& model, const std::filesystem::path& path,
                  std::string_view provenance = {});
ReadoutModel load_readout(const std::filesystem::path& path, std::string* provenance = nullptr);

}  // namespace bcpnn
