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

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bcpnn {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class MaskGranularity : std::uint8_t {
  kComponent = 0,  // every input component is masked on its own
  kBlock = 1,      // blocks of `block_size` components are masked together
};

struct LayerGeometry {
  std::size_t n_inputs = 0;
  std::size_t n_hcus = 1;
  std::size_t n_mcus = 1;
  double density = 1.0;
  MaskGranularity granularity = MaskGranularity::kComponent;
  std::size_t block_size = 1;

  std::size_t n_units() const { return n_hcus * n_mcus; }
  std::size_t n_blocks() const;
  // round(d * n_inputs), at least 1 when d > 0. In block mode the count is
  // round(d * n_blocks) whole blocks.
  std::size_t active_per_hcu() const;
  void validate() const;

  bool operator==(const LayerGeometry&) const = default;
};

// Regularisers inside the logs: joint gets `joint`, marginals get `marginal`.
struct Regularization {
  float joint = 0.0f;
  float marginal = 0.0f;

  // joint = alpha^2, marginal = alpha.
  static Regularization from_alpha(float alpha) { return {alpha * alpha, alpha}; }
  bool operator==(const Regularization&) const = default;
};

// Exponential moving averages of unit and pairwise activation. p_joint is
// dense over every (input, unit) pair, masked or not, so silent connections
// can be scored by structural plasticity.
struct TraceState {
  float alpha = 0.001f;
  Eigen::VectorXf p_in;
  Eigen::VectorXf p_out;
  RowMatrix p_joint;  // n_inputs x n_units
};

enum class TraceUpdate : std::uint8_t {
  kBatchMean = 0,  // one EMA step per batch on the batch-mean observation
  kPerSample = 1,  // one EMA step per row
};

// Rows of a binary input matrix given by their 1-positions; each row has
// exactly `ones_per_row` entries, all < n_inputs.
struct SparseBinaryBatch {
  std::size_t rows = 0;
  std::size_t ones_per_row = 0;
  std::span<const std::uint32_t> active;
};

struct SupportNoise {
  std::mt19937_64* rng = nullptr;
  float amplitude = 0.0f;
};

struct Swap {
  std::size_t hcu = 0;
  std::size_t removed = 0;  // input component (block start in block mode)
  std::size_t added = 0;
  double gain = 0.0;        // score(added) - score(removed), always > 0
};

struct SwapReport {
  std::vector<Swap> swaps;
  std::size_t count() const { return swaps.size(); }
};

struct LayerOptions {
  float alpha = 0.001f;
  std::uint64_t seed = 0;
  // Initial p_in; 1/B matches the mean activation of a B-wide one-hot block.
  float input_prior = 0.1f;
  // Unset means Regularization::from_alpha(alpha).
  std::optional<Regularization> regularization;
  // Scale on the log-prior bias. 1 is the plain Bayesian form; 0 drops the
  // prior so units compete on evidence alone.
  float prior_gain = 1.0f;
};

// A hidden (or readout) layer: H hypercolumns of M minicolumns each, with a
// per-hypercolumn receptive-field mask over the inputs. Activations compete
// by softmax inside each hypercolumn.
class BcpnnLayer {
 public:
  BcpnnLayer() = default;

  // Masks drawn uniformly without replacement under options.seed. Traces
  // start at independence, so the initial weights are exactly zero.
  static BcpnnLayer create(const LayerGeometry& geometry, const LayerOptions& options);

  const LayerGeometry& geometry() const { return geometry_; }
  std::uint64_t seed() const { return seed_; }
  float alpha() const { return traces_.alpha; }
  const Regularization& regularization() const { return reg_; }
  void set_regularization(const Regularization& reg) { reg_ = reg; }
  float prior_gain() const { return prior_gain_; }
  // Takes effect at the next recompute_weights.
  void set_prior_gain(float gain) { prior_gain_ = gain; }

  const TraceState& traces() const { return traces_; }
  // Replaces all traces; shapes must match. Weights are not recomputed.
  void set_traces(TraceState traces);

  bool is_active(std::size_t hcu, std::size_t input) const {
    return mask_[hcu * geometry_.n_inputs + input] != 0;
  }
  std::span<const std::uint8_t> mask_row(std::size_t hcu) const {
    return {mask_.data() + hcu * geometry_.n_inputs, geometry_.n_inputs};
  }
  std::span<const std::uint8_t> mask() const { return mask_; }
  std::size_t active_count(std::size_t hcu) const;
  // Replaces the mask of every hypercolumn (H x n_inputs, 0/1).
  void set_mask(std::span<const std::uint8_t> mask);

  const RowMatrix& weights() const { return weights_; }
  const Eigen::VectorXf& bias() const { return bias_; }
  // Hand-set parameters; used by tests and by model loading.
  void set_parameters(RowMatrix weights, Eigen::VectorXf bias);

  // Softmax of bias + masked input within each hypercolumn. Returns
  // rows x n_units. Noise, when given, is added to the support first.
  RowMatrix forward(const RowMatrix& inputs, const SupportNoise& noise = {}) const;
  RowMatrix forward(const SparseBinaryBatch& inputs, const SupportNoise& noise = {}) const;

  void update_traces(const RowMatrix& inputs, const RowMatrix& activations,
                     TraceUpdate mode = TraceUpdate::kBatchMean);
  void update_traces(const SparseBinaryBatch& inputs, const RowMatrix& activations,
                     TraceUpdate mode = TraceUpdate::kBatchMean);

  // w = log((p_joint + e) / ((p_in + e') (p_out + e'))), bias = log(p_out + e').
  // With active_only, silent entries keep their previous values; the forward
  // pass never reads them.
  void recompute_weights(bool active_only = false);

  double mi_score(std::size_t input, std::size_t hcu) const;

  // For each hypercolumn, swaps up to max_swaps (weakest active, strongest
  // silent) pairs while the silent score strictly exceeds the active one.
  SwapReport plasticity_step(std::size_t max_swaps);

  std::size_t epochs_completed() const { return epochs_completed_; }
  void set_epochs_completed(std::size_t n) { epochs_completed_ = n; }

  bool operator==(const BcpnnLayer&) const;

 private:
  std::size_t unit(std::size_t hcu, std::size_t mcu) const { return hcu * geometry_.n_mcus + mcu; }
  void softmax_in_place(RowMatrix& support) const;
  void add_noise(RowMatrix& support, const SupportNoise& noise) const;
  void refresh_weights_for(std::size_t hcu, std::size_t input_begin, std::size_t input_end);
  void apply_ema(const Eigen::VectorXf& in_obs, const Eigen::VectorXf& out_obs,
                 const RowMatrix& joint_obs);

  LayerGeometry geometry_;
  std::uint64_t seed_ = 0;
  Regularization reg_;
  float prior_gain_ = 1.0f;
  std::vector<std::uint8_t> mask_;  // n_hcus x n_inputs
  TraceState traces_;
  RowMatrix weights_;               // n_inputs x n_units
  Eigen::VectorXf bias_;
  std::size_t epochs_completed_ = 0;
};

// Free-function form of BcpnnLayer::mi_score, straight from traces.
double mi_score(const TraceState& traces, const Regularization& reg, std::size_t n_mcus,
                std::size_t input, std::size_t hcu);

// H x n_inputs grid of 0/1 mask values.
struct MaskGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;

  bool operator==(const MaskGrid&) const = default;
};

MaskGrid snapshot_mask(const BcpnnLayer& layer);

// Plain-text P2 graymap with maxval 1; `comment` lines are emitted as "# ...".
std::string to_pgm(const MaskGrid& grid, std::string_view comment = {});
MaskGrid parse_pgm(std::string_view text);

// One PGM per hypercolumn, `image_width` columns wide (10 shows one encoded
// feature per row), named hcu<h>_epoch<e>.pgm, plus index.json mapping
// epoch -> files. Returns the paths written.
std::vector<std::filesystem::path> write_mask_snapshot(const BcpnnLayer& layer,
                                                       const std::filesystem::path& dir,
                                                       std::size_t epoch, std::size_t image_width,
                                                       std::string_view comment = {});

// "BCPNNLYR" v1: geometry, seed, regularisation, epoch count, mask, traces,
// weights, bias, free-form provenance tag, trailing CRC-32. Round-trips exactly.
inline constexpr std::uint32_t kLayerFormatVersion = 2;
void save_layer(const BcpnnLayer& layer, const std::filesystem::path& path,
                std::string_view provenance = {});
BcpnnLayer load_layer(const std::filesystem::path& path, std::string* provenance = nullptr);

}  // namespace bcpnn
