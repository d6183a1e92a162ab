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

#include "bcpnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "layer_io.hpp"
#include "bcpnn/error.hpp"

namespace bcpnn {

std::string_view to_string(ReadoutKind kind) {
  return kind == ReadoutKind::kBcpnn ? "bcpnn" : "sgd";
}

ReadoutKind parse_readout_kind(std::string_view text) {
  if (text == "bcpnn") return ReadoutKind::kBcpnn;
  if (text == "sgd") return ReadoutKind::kSgd;
  throw ConfigError("unknown readout '" + std::string(text) + "' (expected bcpnn or sgd)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(alpha > 0.0f && alpha <= 1.0f)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(noise_amplitude >= 0.0f)) throw ConfigError("noise_amplitude must be non-negative");
  if (regularization && !(regularization->joint >= 0.0f && regularization->marginal >= 0.0f)) {
    throw ConfigError("regularisers must be non-negative");
  }
  if (!std::isfinite(prior_gain)) throw ConfigError("prior_gain must be finite");
  if (readout == ReadoutKind::kSgd) {
    if (!(sgd_lr > 0.0)) throw ConfigError("sgd_lr must be positive");
    if (sgd_epochs < 1) throw ConfigError("sgd_epochs must be at least 1");
    if (sgd_batch_size < 1) throw ConfigError("sgd_batch_size must be at least 1");
  }
}

LayerOptions TrainConfig::hidden_options(std::uint64_t layer_seed, float input_prior) const {
  LayerOptions options;
  options.alpha = alpha;
  options.seed = layer_seed;
  options.input_prior = input_prior;
  options.regularization = regularization;
  options.prior_gain = prior_gain;
  return options;
}

std::size_t TrainConfig::swaps_for(const LayerGeometry& geometry) const {
  if (plasticity_swaps > 0) return plasticity_swaps;
  const std::size_t block =
      geometry.granularity == MaskGranularity::kBlock ? geometry.block_size : 1;
  const std::size_t active = geometry.active_per_hcu() / block;
  return std::max<std::size_t>(1, active / 100);
}

std::string EpochLog::to_csv(std::string_view header_comment) const {
  std::ostringstream out;
  std::istringstream lines{std::string(header_comment)};
  for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
  out << "epoch,seconds,swaps,train_acc,heldout_acc\n";
  out.precision(10);
  for (const auto& r : records) {
    out << r.epoch << ',' << r.seconds << ',' << r.swaps << ',';
    if (r.train_accuracy) out << *r.train_accuracy;
    out << ',';
    if (r.heldout_accuracy) out << *r.heldout_accuracy;
    out << '\n';
  }
  return out.str();
}

namespace {

// Per-epoch stream; `stream` separates independent consumers.
std::mt19937_64 epoch_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(epoch >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kHiddenStream = 0x48494444;   // "HIDD"
constexpr std::uint64_t kReadoutStream = 0x52454144;  // "READ"
constexpr std::uint64_t kSgdStream = 0x53474400;      // "SGD"

void gather_hot(const EncodedDataset& data, std::span<const std::size_t> rows,
                std::vector<std::uint32_t>& buffer) {
  const std::size_t nf = data.n_features();
  buffer.resize(rows.size() * nf);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto h = data.hot(rows[k]);
    std::copy(h.begin(), h.end(), buffer.begin() + static_cast<std::ptrdiff_t>(k * nf));
  }
}

void require_two_classes(std::span<const std::uint8_t> labels) {
  bool seen[2] = {false, false};
  for (const auto l : labels) {
    if (l > 1) throw DegenerateDataError("label outside {0,1}");
    seen[l] = true;
  }
  if (!seen[0] || !seen[1]) throw DegenerateDataError("readout training needs both classes present");
}

}  // namespace

EpochLog train_hidden(BcpnnLayer& layer, const EncodedDataset& data, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  if (data.width() != layer.geometry().n_inputs) {
    throw ShapeError("encoded width " + std::to_string(data.width()) + " does not match layer inputs " +
                     std::to_string(layer.geometry().n_inputs));
  }
  if (data.rows() == 0) throw DegenerateDataError("cannot train on an empty dataset");

  EpochLog log;
  if (layer.geometry().active_per_hcu() == 0) {
    log.warnings.push_back("receptive field density is 0: the layer sees no input and its output stays uniform");
  }
  const std::size_t swaps = config.swaps_for(layer.geometry());

  std::vector<std::size_t> order(data.rows());
  std::vector<std::uint32_t> buffer;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const std::size_t epoch = layer.epochs_completed() + 1;
    const auto start = std::chrono::steady_clock::now();
    auto rng = epoch_rng(config.seed, kHiddenStream, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      gather_hot(data, rows, buffer);
      const SparseBinaryBatch batch{rows.size(), data.n_features(), buffer};
      const RowMatrix act = layer.forward(batch, SupportNoise{&rng, config.noise_amplitude});
      layer.update_traces(batch, act, config.trace_update);
      layer.recompute_weights(/*active_only=*/true);
    }
    const SwapReport report = layer.plasticity_step(swaps);
    layer.recompute_weights();
    layer.set_epochs_completed(epoch);

    EpochRecord record;
    record.epoch = epoch;
    record.swaps = report.count();
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.records.push_back(record);
    if (on_epoch) on_epoch(layer, record);
  }
  return log;
}

RowMatrix hidden_activations(const BcpnnLayer& layer, const EncodedDataset& data,
                             std::span<const std::size_t> rows) {
  if (data.width() != layer.geometry().n_inputs) {
    throw ShapeError("encoded width does not match layer inputs");
  }
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(data.rows());
    std::iota(all.begin(), all.end(), 0);
    rows = all;
  }
  RowMatrix out(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(layer.geometry().n_units()));
  constexpr std::size_t kChunk = 2048;
  std::vector<std::uint32_t> buffer;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const std::size_t end = std::min(rows.size(), begin + kChunk);
    gather_hot(data, rows.subspan(begin, end - begin), buffer);
    out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        layer.forward(SparseBinaryBatch{end - begin, data.n_features(), buffer});
  }
  return out;
}

double SgdReadout::loss_and_gradient(const Eigen::MatrixXd& weights, const Eigen::Vector2d& bias,
                                     const Eigen::MatrixXd& inputs,
                                     std::span<const std::uint8_t> labels,
                                     Eigen::MatrixXd* grad_weights, Eigen::Vector2d* grad_bias) {
  const auto n = inputs.rows();
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw ShapeError("sgd batch rows do not match labels");
  }
  if (inputs.cols() != weights.rows() || weights.cols() != 2) {
    throw ShapeError("sgd weight shape does not match inputs");
  }
  Eigen::MatrixXd logits = inputs * weights;
  logits.rowwise() += bias.transpose();
  double loss = 0.0;
  Eigen::MatrixXd delta(n, 2);  // softmax - onehot
  for (Eigen::Index r = 0; r < n; ++r) {
    const double peak = logits.row(r).maxCoeff();
    const double e0 = std::exp(logits(r, 0) - peak);
    const double e1 = std::exp(logits(r, 1) - peak);
    const double log_z = peak + std::log(e0 + e1);
    const int y = labels[static_cast<std::size_t>(r)];
    loss += log_z - logits(r, y);
    delta(r, 0) = e0 / (e0 + e1) - (y == 0 ? 1.0 : 0.0);
    delta(r, 1) = e1 / (e0 + e1) - (y == 1 ? 1.0 : 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad_weights) *grad_weights = inputs.transpose() * delta * inv_n;
  if (grad_bias) *grad_bias = delta.colwise().sum().transpose() * inv_n;
  return loss * inv_n;
}

std::size_t ReadoutModel::n_inputs() const {
  return kind == ReadoutKind::kBcpnn ? bcpnn.geometry().n_inputs
                                     : static_cast<std::size_t>(sgd.weights.rows());
}

Eigen::MatrixXd ReadoutModel::probabilities(const RowMatrix& hidden) const {
  if (static_cast<std::size_t>(hidden.cols()) != n_inputs()) {
    throw ShapeError("hidden width " + std::to_string(hidden.cols()) + " does not match readout inputs " +
                     std::to_string(n_inputs()));
  }
  if (kind == ReadoutKind::kBcpnn) return bcpnn.forward(hidden).cast<double>();
  Eigen::MatrixXd logits = hidden.cast<double>() * sgd.weights;
  logits.rowwise() += sgd.bias.transpose();
  Eigen::MatrixXd probs(logits.rows(), 2);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    const double e0 = std::exp(logits(r, 0) - peak);
    const double e1 = std::exp(logits(r, 1) - peak);
    probs(r, 0) = e0 / (e0 + e1);
    probs(r, 1) = e1 / (e0 + e1);
  }
  return probs;
}

namespace {

using RowProvider = std::function<RowMatrix(std::span<const std::size_t>)>;

ReadoutModel train_readout_impl(std::size_t n_rows, std::size_t n_inputs,
                                std::span<const std::uint8_t> labels, const RowProvider& rows_of,
                                float input_prior, const TrainConfig& config) {
  config.validate();
  if (labels.size() != n_rows) throw ShapeError("hidden rows do not match label count");
  require_two_classes(labels);

  ReadoutModel model;
  model.kind = config.readout;
  std::vector<std::size_t> order(n_rows);

  if (config.readout == ReadoutKind::kBcpnn) {
    LayerGeometry g{n_inputs, 1, 2, 1.0};
    LayerOptions options;
    options.alpha = config.alpha;
    options.seed = config.seed;
    options.input_prior = std::clamp(input_prior, 1e-6f, 1.0f - 1e-6f);
    model.bcpnn = BcpnnLayer::create(g, options);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      auto rng = epoch_rng(config.seed, kReadoutStream, epoch);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t begin = 0; begin < n_rows; begin += config.batch_size) {
        const std::size_t end = std::min(n_rows, begin + config.batch_size);
        const std::span<const std::size_t> rows(order.data() + begin, end - begin);
        const RowMatrix x = rows_of(rows);
        RowMatrix teacher = RowMatrix::Zero(x.rows(), 2);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          teacher(static_cast<Eigen::Index>(k), labels[rows[k]]) = 1.0f;
        }
        model.bcpnn.update_traces(x, teacher, config.trace_update);
        model.bcpnn.recompute_weights();
      }
      model.bcpnn.set_epochs_completed(epoch);
    }
    return model;
  }

  model.sgd.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_inputs), 2);
  model.sgd.bias.setZero();
  Eigen::MatrixXd grad_w;
  Eigen::Vector2d grad_b;
  std::vector<std::uint8_t> batch_labels;
  for (std::size_t epoch = 1; epoch <= config.sgd_epochs; ++epoch) {
    auto rng = epoch_rng(config.seed, kSgdStream, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < n_rows; begin += config.sgd_batch_size) {
      const std::size_t end = std::min(n_rows, begin + config.sgd_batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Eigen::MatrixXd x = rows_of(rows).cast<double>();
      batch_labels.resize(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) batch_labels[k] = labels[rows[k]];
      SgdReadout::loss_and_gradient(model.sgd.weights, model.sgd.bias, x, batch_labels, &grad_w, &grad_b);
      model.sgd.weights -= config.sgd_lr * grad_w;
      model.sgd.bias -= config.sgd_lr * grad_b;
    }
  }
  return model;
}

RowMatrix gather_rows(const RowMatrix& m, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

// Above this the readout recomputes hidden activations per batch instead of
// caching the whole matrix.
constexpr std::size_t kActivationCacheBytes = std::size_t{1} << 30;

}  // namespace

ReadoutModel train_readout(const RowMatrix& hidden, std::span<const std::uint8_t> labels,
                           const TrainConfig& config) {
  const float prior = hidden.size() > 0 ? hidden.mean() : 0.5f;
  return train_readout_impl(
      static_cast<std::size_t>(hidden.rows()), static_cast<std::size_t>(hidden.cols()), labels,
      [&](std::span<const std::size_t> rows) { return gather_rows(hidden, rows); }, prior, config);
}

ReadoutModel train_readout(const BcpnnLayer& layer, const EncodedDataset& data,
                           const TrainConfig& config) {
  const std::size_t units = layer.geometry().n_units();
  const float prior = 1.0f / static_cast<float>(layer.geometry().n_mcus);
  if (data.rows() * units * sizeof(float) <= kActivationCacheBytes) {
    const RowMatrix hidden = hidden_activations(layer, data);
    return train_readout_impl(
        data.rows(), units, data.labels(),
        [&](std::span<const std::size_t> rows) { return gather_rows(hidden, rows); }, prior, config);
  }
  return train_readout_impl(
      data.rows(), units, data.labels(),
      [&](std::span<const std::size_t> rows) { return hidden_activations(layer, data, rows); }, prior,
      config);
}

Predictions predict(const BcpnnLayer& hidden, const ReadoutModel& readout,
                    const EncodedDataset& samples) {
  if (samples.width() != hidden.geometry().n_inputs) {
    throw ShapeError("sample width does not match the hidden layer");
  }
  if (readout.n_inputs() != hidden.geometry().n_units()) {
    throw ShapeError("readout inputs do not match hidden units");
  }
  Predictions out;
  out.scores.resize(samples.rows());
  out.labels.resize(samples.rows());
  constexpr std::size_t kChunk = 4096;
  std::vector<std::size_t> rows;
  for (std::size_t begin = 0; begin < samples.rows(); begin += kChunk) {
    const std::size_t end = std::min(samples.rows(), begin + kChunk);
    rows.resize(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    const Eigen::MatrixXd probs = readout.probabilities(hidden_activations(hidden, samples, rows));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      out.scores[begin + k] = probs(r, 1);
      out.labels[begin + k] = probs(r, 1) > probs(r, 0) ? kSignal : kBackground;
    }
  }
  return out;
}

namespace {
constexpr std::string_view kReadoutMagic = "BCPNNRDO";
}

void save_readout(const ReadoutModel& model, const std::filesystem::path& path,
                  std::string_view provenance) {
  detail::BinaryWriter w(path);
  w.magic(kReadoutMagic);
  w.value<std::uint32_t>(kReadoutFormatVersion);
  w.string(provenance);
  w.value<std::uint8_t>(static_cast<std::uint8_t>(model.kind));
  if (model.kind == ReadoutKind::kBcpnn) {
    detail::write_layer(w, model.bcpnn);
  } else {
    w.value<std::uint64_t>(static_cast<std::uint64_t>(model.sgd.weights.rows()));
    w.bytes(model.sgd.weights.data(), static_cast<std::size_t>(model.sgd.weights.size()) * sizeof(double));
    w.bytes(model.sgd.bias.data(), 2 * sizeof(double));
  }
  w.finish();
}

ReadoutModel load_readout(const std::filesystem::path& path, std::string* provenance) {
  detail::BinaryReader r(path, kReadoutMagic);
  r.expect_version(kReadoutFormatVersion);
  auto tag = r.string();
  ReadoutModel model;
  const auto kind = r.value<std::uint8_t>();
  if (kind > 1) throw CacheError(path.string() + ": unknown readout kind");
  model.kind = static_cast<ReadoutKind>(kind);
  if (model.kind == ReadoutKind::kBcpnn) {
    model.bcpnn = detail::read_layer(r, path);
  } else {
    const auto rows = r.value<std::uint64_t>();
    r.require_remaining(rows * 2 * sizeof(double));
    model.sgd.weights.resize(static_cast<Eigen::Index>(rows), 2);
    r.bytes(model.sgd.weights.data(), rows * 2 * sizeof(double));
    r.bytes(model.sgd.bias.data(), 2 * sizeof(double));
  }
  r.expect_end();
  if (provenance) *provenance = std::move(tag);
  return model;
}

}  // namespace bcpnn
