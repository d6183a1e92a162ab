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

#include "bcpnn/layer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "layer_io.hpp"
#include "bcpnn/error.hpp"
#include "bcpnn/parallel.hpp"

namespace bcpnn {

std::size_t LayerGeometry::n_blocks() const {
  if (granularity == MaskGranularity::kComponent || block_size == 0) return n_inputs;
  return n_inputs / block_size;
}

std::size_t LayerGeometry::active_per_hcu() const {
  if (density <= 0.0) return 0;
  const std::size_t units = n_blocks();
  auto k = static_cast<std::size_t>(std::llround(density * static_cast<double>(units)));
  k = std::clamp<std::size_t>(k, 1, units);
  return granularity == MaskGranularity::kBlock ? k * block_size : k;
}

void LayerGeometry::validate() const {
  if (n_inputs == 0 || n_hcus == 0 || n_mcus == 0) {
    throw ConfigError("layer geometry needs positive n_inputs, n_hcus and n_mcus");
  }
  if (!(density >= 0.0 && density <= 1.0)) throw ConfigError("density must lie in [0, 1]");
  if (granularity == MaskGranularity::kBlock &&
      (block_size == 0 || n_inputs % block_size != 0)) {
    throw ConfigError("block mask granularity needs block_size dividing n_inputs");
  }
}

namespace {

// The weight of a (joint, in, out) trace triple. Denominator in float so
// that p_joint == fl(p_in * p_out) gives exactly zero when both
// regularisers are zero.
inline float log_odds(float joint, float in, float out, const Regularization& reg) {
  const float denom = (in + reg.marginal) * (out + reg.marginal);
  return std::log((joint + reg.joint) / denom);
}

void check_activations(const RowMatrix& activations, std::size_t rows, std::size_t units) {
  if (static_cast<std::size_t>(activations.rows()) != rows ||
      static_cast<std::size_t>(activations.cols()) != units) {
    throw ShapeError("activation matrix is " + std::to_string(activations.rows()) + "x" +
                     std::to_string(activations.cols()) + ", expected " + std::to_string(rows) +
                     "x" + std::to_string(units));
  }
}

}  // namespace

BcpnnLayer BcpnnLayer::create(const LayerGeometry& geometry, const LayerOptions& options) {
  geometry.validate();
  if (!(options.alpha > 0.0f && options.alpha <= 1.0f)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(options.input_prior > 0.0f && options.input_prior < 1.0f)) {
    throw ConfigError("input_prior must lie in (0, 1)");
  }

  BcpnnLayer layer;
  layer.geometry_ = geometry;
  layer.seed_ = options.seed;
  layer.reg_ = options.regularization.value_or(Regularization::from_alpha(options.alpha));
  if (!(layer.reg_.joint >= 0.0f && layer.reg_.marginal >= 0.0f)) {
    throw ConfigError("regularisers must be non-negative");
  }
  if (!std::isfinite(options.prior_gain)) throw ConfigError("prior_gain must be finite");
  layer.prior_gain_ = options.prior_gain;

  const std::size_t n_in = geometry.n_inputs;
  const std::size_t units = geometry.n_units();
  layer.mask_.assign(geometry.n_hcus * n_in, 0);
  std::mt19937_64 rng(options.seed);
  const std::size_t block = geometry.granularity == MaskGranularity::kBlock ? geometry.block_size : 1;
  const std::size_t n_blocks = geometry.n_blocks();
  const std::size_t active_blocks = geometry.active_per_hcu() / block;
  std::vector<std::size_t> order(n_blocks);
  for (std::size_t h = 0; h < geometry.n_hcus; ++h) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < active_blocks; ++k) {
      for (std::size_t c = 0; c < block; ++c) layer.mask_[h * n_in + order[k] * block + c] = 1;
    }
  }

  auto& t = layer.traces_;
  t.alpha = options.alpha;
  t.p_in = Eigen::VectorXf::Constant(static_cast<Eigen::Index>(n_in), options.input_prior);
  t.p_out = Eigen::VectorXf::Constant(static_cast<Eigen::Index>(units),
                                      1.0f / static_cast<float>(geometry.n_mcus));
  t.p_joint = RowMatrix::Constant(static_cast<Eigen::Index>(n_in), static_cast<Eigen::Index>(units),
                                  options.input_prior * t.p_out[0]);

  layer.weights_ = RowMatrix::Zero(static_cast<Eigen::Index>(n_in), static_cast<Eigen::Index>(units));
  layer.bias_ = Eigen::VectorXf::Constant(static_cast<Eigen::Index>(units),
                                          options.prior_gain * std::log(t.p_out[0] + layer.reg_.marginal));
  return layer;
}

void BcpnnLayer::set_traces(TraceState traces) {
  const auto n_in = static_cast<Eigen::Index>(geometry_.n_inputs);
  const auto units = static_cast<Eigen::Index>(geometry_.n_units());
  if (traces.p_in.size() != n_in || traces.p_out.size() != units || traces.p_joint.rows() != n_in ||
      traces.p_joint.cols() != units) {
    throw ShapeError("trace shapes do not match the layer geometry");
  }
  traces_ = std::move(traces);
}

std::size_t BcpnnLayer::active_count(std::size_t hcu) const {
  const auto row = mask_row(hcu);
  return static_cast<std::size_t>(std::count(row.begin(), row.end(), std::uint8_t{1}));
}

void BcpnnLayer::set_mask(std::span<const std::uint8_t> mask) {
  if (mask.size() != mask_.size()) throw ShapeError("mask size does not match H x n_inputs");
  for (const auto m : mask) {
    if (m > 1) throw ShapeError("mask entries must be 0 or 1");
  }
  mask_.assign(mask.begin(), mask.end());
}

void BcpnnLayer::set_parameters(RowMatrix weights, Eigen::VectorXf bias) {
  if (weights.rows() != static_cast<Eigen::Index>(geometry_.n_inputs) ||
      weights.cols() != static_cast<Eigen::Index>(geometry_.n_units()) ||
      bias.size() != static_cast<Eigen::Index>(geometry_.n_units())) {
    throw ShapeError("parameter shapes do not match the layer geometry");
  }
  weights_ = std::move(weights);
  bias_ = std::move(bias);
}

void BcpnnLayer::add_noise(RowMatrix& support, const SupportNoise& noise) const {
  if (noise.rng == nullptr || noise.amplitude == 0.0f) return;
  std::uniform_real_distribution<float> dist(-noise.amplitude, noise.amplitude);
  for (Eigen::Index r = 0; r < support.rows(); ++r) {
    for (Eigen::Index c = 0; c < support.cols(); ++c) support(r, c) += dist(*noise.rng);
  }
}

void BcpnnLayer::softmax_in_place(RowMatrix& support) const {
  const auto m = static_cast<Eigen::Index>(geometry_.n_mcus);
  const auto n_hcus = static_cast<Eigen::Index>(geometry_.n_hcus);
  parallel_for(static_cast<std::size_t>(support.rows()), [&](std::size_t begin, std::size_t end) {
    for (auto r = static_cast<Eigen::Index>(begin); r < static_cast<Eigen::Index>(end); ++r) {
      for (Eigen::Index h = 0; h < n_hcus; ++h) {
        auto seg = support.row(r).segment(h * m, m);
        const float peak = seg.maxCoeff();
        seg = (seg.array() - peak).exp();
        seg /= seg.sum();
      }
    }
  });
}

RowMatrix BcpnnLayer::forward(const RowMatrix& inputs, const SupportNoise& noise) const {
  if (static_cast<std::size_t>(inputs.cols()) != geometry_.n_inputs) {
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " does not match layer width " +
                     std::to_string(geometry_.n_inputs));
  }
  const bool full = std::all_of(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; });
  RowMatrix support;
  if (full) {
    support = inputs * weights_;
  } else {
    RowMatrix masked = weights_;
    const auto m = static_cast<Eigen::Index>(geometry_.n_mcus);
    for (std::size_t h = 0; h < geometry_.n_hcus; ++h) {
      for (std::size_t i = 0; i < geometry_.n_inputs; ++i) {
        if (!is_active(h, i)) {
          masked.row(static_cast<Eigen::Index>(i)).segment(static_cast<Eigen::Index>(h) * m, m).setZero();
        }
      }
    }
    support = inputs * masked;
  }
  support.rowwise() += bias_.transpose();
  add_noise(support, noise);
  softmax_in_place(support);
  return support;
}

RowMatrix BcpnnLayer::forward(const SparseBinaryBatch& inputs, const SupportNoise& noise) const {
  if (inputs.active.size() != inputs.rows * inputs.ones_per_row) {
    throw ShapeError("sparse batch index count does not match rows x ones_per_row");
  }
  for (const auto idx : inputs.active) {
    if (idx >= geometry_.n_inputs) throw ShapeError("sparse input index outside layer width");
  }
  const auto m = static_cast<Eigen::Index>(geometry_.n_mcus);
  RowMatrix support(static_cast<Eigen::Index>(inputs.rows), static_cast<Eigen::Index>(geometry_.n_units()));
  parallel_for(inputs.rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      auto out = support.row(static_cast<Eigen::Index>(r));
      out = bias_.transpose();
      const auto* idx = inputs.active.data() + r * inputs.ones_per_row;
      for (std::size_t k = 0; k < inputs.ones_per_row; ++k) {
        const std::size_t i = idx[k];
        const auto w = weights_.row(static_cast<Eigen::Index>(i));
        for (std::size_t h = 0; h < geometry_.n_hcus; ++h) {
          if (is_active(h, i)) {
            const auto off = static_cast<Eigen::Index>(h) * m;
            out.segment(off, m) += w.segment(off, m);
          }
        }
      }
    }
  });
  add_noise(support, noise);
  softmax_in_place(support);
  return support;
}

void BcpnnLayer::apply_ema(const Eigen::VectorXf& in_obs, const Eigen::VectorXf& out_obs,
                           const RowMatrix& joint_obs) {
  // Same expression shape for all three families so rounding stays
  // monotone and p_joint <= min(p_in, p_out) survives in float.
  const float a = traces_.alpha;
  const float keep = 1.0f - a;
  traces_.p_in = traces_.p_in * keep + in_obs * a;
  traces_.p_out = traces_.p_out * keep + out_obs * a;
  traces_.p_joint = traces_.p_joint * keep + joint_obs * a;
}

void BcpnnLayer::update_traces(const SparseBinaryBatch& inputs, const RowMatrix& activations,
                               TraceUpdate mode) {
  check_activations(activations, inputs.rows, geometry_.n_units());
  if (inputs.active.size() != inputs.rows * inputs.ones_per_row) {
    throw ShapeError("sparse batch index count does not match rows x ones_per_row");
  }
  for (const auto idx : inputs.active) {
    if (idx >= geometry_.n_inputs) throw ShapeError("sparse input index outside layer width");
  }
  if (inputs.rows == 0) return;
  const auto n_in = static_cast<Eigen::Index>(geometry_.n_inputs);
  const auto units = static_cast<Eigen::Index>(geometry_.n_units());
  Eigen::VectorXf in_acc(n_in);
  Eigen::VectorXf out_acc(units);
  RowMatrix joint_acc(n_in, units);

  auto accumulate = [&](std::size_t begin, std::size_t end) {
    in_acc.setZero();
    out_acc.setZero();
    joint_acc.setZero();
    for (std::size_t r = begin; r < end; ++r) {
      const auto a = activations.row(static_cast<Eigen::Index>(r));
      out_acc += a.transpose();
      const auto* idx = inputs.active.data() + r * inputs.ones_per_row;
      for (std::size_t k = 0; k < inputs.ones_per_row; ++k) {
        in_acc[idx[k]] += 1.0f;
        joint_acc.row(idx[k]) += a;
      }
    }
    const auto n = static_cast<float>(end - begin);
    in_acc /= n;
    out_acc /= n;
    joint_acc /= n;
    apply_ema(in_acc, out_acc, joint_acc);
  };

  if (mode == TraceUpdate::kBatchMean) {
    accumulate(0, inputs.rows);
  } else {
    for (std::size_t r = 0; r < inputs.rows; ++r) accumulate(r, r + 1);
  }
}

void BcpnnLayer::update_traces(const RowMatrix& inputs, const RowMatrix& activations,
                               TraceUpdate mode) {
  if (static_cast<std::size_t>(inputs.cols()) != geometry_.n_inputs) {
    throw ShapeError("input width does not match layer width");
  }
  const auto rows = static_cast<std::size_t>(inputs.rows());
  check_activations(activations, rows, geometry_.n_units());
  if (rows == 0) return;
  const auto n_in = static_cast<Eigen::Index>(geometry_.n_inputs);
  const auto units = static_cast<Eigen::Index>(geometry_.n_units());
  Eigen::VectorXf in_acc(n_in);
  Eigen::VectorXf out_acc(units);
  RowMatrix joint_acc(n_in, units);

  auto accumulate = [&](std::size_t begin, std::size_t end) {
    in_acc.setZero();
    out_acc.setZero();
    joint_acc.setZero();
    for (std::size_t r = begin; r < end; ++r) {
      const auto a = activations.row(static_cast<Eigen::Index>(r));
      out_acc += a.transpose();
      for (Eigen::Index i = 0; i < n_in; ++i) {
        const float x = inputs(static_cast<Eigen::Index>(r), i);
        if (x == 0.0f) continue;
        in_acc[i] += x;
        joint_acc.row(i) += x * a;
      }
    }
    const auto n = static_cast<float>(end - begin);
    in_acc /= n;
    out_acc /= n;
    joint_acc /= n;
    apply_ema(in_acc, out_acc, joint_acc);
  };

  if (mode == TraceUpdate::kBatchMean) {
    accumulate(0, rows);
  } else {
    for (std::size_t r = 0; r < rows; ++r) accumulate(r, r + 1);
  }
}

void BcpnnLayer::refresh_weights_for(std::size_t hcu, std::size_t input_begin, std::size_t input_end) {
  const auto m = static_cast<Eigen::Index>(geometry_.n_mcus);
  const auto off = static_cast<Eigen::Index>(hcu) * m;
  for (std::size_t i = input_begin; i < input_end; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const float p_in = traces_.p_in[ii];
    for (Eigen::Index j = off; j < off + m; ++j) {
      weights_(ii, j) = log_odds(traces_.p_joint(ii, j), p_in, traces_.p_out[j], reg_);
    }
  }
}

void BcpnnLayer::recompute_weights(bool active_only) {
  bias_ = (prior_gain_ * (traces_.p_out.array() + reg_.marginal).log()).matrix();
  parallel_for(geometry_.n_hcus, [&](std::size_t begin, std::size_t end) {
    for (std::size_t h = begin; h < end; ++h) {
      for (std::size_t i = 0; i < geometry_.n_inputs; ++i) {
        if (!active_only || is_active(h, i)) refresh_weights_for(h, i, i + 1);
      }
    }
  }, 1);
}

double mi_score(const TraceState& traces, const Regularization& reg, std::size_t n_mcus,
                std::size_t input, std::size_t hcu) {
  const auto i = static_cast<Eigen::Index>(input);
  const auto off = static_cast<Eigen::Index>(hcu * n_mcus);
  if (i >= traces.p_in.size() || off + static_cast<Eigen::Index>(n_mcus) > traces.p_out.size()) {
    throw ShapeError("mi_score index outside the trace state");
  }
  double score = 0.0;
  for (Eigen::Index j = off; j < off + static_cast<Eigen::Index>(n_mcus); ++j) {
    const float joint = traces.p_joint(i, j);
    if (joint == 0.0f) continue;  // p log p -> 0
    score += static_cast<double>(joint) *
             static_cast<double>(log_odds(joint, traces.p_in[i], traces.p_out[j], reg));
  }
  return score;
}

double BcpnnLayer::mi_score(std::size_t input, std::size_t hcu) const {
  return bcpnn::mi_score(traces_, reg_, geometry_.n_mcus, input, hcu);
}

SwapReport BcpnnLayer::plasticity_step(std::size_t max_swaps) {
  SwapReport report;
  const std::size_t block = geometry_.granularity == MaskGranularity::kBlock ? geometry_.block_size : 1;
  const std::size_t n_blocks = geometry_.n_blocks();

  struct Scored {
    double score;
    std::size_t block;
  };
  std::vector<Scored> active;
  std::vector<Scored> silent;
  for (std::size_t h = 0; h < geometry_.n_hcus; ++h) {
    active.clear();
    silent.clear();
    for (std::size_t b = 0; b < n_blocks; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < block; ++c) s += mi_score(b * block + c, h);
      (is_active(h, b * block) ? active : silent).push_back({s, b});
    }
    std::sort(active.begin(), active.end(), [](const Scored& x, const Scored& y) {
      return x.score < y.score || (x.score == y.score && x.block < y.block);
    });
    std::sort(silent.begin(), silent.end(), [](const Scored& x, const Scored& y) {
      return x.score > y.score || (x.score == y.score && x.block < y.block);
    });
    const std::size_t limit = std::min({max_swaps, active.size(), silent.size()});
    for (std::size_t k = 0; k < limit; ++k) {
      if (!(silent[k].score > active[k].score)) break;
      const std::size_t out_start = active[k].block * block;
      const std::size_t in_start = silent[k].block * block;
      for (std::size_t c = 0; c < block; ++c) {
        mask_[h * geometry_.n_inputs + out_start + c] = 0;
        mask_[h * geometry_.n_inputs + in_start + c] = 1;
      }
      refresh_weights_for(h, in_start, in_start + block);
      report.swaps.push_back({h, out_start, in_start, silent[k].score - active[k].score});
    }
  }
  return report;
}

bool BcpnnLayer::operator==(const BcpnnLayer& other) const {
  return geometry_ == other.geometry_ && seed_ == other.seed_ && reg_ == other.reg_ &&
         prior_gain_ == other.prior_gain_ &&
         mask_ == other.mask_ && traces_.alpha == other.traces_.alpha &&
         traces_.p_in == other.traces_.p_in && traces_.p_out == other.traces_.p_out &&
         traces_.p_joint == other.traces_.p_joint && weights_ == other.weights_ &&
         bias_ == other.bias_ && epochs_completed_ == other.epochs_completed_;
}

MaskGrid snapshot_mask(const BcpnnLayer& layer) {
  MaskGrid grid;
  grid.rows = layer.geometry().n_hcus;
  grid.cols = layer.geometry().n_inputs;
  grid.cells.assign(layer.mask().begin(), layer.mask().end());
  return grid;
}

std::string to_pgm(const MaskGrid& grid, std::string_view comment) {
  std::ostringstream out;
  out << "P2\n";
  std::istringstream lines{std::string(comment)};
  for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
  out << grid.cols << ' ' << grid.rows << "\n1\n";
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      if (c) out << ' ';
      out << static_cast<int>(grid.cells[r * grid.cols + c]);
    }
    out << '\n';
  }
  return out.str();
}

MaskGrid parse_pgm(std::string_view text) {
  // Tokenise, dropping "#" comments to end of line.
  std::vector<std::string> tokens;
  std::string current;
  bool in_comment = false;
  for (const char ch : text) {
    if (in_comment) {
      if (ch == '\n') in_comment = false;
      continue;
    }
    if (ch == '#') {
      in_comment = true;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
      continue;
    } else {
      current.push_back(ch);
      continue;
    }
    if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
  }
  if (!current.empty()) tokens.push_back(std::move(current));

  if (tokens.size() < 4 || tokens[0] != "P2") throw FormatError("not a P2 graymap");
  MaskGrid grid;
  try {
    grid.cols = std::stoul(tokens[1]);
    grid.rows = std::stoul(tokens[2]);
    if (std::stoul(tokens[3]) != 1) throw FormatError("mask graymap must have maxval 1");
  } catch (const std::logic_error&) {
    throw FormatError("malformed P2 header");
  }
  if (tokens.size() != 4 + grid.rows * grid.cols) throw FormatError("P2 pixel count does not match header");
  grid.cells.reserve(grid.rows * grid.cols);
  for (std::size_t k = 4; k < tokens.size(); ++k) {
    if (tokens[k] != "0" && tokens[k] != "1") throw FormatError("mask pixel must be 0 or 1");
    grid.cells.push_back(tokens[k] == "1" ? 1 : 0);
  }
  return grid;
}

std::vector<std::filesystem::path> write_mask_snapshot(const BcpnnLayer& layer,
                                                       const std::filesystem::path& dir,
                                                       std::size_t epoch, std::size_t image_width,
                                                       std::string_view comment) {
  std::filesystem::create_directories(dir);
  const std::size_t n_in = layer.geometry().n_inputs;
  const std::size_t width = (image_width > 0 && n_in % image_width == 0) ? image_width : n_in;
  std::vector<std::filesystem::path> written;
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t h = 0; h < layer.geometry().n_hcus; ++h) {
    MaskGrid grid;
    grid.rows = n_in / width;
    grid.cols = width;
    const auto row = layer.mask_row(h);
    grid.cells.assign(row.begin(), row.end());
    char name[64];
    std::snprintf(name, sizeof(name), "hcu%03zu_epoch%04zu.pgm", h, epoch);
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_pgm(grid, comment);
    if (!out) throw IoError("write failed: " + path.string());
    written.push_back(path);
    files.push_back(name);
  }

  const auto index_path = dir / "index.json";
  nlohmann::json index = {{"format", "bcpnn.masks"}, {"version", 1}, {"epochs", nlohmann::json::object()}};
  if (std::filesystem::exists(index_path)) {
    std::ifstream in(index_path);
    try {
      index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(index_path.string() + ": " + e.what());
    }
  }
  index["epochs"][std::to_string(epoch)] = files;
  std::ofstream out(index_path);
  out << index.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + index_path.string());
  return written;
}

namespace {

constexpr std::string_view kLayerMagic = "BCPNNLYR";

template <typename Derived>
void write_matrix(detail::BinaryWriter& w, const Eigen::PlainObjectBase<Derived>& m) {
  w.value<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  w.value<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
  w.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(typename Derived::Scalar));
}

template <typename Derived>
void read_matrix(detail::BinaryReader& r, Eigen::PlainObjectBase<Derived>& m) {
  const auto rows = r.value<std::uint64_t>();
  const auto cols = r.value<std::uint64_t>();
  r.require_remaining(rows * cols * sizeof(typename Derived::Scalar));
  m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  r.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(typename Derived::Scalar));
}

}  // namespace

void detail::write_layer(BinaryWriter& w, const BcpnnLayer& layer) {
  const auto& g = layer.geometry();
  w.value<std::uint64_t>(g.n_inputs);
  w.value<std::uint64_t>(g.n_hcus);
  w.value<std::uint64_t>(g.n_mcus);
  w.value<double>(g.density);
  w.value<std::uint8_t>(static_cast<std::uint8_t>(g.granularity));
  w.value<std::uint64_t>(g.block_size);
  w.value<std::uint64_t>(layer.seed());
  w.value<float>(layer.regularization().joint);
  w.value<float>(layer.regularization().marginal);
  w.value<float>(layer.prior_gain());
  w.value<std::uint64_t>(layer.epochs_completed());
  w.value<float>(layer.traces().alpha);
  w.array<std::uint8_t>(layer.mask());
  write_matrix(w, layer.traces().p_in);
  write_matrix(w, layer.traces().p_out);
  write_matrix(w, layer.traces().p_joint);
  write_matrix(w, layer.weights());
  write_matrix(w, layer.bias());
}

BcpnnLayer detail::read_layer(BinaryReader& r, const std::filesystem::path& path) {
  LayerGeometry g;
  g.n_inputs = r.value<std::uint64_t>();
  g.n_hcus = r.value<std::uint64_t>();
  g.n_mcus = r.value<std::uint64_t>();
  g.density = r.value<double>();
  const auto gran = r.value<std::uint8_t>();
  if (gran > 1) throw CacheError(path.string() + ": unknown mask granularity");
  g.granularity = static_cast<MaskGranularity>(gran);
  g.block_size = r.value<std::uint64_t>();
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw CacheError(path.string() + ": " + e.what());
  }
  const auto seed = r.value<std::uint64_t>();
  Regularization reg;
  reg.joint = r.value<float>();
  reg.marginal = r.value<float>();
  const auto prior_gain = r.value<float>();
  const auto epochs = r.value<std::uint64_t>();
  TraceState traces;
  traces.alpha = r.value<float>();

  r.require_remaining(g.n_hcus * g.n_inputs);
  std::vector<std::uint8_t> mask(g.n_hcus * g.n_inputs);
  r.array<std::uint8_t>(mask);
  read_matrix(r, traces.p_in);
  read_matrix(r, traces.p_out);
  read_matrix(r, traces.p_joint);
  RowMatrix weights;
  Eigen::VectorXf bias;
  read_matrix(r, weights);
  read_matrix(r, bias);

  LayerOptions options;
  options.alpha = traces.alpha;
  options.seed = seed;
  options.regularization = reg;
  options.prior_gain = prior_gain;
  BcpnnLayer layer;
  try {
    layer = BcpnnLayer::create(g, options);
    layer.set_mask(mask);
    layer.set_traces(std::move(traces));
    layer.set_parameters(std::move(weights), std::move(bias));
  } catch (const Error& e) {
    throw CacheError(path.string() + ": " + e.what());
  }
  layer.set_regularization(reg);
  layer.set_epochs_completed(epochs);
  return layer;
}

void save_layer(const BcpnnLayer& layer, const std::filesystem::path& path, std::string_view provenance) {
  detail::BinaryWriter w(path);
  w.magic(kLayerMagic);
  w.value<std::uint32_t>(kLayerFormatVersion);
  w.string(provenance);
  detail::write_layer(w, layer);
  w.finish();
}

BcpnnLayer load_layer(const std::filesystem::path& path, std::string* provenance) {
  detail::BinaryReader r(path, kLayerMagic);
  r.expect_version(kLayerFormatVersion);
  auto tag = r.string();
  BcpnnLayer layer = detail::read_layer(r, path);
  r.expect_end();
  if (provenance) *provenance = std::move(tag);
  return layer;
}

}  // namespace bcpnn
