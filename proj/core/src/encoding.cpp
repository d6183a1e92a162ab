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

#include "bcpnn/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "bcpnn/error.hpp"
#include "bcpnn/parallel.hpp"

namespace bcpnn {

namespace {

constexpr std::string_view kTableFormat = "bcpnn.quantiles";
constexpr int kTableVersion = 1;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

QuantileTable::QuantileTable(std::size_t n_bins, std::vector<std::vector<double>> boundaries)
    : n_bins_(n_bins), boundaries_(std::move(boundaries)) {
  if (n_bins_ < 2) throw ConfigError("n_bins must be at least 2");
  for (std::size_t f = 0; f < boundaries_.size(); ++f) {
    const auto& b = boundaries_[f];
    if (b.size() != n_bins_ - 1) {
      throw FitError("feature " + std::to_string(f) + " has " + std::to_string(b.size()) +
                     " cut points, expected " + std::to_string(n_bins_ - 1));
    }
    if (!std::is_sorted(b.begin(), b.end()) ||
        std::any_of(b.begin(), b.end(), [](double v) { return std::isnan(v); })) {
      throw FitError("feature " + std::to_string(f) + " cut points are not non-decreasing");
    }
  }
}

std::string QuantileTable::to_json() const {
  nlohmann::json doc;
  doc["format"] = kTableFormat;
  doc["version"] = kTableVersion;
  doc["n_bins"] = n_bins_;
  auto& features = doc["features"] = nlohmann::json::array();
  for (std::size_t f = 0; f < boundaries_.size(); ++f) {
    features.push_back({{"index", f}, {"boundaries", boundaries_[f]}});
  }
  return doc.dump(1);
}

QuantileTable QuantileTable::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("quantile table: ") + e.what());
  }
  if (doc.value("format", "") != kTableFormat) throw FormatError("not a quantile table document");
  if (doc.value("version", 0) != kTableVersion) {
    throw FormatError("unsupported quantile table version " + doc.value("version", nlohmann::json()).dump());
  }
  try {
    const auto n_bins = doc.at("n_bins").get<std::size_t>();
    const auto& features = doc.at("features");
    std::vector<std::vector<double>> boundaries(features.size());
    for (const auto& entry : features) {
      const auto index = entry.at("index").get<std::size_t>();
      if (index >= boundaries.size()) throw FormatError("feature index out of range");
      boundaries[index] = entry.at("boundaries").get<std::vector<double>>();
    }
    return QuantileTable(n_bins, std::move(boundaries));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("quantile table: ") + e.what());
  }
}

std::string QuantileTable::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(to_json())));
  return buf;
}

std::vector<double> column_quantiles(std::span<const double> column, std::size_t n_bins) {
  if (n_bins < 2) throw ConfigError("n_bins must be at least 2");
  std::vector<double> sorted;
  sorted.reserve(column.size());
  for (const double v : column) {
    if (!std::isnan(v)) sorted.push_back(v);
  }
  if (sorted.empty()) throw FitError("cannot fit quantiles on an empty column");
  std::sort(sorted.begin(), sorted.end());

  const double last = static_cast<double>(sorted.size() - 1);
  std::vector<double> cuts(n_bins - 1);
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double h = last * static_cast<double>(k) / static_cast<double>(n_bins);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    cuts[k - 1] = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  }
  // Interpolation can't reorder cut points, but equal neighbours with
  // rounding could; keep the invariant exact.
  for (std::size_t k = 1; k < cuts.size(); ++k) cuts[k] = std::max(cuts[k], cuts[k - 1]);
  return cuts;
}

QuantileTable fit_quantiles(std::span<const std::vector<double>> columns, std::size_t n_bins) {
  if (n_bins < 2) throw ConfigError("n_bins must be at least 2");
  std::vector<std::vector<double>> boundaries;
  boundaries.reserve(columns.size());
  for (std::size_t f = 0; f < columns.size(); ++f) {
    try {
      boundaries.push_back(column_quantiles(columns[f], n_bins));
    } catch (const FitError& e) {
      throw FitError("feature " + std::to_string(f) + ": " + e.what());
    }
  }
  return QuantileTable(n_bins, std::move(boundaries));
}

QuantileTable fit_quantiles(const RawDataset& dataset, std::size_t n_bins) {
  std::vector<std::vector<double>> columns(dataset.n_features);
  for (auto& c : columns) c.reserve(dataset.rows());
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const auto row = dataset.row(i);
    for (std::size_t f = 0; f < dataset.n_features; ++f) columns[f].push_back(row[f]);
  }
  return fit_quantiles(columns, n_bins);
}

std::size_t encode_value(double value, std::size_t feature, const QuantileTable& table) {
  if (std::isnan(value)) throw EncodingError("NaN in feature " + std::to_string(feature));
  if (feature >= table.n_features()) {
    throw ShapeError("feature index " + std::to_string(feature) + " outside table of " +
                     std::to_string(table.n_features()));
  }
  const auto cuts = table.boundaries(feature);
  return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

EncodedDataset::EncodedDataset(std::size_t n_features, std::size_t n_bins,
                               std::vector<std::uint32_t> hot, std::vector<std::uint8_t> labels)
    : n_features_(n_features), n_bins_(n_bins), hot_(std::move(hot)), labels_(std::move(labels)) {
  if (hot_.size() != labels_.size() * n_features_) {
    throw ShapeError("hot index count does not match rows x features");
  }
}

std::vector<std::uint8_t> EncodedDataset::bits(std::size_t row) const {
  std::vector<std::uint8_t> out(width(), 0);
  for (const auto idx : hot(row)) out[idx] = 1;
  return out;
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
  std::vector<std::uint32_t> hot;
  std::vector<std::uint8_t> labels;
  hot.reserve(rows.size() * n_features_);
  labels.reserve(rows.size());
  for (const auto r : rows) {
    const auto h = this->hot(r);
    hot.insert(hot.end(), h.begin(), h.end());
    labels.push_back(labels_[r]);
  }
  EncodedDataset out(n_features_, n_bins_, std::move(hot), std::move(labels));
  out.source = source;
  out.table_hash = table_hash;
  return out;
}

void EncodedDataset::validate() const {
  for (std::size_t i = 0; i < rows(); ++i) {
    const auto h = hot(i);
    for (std::size_t f = 0; f < n_features_; ++f) {
      if (h[f] < f * n_bins_ || h[f] >= (f + 1) * n_bins_) {
        throw FormatError("row " + std::to_string(i) + " feature " + std::to_string(f) +
                          " has its hot bit outside its block");
      }
    }
    if (labels_[i] > 1) throw FormatError("label outside {0,1}");
  }
}

EncodedDataset encode_dataset(const RawDataset& raw, const QuantileTable& table) {
  if (raw.n_features != table.n_features()) {
    throw ShapeError("dataset has " + std::to_string(raw.n_features) + " features, table has " +
                     std::to_string(table.n_features()));
  }
  const std::size_t n = raw.rows();
  const std::size_t nf = raw.n_features;
  const std::size_t nb = table.n_bins();
  std::vector<std::uint32_t> hot(n * nf);
  std::vector<std::uint8_t> ok(n, 1);

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = raw.row(i);
      for (std::size_t f = 0; f < nf; ++f) {
        if (std::isnan(row[f])) {
          ok[i] = 0;
          break;
        }
        hot[i * nf + f] = static_cast<std::uint32_t>(f * nb + encode_value(row[f], f, table));
      }
    }
  }, 1024);

  std::size_t kept = 0;
  std::vector<std::uint8_t> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) continue;
    if (kept != i) {
      std::copy_n(hot.begin() + static_cast<std::ptrdiff_t>(i * nf), nf,
                  hot.begin() + static_cast<std::ptrdiff_t>(kept * nf));
    }
    labels.push_back(raw.labels[i]);
    ++kept;
  }
  hot.resize(kept * nf);
  EncodedDataset out(nf, nb, std::move(hot), std::move(labels));
  out.source = raw.source;
  out.table_hash = table.hash();
  out.rejected = n - kept;
  return out;
}

namespace {
constexpr std::string_view kEncodedMagic = "BCPNNENC";
}

void write_encoded(const EncodedDataset& data, const std::filesystem::path& path) {
  detail::BinaryWriter w(path);
  w.magic(kEncodedMagic);
  w.value<std::uint32_t>(kEncodedCacheVersion);
  w.value<std::uint64_t>(data.rows());
  w.value<std::uint32_t>(static_cast<std::uint32_t>(data.n_features()));
  w.value<std::uint32_t>(static_cast<std::uint32_t>(data.n_bins()));
  w.value<std::uint64_t>(data.rejected);
  w.string(data.source);
  w.string(data.table_hash);
  w.array<std::uint32_t>(data.hot_indices());
  w.array<std::uint8_t>(data.labels());
  w.finish();
}

EncodedDataset read_encoded(const std::filesystem::path& path) {
  detail::BinaryReader r(path, kEncodedMagic);
  r.expect_version(kEncodedCacheVersion);
  const auto rows = r.value<std::uint64_t>();
  const auto nf = r.value<std::uint32_t>();
  const auto nb = r.value<std::uint32_t>();
  const auto rejected = r.value<std::uint64_t>();
  auto source = r.string();
  auto table_hash = r.string();
  r.require_remaining(rows * nf * sizeof(std::uint32_t) + rows);
  std::vector<std::uint32_t> hot(rows * nf);
  std::vector<std::uint8_t> labels(rows);
  r.array<std::uint32_t>(hot);
  r.array<std::uint8_t>(labels);
  r.expect_end();
  EncodedDataset out(nf, nb, std::move(hot), std::move(labels));
  out.source = std::move(source);
  out.table_hash = std::move(table_hash);
  out.rejected = rejected;
  try {
    out.validate();
  } catch (const FormatError& e) {
    throw CacheError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<std::size_t> balanced_rows(std::span<const std::uint8_t> labels, std::size_t n_per_class,
                                       std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw FormatError("label outside {0,1}");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].size() < n_per_class || by_class[1].size() < n_per_class) {
    throw CapacityError("balanced subset needs " + std::to_string(n_per_class) +
                        " rows per class; available: background=" +
                        std::to_string(by_class[0].size()) +
                        ", signal=" + std::to_string(by_class[1].size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  out.reserve(2 * n_per_class);
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_per_class));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

RawDataset balance_subset(const RawDataset& dataset, std::size_t n_per_class, std::uint64_t seed) {
  return dataset.subset(balanced_rows(dataset.labels, n_per_class, seed));
}

EncodedDataset balance_subset(const EncodedDataset& dataset, std::size_t n_per_class,
                              std::uint64_t seed) {
  return dataset.subset(balanced_rows(dataset.labels(), n_per_class, seed));
}

}  // namespace bcpnn
