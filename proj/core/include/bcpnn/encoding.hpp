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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcpnn/ingestion.hpp"

namespace bcpnn {

inline constexpr std::size_t kDefaultBins = 10;

// Per-feature cut points. Feature f maps into bin k = number of cut points
// strictly below the value, i.e. the smallest k with value <= cut[k].
class QuantileTable {
 public:
  QuantileTable() = default;
  QuantileTable(std::size_t n_bins, std::vector<std::vector<double>> boundaries);

  std::size_t n_bins() const { return n_bins_; }
  std::size_t n_features() const { return boundaries_.size(); }
  std::span<const double> boundaries(std::size_t feature) const { return boundaries_.at(feature); }

  // Versioned JSON: {"format":"bcpnn.quantiles","version":1,"n_bins":B,
  // "features":[{"index":f,"boundaries":[...]}...]}. Doubles round-trip exactly.
  std::string to_json() const;
  static QuantileTable from_json(std::string_view text);

  // Stable 16-hex-digit fingerprint of to_json().
  std::string hash() const;

  bool operator==(const QuantileTable&) const = default;

 private:
  std::size_t n_bins_ = 0;
  std::vector<std::vector<double>> boundaries_;
};

// Type-7 (linear interpolation) k/n_bins quantiles for k = 1..n_bins-1.
// NaNs are ignored; an empty (or all-NaN) column is a FitError.
std::vector<double> column_quantiles(std::span<const double> column, std::size_t n_bins);

QuantileTable fit_quantiles(std::span<const std::vector<double>> columns, std::size_t n_bins);
QuantileTable fit_quantiles(const RawDataset& dataset, std::size_t n_bins = kDefaultBins);

// Out-of-range values clamp to the edge bins. NaN throws EncodingError.
std::size_t encode_value(double value, std::size_t feature, const QuantileTable& table);

// One-hot samples stored by their hot column indices: row i holds F global
// indices, the one for feature f lying in [f*B, (f+1)*B).
class EncodedDataset {
 public:
  EncodedDataset() = default;
  EncodedDataset(std::size_t n_features, std::size_t n_bins, std::vector<std::uint32_t> hot,
                 std::vector<std::uint8_t> labels);

  std::size_t rows() const { return labels_.size(); }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_bins() const { return n_bins_; }
  std::size_t width() const { return n_features_ * n_bins_; }

  std::span<const std::uint32_t> hot(std::size_t row) const {
    return {hot_.data() + row * n_features_, n_features_};
  }
  std::span<const std::uint32_t> hot_indices() const { return hot_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::uint8_t label(std::size_t row) const { return labels_[row]; }

  // Dense 0/1 view of one row, length width().
  std::vector<std::uint8_t> bits(std::size_t row) const;

  EncodedDataset subset(std::span<const std::size_t> rows) const;

  // Provenance: which split it came from and which table encoded it.
  std::string source;
  std::string table_hash;
  std::size_t rejected = 0;

  // Throws FormatError unless every row has exactly one hot bit per block.
  void validate() const;

  bool operator==(const EncodedDataset&) const = default;

 private:
  std::size_t n_features_ = 0;
  std::size_t n_bins_ = 0;
  std::vector<std::uint32_t> hot_;
  std::vector<std::uint8_t> labels_;
};

// Rows with any NaN are dropped and counted in `rejected`. Row order is
// preserved regardless of the thread count.
EncodedDataset encode_dataset(const RawDataset& raw, const QuantileTable& table);

// "BCPNNENC" v1 binary with trailing CRC-32, same conventions as the raw cache.
inline constexpr std::uint32_t kEncodedCacheVersion = 1;
void write_encoded(const EncodedDataset& data, const std::filesystem::path& path);
EncodedDataset read_encoded(const std::filesystem::path& path);

// Exactly n_per_class rows of each class, drawn without replacement and
// shuffled, all under `seed`. CapacityError if a class is short.
std::vector<std::size_t> balanced_rows(std::span<const std::uint8_t> labels, std::size_t n_per_class,
                                       std::uint64_t seed);

RawDataset balance_subset(const RawDataset& dataset, std::size_t n_per_class, std::uint64_t seed);
EncodedDataset balance_subset(const EncodedDataset& dataset, std::size_t n_per_class,
                              std::uint64_t seed);

}  // namespace bcpnn
