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
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bcpnn {

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kSignal = 1;

// 21 low-level kinematic features followed by 7 derived high-level ones.
inline constexpr std::size_t kHiggsFeatures = 28;

// Row-major float32 feature matrix with one class label per row.
struct RawDataset {
  std::size_t n_features = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> labels;
  std::string source;

  std::size_t rows() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * n_features, n_features};
  }
  float at(std::size_t i, std::size_t f) const { return values[i * n_features + f]; }

  // Rows in the order given; `rows` may not repeat for split/balance callers
  // but that is not enforced here.
  RawDataset subset(std::span<const std::size_t> rows) const;

  // Throws FormatError if the shape or label alphabet is broken.
  void validate() const;

  bool operator==(const RawDataset&) const = default;
};

struct CsvOptions {
  std::optional<std::size_t> limit;
  std::size_t n_features = kHiggsFeatures;
  // A file with more malformed lines than this fraction (and more than one
  // in absolute terms) is rejected as "probably not a HIGGS file".
  double max_malformed_fraction = 0.01;
};

struct CsvLoadReport {
  std::size_t lines_read = 0;
  std::size_t malformed = 0;
};

// Streams a HIGGS-format CSV: label first, then n_features numeric fields,
// no header. Never holds the whole text in memory.
RawDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {},
                    CsvLoadReport* report = nullptr);

void write_csv(const RawDataset& dataset, const std::filesystem::path& path);

struct SplitSpec {
  double train_fraction = 0.9;
  // When non-zero, overrides train_fraction.
  std::size_t test_count = 0;
  std::uint64_t seed = 0;
};

// Stratified, seeded partition. Both halves keep source row order.
std::pair<RawDataset, RawDataset> split(const RawDataset& dataset, const SplitSpec& spec);

// Row indices (into `labels`) of the test half of a stratified split, sorted.
std::vector<std::size_t> stratified_test_rows(std::span<const std::uint8_t> labels,
                                              std::size_t test_count, std::uint64_t seed);

// Binary cache: "BCPNNRAW" magic, u32 version, u64 rows, u32 features, then
// rows of float32 (label, features...), then a CRC-32 of everything before it.
// All integers and floats little-endian.
inline constexpr std::uint32_t kRawCacheVersion = 1;

void cache_write(const RawDataset& dataset, const std::filesystem::path& path);
RawDataset cache_read(const std::filesystem::path& path);

}  // namespace bcpnn
