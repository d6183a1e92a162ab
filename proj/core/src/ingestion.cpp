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

#include "bcpnn/ingestion.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "bcpnn/error.hpp"

namespace bcpnn {

RawDataset RawDataset::subset(std::span<const std::size_t> rows) const {
  RawDataset out;
  out.n_features = n_features;
  out.source = source;
  out.values.reserve(rows.size() * n_features);
  out.labels.reserve(rows.size());
  for (const std::size_t r : rows) {
    const auto src = row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
    out.labels.push_back(labels[r]);
  }
  return out;
}

void RawDataset::validate() const {
  if (values.size() != labels.size() * n_features) {
    throw FormatError("dataset has " + std::to_string(values.size()) + " values for " +
                      std::to_string(labels.size()) + " rows of " + std::to_string(n_features));
  }
  for (const auto l : labels) {
    if (l != kBackground && l != kSignal) throw FormatError("label outside {0,1}");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_float(std::string_view field, float& out) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

// Parses "label,f1,...,fF" into `label` and `features`; false if malformed.
bool parse_line(std::string_view line, std::size_t n_features, std::uint8_t& label,
                float* features) {
  std::size_t field = 0;
  while (true) {
    const auto comma = line.find(',');
    const auto token = line.substr(0, comma);
    float v = 0.0f;
    if (!parse_float(token, v)) return false;
    if (field == 0) {
      if (v == 0.0f) {
        label = kBackground;
      } else if (v == 1.0f) {
        label = kSignal;
      } else {
        return false;
      }
    } else {
      if (field > n_features) return false;
      features[field - 1] = v;
    }
    ++field;
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return field == n_features + 1;
}

}  // namespace

RawDataset load_csv(const std::filesystem::path& path, const CsvOptions& options,
                    CsvLoadReport* report) {
  std::ifstream in;
  std::vector<char> buffer(1 << 20);
  in.rdbuf()->pubsetbuf(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  in.open(path);
  if (!in) throw IoError("cannot open CSV: " + path.string());

  RawDataset out;
  out.n_features = options.n_features;
  out.source = path.string();
  CsvLoadReport local;
  std::vector<float> row(options.n_features);
  std::string line;
  while (std::getline(in, line)) {
    if (options.limit && out.rows() >= *options.limit) break;
    if (trim(line).empty()) continue;
    ++local.lines_read;
    std::uint8_t label = 0;
    if (!parse_line(line, options.n_features, label, row.data())) {
      ++local.malformed;
      continue;
    }
    out.values.insert(out.values.end(), row.begin(), row.end());
    out.labels.push_back(label);
  }
  if (in.bad()) throw IoError("read error in " + path.string());

  const double allowed =
      std::max(1.0, options.max_malformed_fraction * static_cast<double>(local.lines_read));
  if (static_cast<double>(local.malformed) > allowed) {
    std::ostringstream msg;
    msg << path.string() << ": " << local.malformed << " of " << local.lines_read
        << " lines malformed; expected " << options.n_features + 1
        << " numeric fields per line with a 0/1 label first";
    throw FormatError(msg.str());
  }
  if (report) *report = local;
  return out;
}

void write_csv(const RawDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    out << (dataset.labels[i] == kSignal ? "1.0" : "0.0");
    for (const float v : dataset.row(i)) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::size_t> stratified_test_rows(std::span<const std::uint8_t> labels,
                                              std::size_t test_count, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (test_count >= n) {
    throw ConfigError("test_count " + std::to_string(test_count) + " must be below the " +
                      std::to_string(n) + " available rows");
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class.at(labels[i]).push_back(i);

  // Largest-remainder apportionment keeps the test class ratio within one
  // row of the population ratio.
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(test_count) * static_cast<double>(by_class[c].size()) /
                         static_cast<double>(n);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < test_count) {
    const std::size_t c = remainder[1] > remainder[0] ? 1 : 0;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> test;
  test.reserve(test_count);
  for (std::size_t c = 0; c < 2; ++c) {
    auto& rows = by_class[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    test.insert(test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(test.begin(), test.end());
  return test;
}

std::pair<RawDataset, RawDataset> split(const RawDataset& dataset, const SplitSpec& spec) {
  const std::size_t n = dataset.rows();
  std::size_t test_count = spec.test_count;
  if (test_count == 0) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
      throw ConfigError("train_fraction must lie in (0, 1)");
    }
    test_count = n - static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  }
  if (test_count == 0) throw ConfigError("split leaves the test set empty");
  const auto test_rows = stratified_test_rows(dataset.labels, test_count, spec.seed);

  std::vector<std::size_t> train_rows;
  train_rows.reserve(n - test_rows.size());
  std::size_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t < test_rows.size() && test_rows[t] == i) {
      ++t;
    } else {
      train_rows.push_back(i);
    }
  }
  auto train = dataset.subset(train_rows);
  auto test = dataset.subset(test_rows);
  train.source = dataset.source + "#train";
  test.source = dataset.source + "#test";
  return {std::move(train), std::move(test)};
}

namespace {
constexpr std::string_view kRawMagic = "BCPNNRAW";
}

void cache_write(const RawDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  detail::BinaryWriter w(path);
  w.magic(kRawMagic);
  w.value<std::uint32_t>(kRawCacheVersion);
  w.value<std::uint64_t>(dataset.rows());
  w.value<std::uint32_t>(static_cast<std::uint32_t>(dataset.n_features));
  std::vector<float> row(dataset.n_features + 1);
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    row[0] = static_cast<float>(dataset.labels[i]);
    const auto src = dataset.row(i);
    std::copy(src.begin(), src.end(), row.begin() + 1);
    w.array<float>(row);
  }
  w.string(dataset.source);
  w.finish();
}

RawDataset cache_read(const std::filesystem::path& path) {
  detail::BinaryReader r(path, kRawMagic);
  r.expect_version(kRawCacheVersion);
  const auto rows = r.value<std::uint64_t>();
  const auto features = r.value<std::uint32_t>();
  r.require_remaining(rows * (features + 1ULL) * sizeof(float));

  RawDataset out;
  out.n_features = features;
  out.values.resize(rows * features);
  out.labels.resize(rows);
  std::vector<float> row(features + 1);
  for (std::size_t i = 0; i < rows; ++i) {
    r.array<float>(row);
    if (row[0] != 0.0f && row[0] != 1.0f) throw CacheError(path.string() + ": bad label in cache");
    out.labels[i] = static_cast<std::uint8_t>(row[0]);
    std::copy(row.begin() + 1, row.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * features));
  }
  out.source = r.string();
  r.expect_end();
  return out;
}

}  // namespace bcpnn
