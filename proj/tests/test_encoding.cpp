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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "bcpnn/encoding.hpp"
#include "bcpnn/error.hpp"
#include "bcpnn/parallel.hpp"
#include "test_support.hpp"

namespace bcpnn {
namespace {

using testing::TempDir;

// Sort-and-index quantile with linear interpolation between order statistics,
// written from the textbook definition: position p*(n-1) in the sorted sample.
double oracle_quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Bin = number of cut points strictly below the value.
std::size_t oracle_bin(double v, std::span<const double> cuts) {
  return static_cast<std::size_t>(std::count_if(cuts.begin(), cuts.end(), [&](double c) { return c < v; }));
}

QuantileTable table_for(const std::vector<double>& column, std::size_t bins = 10) {
  std::vector<std::vector<double>> cols{column};
  return fit_quantiles(cols, bins);
}

RawDataset random_raw(std::size_t rows, std::size_t features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 2.0f);
  RawDataset d;
  d.n_features = features;
  for (std::size_t i = 0; i < rows; ++i) {
    d.labels.push_back(static_cast<std::uint8_t>(rng() & 1));
    for (std::size_t f = 0; f < features; ++f) d.values.push_back(g(rng));
  }
  return d;
}

TEST(FitQuantiles, OneToHundredDeciles) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const QuantileTable t = table_for(v);
  ASSERT_EQ(t.boundaries(0).size(), 9u);
  for (std::size_t k = 1; k <= 9; ++k) {
    EXPECT_NEAR(t.boundaries(0)[k - 1], oracle_quantile(v, k / 10.0), 1e-12);
    EXPECT_NEAR(t.boundaries(0)[k - 1], 9.9 * k + 1.0, 1e-9) << "k=" << k;  // 10.9, 20.8, ..., 90.1
  }
  std::vector<int> occupancy(10, 0);
  for (double x : v) ++occupancy[encode_value(x, 0, t)];
  for (int c : occupancy) EXPECT_EQ(c, 10);
}

TEST(FitQuantiles, ConstantColumn) {
  const QuantileTable t = table_for(std::vector<double>(50, 3.0));
  for (double b : t.boundaries(0)) EXPECT_EQ(b, 3.0);
  for (double x : {-10.0, 3.0}) EXPECT_EQ(encode_value(x, 0, t), 0u);
}

TEST(FitQuantiles, BernoulliColumnMatchesOracle) {
  std::mt19937_64 rng(1234);
  std::bernoulli_distribution coin(0.37);
  std::vector<double> v(1000);
  for (double& x : v) x = coin(rng) ? 1.0 : 0.0;
  const QuantileTable t = table_for(v);
  const auto cuts = t.boundaries(0);
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    EXPECT_DOUBLE_EQ(cuts[k], oracle_quantile(v, (k + 1) / 10.0));
    EXPECT_GE(cuts[k], 0.0);
    EXPECT_LE(cuts[k], 1.0);
    if (k > 0) {
      EXPECT_LE(cuts[k - 1], cuts[k]);
    }
  }
  std::set<std::size_t> used;
  for (double x : v) used.insert(encode_value(x, 0, t));
  EXPECT_LE(used.size(), 2u);
}

TEST(FitQuantiles, RandomColumnsMatchOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> size(1, 400);
    std::lognormal_distribution<double> value(0.0, 1.5);
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    for (double& x : v) x = value(rng);
    const std::size_t bins = 2 + static_cast<std::size_t>(trial % 15);
    const auto cuts = column_quantiles(v, bins);
    ASSERT_EQ(cuts.size(), bins - 1);
    for (std::size_t k = 0; k + 1 < bins; ++k) {
      const double expected = oracle_quantile(v, static_cast<double>(k + 1) / bins);
      EXPECT_NEAR(cuts[k], expected, 1e-12 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST(FitQuantiles, Errors) {
  EXPECT_THROW(table_for({}), FitError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(table_for({nan, nan}), FitError);
  EXPECT_THROW(table_for({1.0, 2.0}, 1), ConfigError);
  EXPECT_THROW(QuantileTable(10, {{3.0, 2.0, 1.0, 0, 0, 0, 0, 0, 0}}), FitError);
  EXPECT_THROW(QuantileTable(10, {{1.0, 2.0}}), FitError);
}

TEST(FitQuantiles, OccupancyWithoutTies) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (std::size_t n : {1000u, 1003u, 999u, 57u}) {
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    const QuantileTable t = table_for(v);
    std::vector<double> count(10, 0.0);
    for (double x : v) count[encode_value(x, 0, t)] += 1.0;
    for (double c : count) EXPECT_LE(std::abs(c - n / 10.0), 1.0) << "n=" << n;
  }
}

TEST(EncodeValue, ClampAndOracle) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const QuantileTable t = table_for(v);
  EXPECT_EQ(encode_value(-1e9, 0, t), 0u);
  EXPECT_EQ(encode_value(1e9, 0, t), 9u);
  EXPECT_EQ(encode_value(55.0, 0, t), 5u);
  // Oracle from the fitting data: 55 of the values are <= 55, i.e. 5 full deciles.
  EXPECT_EQ(encode_value(55.0, 0, t),
            static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x <= 55; })) / 10);
  EXPECT_EQ(encode_value(10.9, 0, t), 0u);  // equal to a cut point stays below it
  EXPECT_EQ(encode_value(std::nextafter(10.9, 20.0), 0, t), 1u);
  EXPECT_THROW(encode_value(std::numeric_limits<double>::quiet_NaN(), 0, t), EncodingError);
  EXPECT_THROW(encode_value(1.0, 1, t), ShapeError);
}

TEST(EncodeValue, MonotoneProperty) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<double> v(300);
  for (double& x : v) x = std::round(g(rng));  // ties included
  const QuantileTable t = table_for(v);
  for (int i = 0; i < 1000; ++i) {
    double a = g(rng) * 2, b = g(rng) * 2;
    if (a > b) std::swap(a, b);
    EXPECT_LE(encode_value(a, 0, t), encode_value(b, 0, t));
    EXPECT_EQ(encode_value(a, 0, t), oracle_bin(a, t.boundaries(0)));
  }
}

TEST(EncodeDataset, PositionalLayout) {
  const std::vector<double> cuts{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const QuantileTable t(10, {cuts, cuts});
  RawDataset raw;
  raw.n_features = 2;
  raw.values = {0.5f, 100.0f};
  raw.labels = {kSignal};
  const EncodedDataset e = encode_dataset(raw, t);
  ASSERT_EQ(e.rows(), 1u);
  const auto bits = e.bits(0);
  ASSERT_EQ(bits.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(bits[i], (i == 0 || i == 19) ? 1 : 0) << i;
  EXPECT_EQ(e.label(0), kSignal);
}

TEST(EncodeDataset, BlockSumsMatchPerValueOracle) {
  const RawDataset raw = random_raw(1000, 5, 3);
  const QuantileTable t = fit_quantiles(raw, 10);
  const EncodedDataset e = encode_dataset(raw, t);
  ASSERT_EQ(e.rows(), 1000u);
  std::vector<std::size_t> column_sum(e.width(), 0), oracle(e.width(), 0);
  for (std::size_t i = 0; i < e.rows(); ++i) {
    const auto bits = e.bits(i);
    EXPECT_EQ(std::accumulate(bits.begin(), bits.end(), 0u), 5u);  // one-hot integrity
    for (std::size_t c = 0; c < bits.size(); ++c) column_sum[c] += bits[c];
    for (std::size_t f = 0; f < 5; ++f) {
      const std::size_t bin = oracle_bin(raw.at(i, f), t.boundaries(f));
      ++oracle[f * 10 + bin];
      EXPECT_EQ(e.hot(i)[f], f * 10 + bin);  // decode round-trip
    }
  }
  EXPECT_EQ(column_sum, oracle);
  EXPECT_TRUE(std::ranges::equal(e.labels(), raw.labels));
}

TEST(EncodeDataset, NanRowsAreRejectedAndCounted) {
  RawDataset raw = random_raw(20, 3, 1);
  const QuantileTable t = fit_quantiles(raw, 4);
  raw.values[3 * 4 + 1] = std::numeric_limits<float>::quiet_NaN();
  raw.values[3 * 9 + 2] = std::numeric_limits<float>::quiet_NaN();
  const EncodedDataset e = encode_dataset(raw, t);
  EXPECT_EQ(e.rows(), 18u);
  EXPECT_EQ(e.rejected, 2u);
  EXPECT_EQ(e.table_hash, t.hash());
}

TEST(EncodeDataset, ThreadCountDoesNotChangeOutput) {
  const RawDataset raw = random_raw(5000, 28, 8);
  const QuantileTable t = fit_quantiles(raw, 10);
  set_num_threads(1);
  const EncodedDataset one = encode_dataset(raw, t);
  set_num_threads(4);
  const EncodedDataset four = encode_dataset(raw, t);
  set_num_threads(1);
  EXPECT_EQ(one, four);
}

TEST(EncodeDataset, WidthMismatchIsShapeError) {
  const RawDataset raw = random_raw(10, 3, 1);
  const QuantileTable t = fit_quantiles(random_raw(10, 4, 2), 10);
  EXPECT_THROW(encode_dataset(raw, t), ShapeError);
}

TEST(QuantileTableJson, RoundTripAndHash) {
  const RawDataset raw = random_raw(300, 4, 6);
  const QuantileTable t = fit_quantiles(raw, 7);
  const QuantileTable back = QuantileTable::from_json(t.to_json());
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.hash(), t.hash());
  EXPECT_EQ(t.hash().size(), 16u);
  const QuantileTable other = fit_quantiles(random_raw(300, 4, 7), 7);
  EXPECT_NE(other.hash(), t.hash());
}

TEST(QuantileTableJson, RejectsForeignDocuments) {
  EXPECT_THROW(QuantileTable::from_json("{}"), FormatError);
  EXPECT_THROW(QuantileTable::from_json("not json"), FormatError);
  EXPECT_THROW(QuantileTable::from_json(R"({"format":"bcpnn.quantiles","version":99,"n_bins":10,"features":[]})"),
               FormatError);
}

TEST(EncodedCache, RoundTripAndCorruption) {
  TempDir dir;
  const RawDataset raw = random_raw(200, 28, 2);
  EncodedDataset e = encode_dataset(raw, fit_quantiles(raw, 10));
  e.source = "unit";
  write_encoded(e, dir / "e.enc");
  EXPECT_EQ(read_encoded(dir / "e.enc"), e);
  auto bytes = testing::read_bytes(dir / "e.enc");
  bytes.resize(bytes.size() - 7);
  testing::write_bytes(dir / "t.enc", bytes);
  EXPECT_THROW(read_encoded(dir / "t.enc"), CacheError);
}

TEST(Balance, ZeroPerClassIsEmpty) {
  const RawDataset raw = random_raw(50, 2, 1);
  EXPECT_EQ(balance_subset(raw, 0, 1).rows(), 0u);
}

TEST(Balance, ExhaustiveCaseIsPermutation) {
  RawDataset raw = random_raw(20, 2, 4);
  for (std::size_t i = 0; i < 20; ++i) raw.labels[i] = i < 10 ? kSignal : kBackground;
  const RawDataset out = balance_subset(raw, 10, 99);
  ASSERT_EQ(out.rows(), 20u);
  auto key = [](const RawDataset& d) {
    std::multiset<std::pair<std::uint8_t, float>> k;
    for (std::size_t i = 0; i < d.rows(); ++i) k.insert({d.labels[i], d.at(i, 0)});
    return k;
  };
  EXPECT_EQ(key(out), key(raw));
  bool moved = false;
  for (std::size_t i = 0; i < 20; ++i) moved |= out.at(i, 0) != raw.at(i, 0);
  EXPECT_TRUE(moved) << "output order should be shuffled";
}

TEST(Balance, SeedsGiveBalancedButDifferentDraws) {
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> labels(1000);
  for (auto& l : labels) l = (rng() % 3 == 0) ? kSignal : kBackground;
  const auto a = balanced_rows(labels, 100, 1);
  const auto b = balanced_rows(labels, 100, 2);
  for (const auto* rows : {&a, &b}) {
    ASSERT_EQ(rows->size(), 200u);
    std::size_t signal = 0;
    for (auto r : *rows) signal += labels[r];
    EXPECT_EQ(signal, 100u);
    EXPECT_EQ(std::set<std::size_t>(rows->begin(), rows->end()).size(), 200u);  // no replacement
  }
  EXPECT_NE(std::set<std::size_t>(a.begin(), a.end()), std::set<std::size_t>(b.begin(), b.end()));
  EXPECT_EQ(balanced_rows(labels, 100, 1), a);
}

TEST(Balance, ShortClassIsCapacityError) {
  std::vector<std::uint8_t> labels(30, kBackground);
  labels[0] = kSignal;
  try {
    balanced_rows(labels, 5, 0);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("background=29"), std::string::npos) << msg;
    EXPECT_NE(msg.find("signal=1"), std::string::npos) << msg;
  }
}

}  // namespace
}  // namespace bcpnn
