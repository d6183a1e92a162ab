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

#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>
#include <vector>

#include "bcpnn/encoding.hpp"
#include "bcpnn/ingestion.hpp"
#include "bcpnn/layer.hpp"
#include "bcpnn/metrics.hpp"
#include "bcpnn/synthetic.hpp"

namespace {

using namespace bcpnn;

constexpr std::size_t kBatch = 128;

const EncodedDataset& samples() {
  static const EncodedDataset data = [] {
    const RawDataset raw = make_higgs_like_dataset(4096, 3);
    return encode_dataset(raw, fit_quantiles(raw));
  }();
  return data;
}

SparseBinaryBatch first_batch() {
  const auto& d = samples();
  return {kBatch, d.n_features(), d.hot_indices().subspan(0, kBatch * d.n_features())};
}

BcpnnLayer layer_for(std::size_t m, double density) {
  LayerOptions o;
  o.seed = 1;
  return BcpnnLayer::create(LayerGeometry{samples().width(), 1, m, density}, o);
}

void BM_Forward(benchmark::State& state) {
  const BcpnnLayer layer = layer_for(static_cast<std::size_t>(state.range(0)), 0.4);
  const SparseBinaryBatch batch = first_batch();
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(batch));
  state.SetItemsProcessed(state.iterations() * kBatch);
}
BENCHMARK(BM_Forward)->Arg(30)->Arg(300)->Arg(3000);

void BM_TraceUpdate(benchmark::State& state) {
  BcpnnLayer layer = layer_for(static_cast<std::size_t>(state.range(0)), 0.4);
  const SparseBinaryBatch batch = first_batch();
  const RowMatrix act = layer.forward(batch);
  for (auto _ : state) layer.update_traces(batch, act);
  state.SetItemsProcessed(state.iterations() * kBatch);
}
BENCHMARK(BM_TraceUpdate)->Arg(30)->Arg(300)->Arg(3000);

void BM_RecomputeWeights(benchmark::State& state) {
  BcpnnLayer layer = layer_for(static_cast<std::size_t>(state.range(0)), 0.4);
  for (auto _ : state) layer.recompute_weights(/*active_only=*/true);
}
BENCHMARK(BM_RecomputeWeights)->Arg(30)->Arg(300)->Arg(3000);

void BM_PlasticityStep(benchmark::State& state) {
  BcpnnLayer layer = layer_for(static_cast<std::size_t>(state.range(0)), 0.4);
  const SparseBinaryBatch batch = first_batch();
  layer.update_traces(batch, layer.forward(batch));
  for (auto _ : state) benchmark::DoNotOptimize(layer.plasticity_step(1));
}
BENCHMARK(BM_PlasticityStep)->Arg(30)->Arg(300)->Arg(3000);

void BM_EncodeDataset(benchmark::State& state) {
  const RawDataset raw = make_higgs_like_dataset(static_cast<std::size_t>(state.range(0)), 5);
  const QuantileTable table = fit_quantiles(raw);
  for (auto _ : state) benchmark::DoNotOptimize(encode_dataset(raw, table));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeDataset)->Arg(10000)->Arg(100000);

void BM_LoadCsv(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "bcpnn-bench.csv";
  write_csv(make_higgs_like_dataset(static_cast<std::size_t>(state.range(0)), 6), path);
  for (auto _ : state) benchmark::DoNotOptimize(load_csv(path));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(std::filesystem::file_size(path)));
  std::filesystem::remove(path);
}
BENCHMARK(BM_LoadCsv)->Arg(20000);

void BM_RocAuc(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint8_t> labels(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    labels[i] = static_cast<std::uint8_t>(i % 2);
    scores[i] = g(rng) + labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RocAuc)->Arg(20000)->Arg(1000000);

}  // namespace

BENCHMARK_MAIN();
