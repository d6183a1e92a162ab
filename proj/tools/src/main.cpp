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

// bcpnn: prepare HIGGS data, train and evaluate BCPNN models, run sweeps.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcpnn/error.hpp"
#include "bcpnn/ingestion.hpp"
#include "bcpnn/parallel.hpp"
#include "bcpnn/pipeline/commands.hpp"
#include "bcpnn/pipeline/config.hpp"
#include "bcpnn/synthetic.hpp"

namespace {

using namespace bcpnn;
using namespace bcpnn::pipeline;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> jobs;
  std::vector<std::string> overrides;
};

ExperimentConfig resolve(const GlobalFlags& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) {
    c.seed = *g.seed;
    c.train.seed = *g.seed;
  }
  if (g.out) c.out = *g.out;
  if (g.threads) c.threads = *g.threads;
  if (g.jobs) c.jobs = *g.jobs;
  c.validate();
  set_num_threads(c.threads);
  return c;
}

void print_summary(const SweepResult& r) {
  std::printf("%6s %6s %7s %4s %10s %10s %10s\n", "H", "M", "d", "ok", "acc_mean", "acc_std",
              "auc_mean");
  for (const auto& s : r.summary) {
    std::printf("%6zu %6zu %7.3f %4zu %10.4f %10.4f %10.4f\n", s.n_hcus, s.n_mcus, s.density,
                s.n_ok, s.accuracy_mean, s.accuracy_std, s.auc_mean);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BCPNN with structural plasticity on the HIGGS dataset"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Base seed (repetition r uses seed + r)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads per process (0 = all cores)");
  app.add_option("--jobs", g.jobs, "Sweep worker processes");
  app.add_option("--set", g.overrides, "Override a config field, e.g. --set train.alpha=0.005");

  auto* prepare = app.add_subcommand("prepare", "Split, balance, fit quantiles and encode");

  auto* train = app.add_subcommand("train", "Train hidden layer and readout");
  std::string resume;
  train->add_option("--resume", resume, "Checkpoint (hidden.lyr) to continue from")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Score a trained model");
  std::string model_dir;
  std::string split = "test";
  eval->add_option("--model", model_dir, "Directory with hidden.lyr and readout.rdo "
                                         "(default <out>/train)");
  eval->add_option("--split", split, "test or train")->check(CLI::IsMember({"test", "train"}));

  auto* sweep_capacity = app.add_subcommand("sweep-capacity", "M x H grid at fixed density");
  auto* sweep_rf = app.add_subcommand("sweep-rf", "Receptive-field density grid");

  auto* export_masks = app.add_subcommand("export-masks", "Write mask images for a saved layer");
  std::string layer_path;
  std::string mask_dir;
  std::size_t width = kDefaultBins;
  export_masks->add_option("--model", layer_path, "hidden.lyr file")->required()->check(
      CLI::ExistingFile);
  export_masks->add_option("--dir", mask_dir, "Output directory (default <out>/masks)");
  export_masks->add_option("--width", width, "Image width in components")->check(
      CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Write a synthetic HIGGS-format CSV");
  std::string kind = "higgs-like";
  std::string csv_out;
  std::size_t rows = 100000;
  synth->add_option("--kind", kind, "planted or higgs-like")
      ->check(CLI::IsMember({"planted", "higgs-like"}));
  synth->add_option("--rows", rows, "Number of rows")->check(CLI::PositiveNumber);
  synth->add_option("--csv", csv_out, "Destination file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const std::uint64_t seed = g.seed.value_or(7);
      RawDataset data;
      if (kind == "planted") {
        PlantedSpec spec;
        spec.n_samples = rows;
        spec.seed = seed;
        data = make_planted_dataset(spec);
      } else {
        data = make_higgs_like_dataset(rows, seed);
      }
      write_csv(data, csv_out);
      std::cout << "synth: wrote " << data.rows() << " rows to " << csv_out << "\n";
      return 0;
    }
    if (export_masks->parsed()) {
      const std::string dir = !mask_dir.empty() ? mask_dir : g.out.value_or("runs/default") + "/masks";
      const auto files = cmd_export_masks(layer_path, dir, width);
      std::cout << "export-masks: wrote " << files.size() << " images to " << dir << "\n";
      return 0;
    }

    const ExperimentConfig config = resolve(g);
    if (prepare->parsed()) {
      cmd_prepare(config, std::cout);
    } else if (train->parsed()) {
      TrainOptions options;
      if (!resume.empty()) options.resume = resume;
      cmd_train(config, options, std::cout);
    } else if (eval->parsed()) {
      const auto dir = model_dir.empty() ? config.out / "train" : std::filesystem::path(model_dir);
      const EvalReport r = cmd_eval(config, dir, split, std::cout);
      std::cout << r.to_json();
    } else if (sweep_capacity->parsed()) {
      print_summary(cmd_sweep_capacity(config, std::cout));
    } else if (sweep_rf->parsed()) {
      print_summary(cmd_sweep_receptive_field(config, std::cout));
    }
  } catch (const bcpnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
