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

#include "bcpnn/pipeline/commands.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bcpnn/error.hpp"
#include "bcpnn/ingestion.hpp"
#include "bcpnn/layer.hpp"

namespace bcpnn::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "bcpnn.prepared";
constexpr int kManifestVersion = 1;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

// Write to a sibling temp file and rename, so readers never see half a file.
void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string header_lines(const std::string& config_hash, std::uint64_t seed) {
  return "config_hash=" + config_hash + "\nseed=" + std::to_string(seed);
}

std::string comment_block(const std::string& config_hash, std::uint64_t seed) {
  return "# config_hash=" + config_hash + "\n# seed=" + std::to_string(seed) + "\n";
}

std::string provenance(const ExperimentConfig& config, const std::string& table_hash) {
  return json{{"config_hash", config.hash()}, {"seed", config.seed}, {"table_hash", table_hash}}
      .dump();
}

std::string table_hash_of(const std::string& provenance_tag) {
  json doc = json::parse(provenance_tag, nullptr, false);
  if (doc.is_discarded() || !doc.contains("table_hash")) return {};
  return doc["table_hash"].get<std::string>();
}

fs::path raw_cache_path(const ExperimentConfig& config, const fs::path& dir) {
  std::error_code ec;
  const auto size = fs::file_size(config.data.csv, ec);
  const auto stamp = fs::last_write_time(config.data.csv, ec).time_since_epoch().count();
  const std::string key = fs::absolute(config.data.csv).string() + "|" +
                          std::to_string(config.data.limit.value_or(0)) + "|" +
                          std::to_string(size) + "|" + std::to_string(stamp);
  return dir / ("raw-" + fnv1a_hex(key) + ".cache");
}

std::optional<PreparedData> reuse_prepared(const ExperimentConfig& config, const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) return std::nullopt;
  try {
    json manifest = json::parse(read_text(manifest_path));
    if (manifest.value("format", "") != kManifestFormat ||
        manifest.value("version", 0) != kManifestVersion ||
        manifest.value("data_hash", "") != config.data_hash()) {
      return std::nullopt;
    }
    PreparedData p;
    p.dir = dir;
    p.table = QuantileTable::from_json(read_text(dir / "quantiles.json"));
    p.train = read_encoded(dir / "train.enc");
    p.test = read_encoded(dir / "test.enc");
    const std::string hash = p.table.hash();
    if (p.train.table_hash != hash || p.test.table_hash != hash ||
        manifest.value("table_hash", "") != hash) {
      return std::nullopt;
    }
    p.reused = true;
    return p;
  } catch (const Error&) {
    return std::nullopt;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

PreparedData cmd_prepare(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = config.out / "data";
  if (auto cached = reuse_prepared(config, dir)) {
    log << "prepare: reusing " << dir.string() << " (train " << cached->train.rows() << ", test "
        << cached->test.rows() << ")\n";
    return std::move(*cached);
  }
  if (config.data.csv.empty()) throw ConfigError("data.csv is not set");
  fs::create_directories(dir);
  fs::remove(dir / "manifest.json");

  const fs::path raw_path = raw_cache_path(config, dir);
  RawDataset raw;
  CsvLoadReport report;
  bool from_cache = false;
  if (fs::exists(raw_path)) {
    try {
      raw = cache_read(raw_path);
      from_cache = true;
    } catch (const CacheError& e) {
      log << "prepare: discarding raw cache (" << e.what() << ")\n";
    }
  }
  if (!from_cache) {
    CsvOptions options;
    options.limit = config.data.limit;
    raw = load_csv(config.data.csv, options, &report);
    cache_write(raw, raw_path);
  }
  log << "prepare: " << raw.rows() << " rows from " << config.data.csv.string()
      << (from_cache ? " (raw cache)" : "") << "\n";

  auto [train_raw, test_raw] = split(raw, SplitSpec{config.data.train_fraction, 0, config.seed});
  raw = RawDataset{};
  RawDataset train_bal, test_bal;
  try {
    train_bal = balance_subset(train_raw, config.data.train_per_class, config.seed + 1);
    test_bal = balance_subset(test_raw, config.data.test_per_class, config.seed + 2);
  } catch (const CapacityError& e) {
    throw CapacityError(config.data.csv.string() + ": " + e.what());
  }

  PreparedData p;
  p.dir = dir;
  p.table = fit_quantiles(train_bal, config.data.n_bins);
  p.train = encode_dataset(train_bal, p.table);
  p.test = encode_dataset(test_bal, p.table);
  p.train.source = config.data.csv.string() + "#train";
  p.test.source = config.data.csv.string() + "#test";
  if (p.train.rejected + p.test.rejected > 0) {
    log << "prepare: warning: " << p.train.rejected + p.test.rejected
        << " rows with missing values were dropped; the subsets are no longer exactly balanced\n";
  }

  write_text(dir / "quantiles.json", p.table.to_json());
  write_encoded(p.train, dir / "train.enc");
  write_encoded(p.test, dir / "test.enc");
  write_text(dir / "config.json", config.to_json());
  json manifest = {{"format", kManifestFormat},
                   {"version", kManifestVersion},
                   {"data_hash", config.data_hash()},
                   {"config_hash", config.hash()},
                   {"seed", config.seed},
                   {"source", config.data.csv.string()},
                   {"csv_lines", report.lines_read},
                   {"csv_malformed", report.malformed},
                   {"train_rows", p.train.rows()},
                   {"test_rows", p.test.rows()},
                   {"width", p.train.width()},
                   {"table_hash", p.table.hash()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  log << "prepare: wrote " << p.train.rows() << " train / " << p.test.rows() << " test rows to "
      << dir.string() << "\n";
  return p;
}

namespace {

// Records of an earlier epochs.csv, up to and including `last_epoch`.
std::vector<EpochRecord> read_epoch_records(const fs::path& path, std::size_t last_epoch) {
  std::vector<EpochRecord> out;
  if (!fs::exists(path)) return out;
  std::istringstream lines(read_text(path));
  for (std::string line; std::getline(lines, line);) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    std::vector<std::string> f;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) f.push_back(cell);
    while (f.size() < 5) f.emplace_back();
    EpochRecord r;
    r.epoch = std::stoul(f[0]);
    r.seconds = std::stod(f[1]);
    r.swaps = std::stoul(f[2]);
    if (!f[4].empty()) r.heldout_accuracy = std::stod(f[4]);
    if (r.epoch <= last_epoch) out.push_back(r);
  }
  return out;
}

}  // namespace

TrainResult train_model(const ExperimentConfig& config, const PreparedData& prepared,
                        const fs::path& dir, const TrainOptions& options, std::ostream& log) {
  config.validate();
  fs::create_directories(dir);
  const fs::path marker = dir / "INCOMPLETE";
  write_text(marker, "training did not finish; outputs in this directory are partial\n");
  write_text(dir / "config.json", config.to_json());

  const std::string config_hash = config.hash();
  const std::string table_hash = prepared.table.hash();
  const std::string tag = provenance(config, table_hash);
  const LayerGeometry geometry = config.geometry(prepared.train.width());
  TrainConfig tc = config.train;
  tc.seed = config.seed;

  TrainResult result;
  result.dir = dir;
  std::vector<EpochRecord> prior;
  if (options.resume) {
    std::string resumed_tag;
    result.hidden = load_layer(*options.resume, &resumed_tag);
    if (!(result.hidden.geometry() == geometry)) {
      throw ConfigError("checkpoint " + options.resume->string() +
                        " has a different layer geometry than the config");
    }
    if (table_hash_of(resumed_tag) != table_hash) {
      throw FormatError("checkpoint " + options.resume->string() +
                        " was trained on data encoded with a different quantile table");
    }
    prior = read_epoch_records(dir / "epochs.csv", result.hidden.epochs_completed());
    log << "train: resuming after epoch " << result.hidden.epochs_completed() << "\n";
  } else {
    result.hidden = BcpnnLayer::create(
        geometry, tc.hidden_options(config.seed, 1.0f / static_cast<float>(prepared.train.n_bins())));
  }

  const std::string comment = header_lines(config_hash, config.seed);
  const bool per_epoch = options.per_epoch_outputs;
  EpochLog running;  // what an interrupted run leaves behind in epochs.csv
  running.records = prior;
  const fs::path checkpoint = dir / "hidden.lyr";
  auto on_epoch = [&](const BcpnnLayer& layer, const EpochRecord& r) {
    log << "train: epoch " << r.epoch << " " << num(r.seconds) << " s, " << r.swaps << " swaps\n";
    if (!per_epoch) return;
    if (config.snapshots) {
      write_mask_snapshot(layer, dir / "masks", r.epoch, prepared.train.n_bins(), comment);
    }
    const fs::path tmp = dir / "hidden.lyr.tmp";
    save_layer(layer, tmp, tag);
    fs::rename(tmp, checkpoint);
    running.records.push_back(r);
    write_text(dir / "epochs.csv", running.to_csv(comment));
  };

  const std::size_t done = result.hidden.epochs_completed();
  if (tc.epochs > done) {
    TrainConfig run = tc;
    run.epochs = tc.epochs - done;
    EpochLog fresh = train_hidden(result.hidden, prepared.train, run, on_epoch);
    for (const auto& w : fresh.warnings) log << "train: warning: " << w << "\n";
    result.log = std::move(fresh);
    for (const auto& r : result.log.records) result.hidden_seconds += r.seconds;
  }
  result.log.records.insert(result.log.records.begin(), prior.begin(), prior.end());

  const auto start = std::chrono::steady_clock::now();
  result.readout = train_readout(result.hidden, prepared.train, tc);
  result.readout_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Predictions own = predict(result.hidden, result.readout, prepared.train);
  result.train_accuracy = accuracy(own.labels, prepared.train.labels());
  if (!result.log.records.empty()) result.log.records.back().train_accuracy = result.train_accuracy;
  log << "train: readout (" << to_string(tc.readout) << ") " << num(result.readout_seconds)
      << " s, train accuracy " << num(result.train_accuracy) << "\n";

  if (per_epoch) {
    save_layer(result.hidden, checkpoint, tag);
    save_readout(result.readout, dir / "readout.rdo", tag);
  }
  write_text(dir / "epochs.csv", result.log.to_csv(comment));
  json summary = {{"config_hash", config_hash},
                  {"seed", config.seed},
                  {"epochs", result.hidden.epochs_completed()},
                  {"hidden_seconds", result.hidden_seconds},
                  {"readout_seconds", result.readout_seconds},
                  {"train_accuracy", result.train_accuracy}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  fs::remove(marker);
  return result;
}

TrainResult cmd_train(const ExperimentConfig& config, const TrainOptions& options,
                      std::ostream& log) {
  const PreparedData prepared = cmd_prepare(config, log);
  return train_model(config, prepared, config.out / "train", options, log);
}

std::string EvalReport::to_json() const {
  json doc = {{"config_hash", config_hash},
              {"seed", seed},
              {"split", split},
              {"samples", samples},
              {"accuracy", accuracy},
              {"auc", auc},
              {"confusion",
               {{"true_positive", counts.true_positive},
                {"false_positive", counts.false_positive},
                {"true_negative", counts.true_negative},
                {"false_negative", counts.false_negative}}}};
  return doc.dump(2) + "\n";
}

EvalReport evaluate(const BcpnnLayer& hidden, const ReadoutModel& readout,
                    const std::string& model_table_hash, const EncodedDataset& samples) {
  if (model_table_hash != samples.table_hash) {
    throw FormatError("model was trained with quantile table " + model_table_hash +
                      " but the samples were encoded with " + samples.table_hash);
  }
  if (hidden.geometry().n_inputs != samples.width()) {
    throw FormatError("model expects " + std::to_string(hidden.geometry().n_inputs) +
                      " inputs, samples are " + std::to_string(samples.width()) + " wide");
  }
  if (readout.n_inputs() != hidden.geometry().n_units()) {
    throw FormatError("readout does not match the hidden layer width");
  }
  const Predictions p = predict(hidden, readout, samples);
  EvalReport r;
  r.samples = samples.rows();
  r.accuracy = accuracy(p.labels, samples.labels());
  r.roc = roc_auc(p.scores, samples.labels());
  r.auc = r.roc.auc;
  r.counts = confusion(p.labels, samples.labels());
  return r;
}

EvalReport cmd_eval(const ExperimentConfig& config, const fs::path& model_dir,
                    const std::string& split, std::ostream& log) {
  if (split != "test" && split != "train") {
    throw ConfigError("eval split must be \"test\" or \"train\", got \"" + split + "\"");
  }
  const PreparedData prepared = cmd_prepare(config, log);
  std::string tag;
  const BcpnnLayer hidden = load_layer(model_dir / "hidden.lyr", &tag);
  const ReadoutModel readout = load_readout(model_dir / "readout.rdo");
  EvalReport report = evaluate(hidden, readout, table_hash_of(tag),
                               split == "test" ? prepared.test : prepared.train);
  report.config_hash = config.hash();
  report.seed = config.seed;
  report.split = split;

  const fs::path dir = config.out / "eval";
  fs::create_directories(dir);
  write_text(dir / "config.json", config.to_json());
  write_text(dir / ("metrics_" + split + ".json"), report.to_json());
  write_text(dir / ("roc_" + split + ".csv"),
             comment_block(report.config_hash, report.seed) + report.roc.to_csv());
  log << "eval (" << split << "): accuracy " << num(report.accuracy) << ", auc "
      << num(report.auc) << " over " << report.samples << " samples\n";
  return report;
}

std::vector<fs::path> cmd_export_masks(const fs::path& model, const fs::path& out_dir,
                                       std::size_t image_width) {
  std::string tag;
  const BcpnnLayer layer = load_layer(model, &tag);
  return write_mask_snapshot(layer, out_dir, layer.epochs_completed(), image_width, tag);
}

// --- sweeps ---------------------------------------------------------------

std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummaryRow> out;
  std::vector<std::vector<const SweepRow*>> groups;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummaryRow& s) {
      return s.n_hcus == row.n_hcus && s.n_mcus == row.n_mcus && s.density == row.density;
    });
    if (it == out.end()) {
      out.push_back({row.n_hcus, row.n_mcus, row.density});
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(&row);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::vector<double> acc, auc, secs;
    for (const SweepRow* r : groups[g]) {
      if (!r->ok()) {
        ++out[g].n_failed;
        continue;
      }
      acc.push_back(r->accuracy);
      auc.push_back(r->auc);
      secs.push_back(r->train_seconds);
    }
    out[g].n_ok = acc.size();
    if (acc.empty()) continue;
    std::tie(out[g].accuracy_mean, out[g].accuracy_std) = mean_std(acc);
    std::tie(out[g].auc_mean, out[g].auc_std) = mean_std(auc);
    std::tie(out[g].seconds_mean, out[g].seconds_std) = mean_std(secs);
  }
  return out;
}

std::string SweepResult::rows_csv(const std::string& config_hash, std::uint64_t seed) const {
  std::string s = comment_block(config_hash, seed);
  s += "n_hcus,n_mcus,density,repetition,seed,accuracy,auc,train_seconds,status,masks\n";
  for (const auto& r : rows) {
    s += std::to_string(r.n_hcus) + ',' + std::to_string(r.n_mcus) + ',' + num(r.density) + ',' +
         std::to_string(r.repetition) + ',' + std::to_string(r.seed) + ',' + num(r.accuracy) +
         ',' + num(r.auc) + ',' + num(r.train_seconds) + ',' + r.status + ',' + r.masks + '\n';
  }
  return s;
}

std::string SweepResult::summary_csv(const std::string& config_hash, std::uint64_t seed) const {
  std::string s = comment_block(config_hash, seed);
  s += "n_hcus,n_mcus,density,n_ok,n_failed,accuracy_mean,accuracy_std,auc_mean,auc_std,"
       "seconds_mean,seconds_std\n";
  for (const auto& r : summary) {
    s += std::to_string(r.n_hcus) + ',' + std::to_string(r.n_mcus) + ',' + num(r.density) + ',' +
         std::to_string(r.n_ok) + ',' + std::to_string(r.n_failed) + ',' + num(r.accuracy_mean) +
         ',' + num(r.accuracy_std) + ',' + num(r.auc_mean) + ',' + num(r.auc_std) + ',' +
         num(r.seconds_mean) + ',' + num(r.seconds_std) + '\n';
  }
  return s;
}

namespace {

std::string cell_label(const SweepCell& c) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "h%zu_m%zu_d%.4f_r%zu", c.n_hcus, c.n_mcus, c.density,
                c.repetition);
  return buf;
}

ExperimentConfig cell_config(const ExperimentConfig& base, const SweepCell& c) {
  ExperimentConfig cfg = base;
  cfg.layer.n_hcus = c.n_hcus;
  cfg.layer.n_mcus = c.n_mcus;
  cfg.layer.density = c.density;
  cfg.seed = base.seed + c.repetition;
  cfg.train.seed = cfg.seed;
  return cfg;
}

// CSV-safe one-line failure text.
std::string failure(std::string what) {
  std::replace_if(what.begin(), what.end(), [](char ch) { return ch == ',' || ch == '\n'; }, ';');
  return "failed: " + what;
}

json row_to_json(const SweepRow& r, const std::string& config_hash) {
  return {{"n_hcus", r.n_hcus},     {"n_mcus", r.n_mcus},   {"density", r.density},
          {"repetition", r.repetition}, {"seed", r.seed}, {"accuracy", r.accuracy},
          {"auc", r.auc},           {"train_seconds", r.train_seconds},
          {"status", r.status},     {"masks", r.masks},     {"config_hash", config_hash}};
}

SweepRow row_from_json(const json& j) {
  SweepRow r;
  r.n_hcus = j.at("n_hcus").get<std::size_t>();
  r.n_mcus = j.at("n_mcus").get<std::size_t>();
  r.density = j.at("density").get<double>();
  r.repetition = j.at("repetition").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.auc = j.at("auc").get<double>();
  r.train_seconds = j.at("train_seconds").get<double>();
  r.status = j.at("status").get<std::string>();
  r.masks = j.at("masks").get<std::string>();
  return r;
}

SweepRow blank_row(const SweepCell& c, std::uint64_t seed) {
  SweepRow r;
  r.n_hcus = c.n_hcus;
  r.n_mcus = c.n_mcus;
  r.density = c.density;
  r.repetition = c.repetition;
  r.seed = seed;
  return r;
}

// Trains and scores one cell; never throws. Writes <dir>/cell.json last.
void run_cell(const ExperimentConfig& cfg, const PreparedData& prepared, const SweepCell& cell,
              const fs::path& dir) {
  SweepRow row = blank_row(cell, cfg.seed);
  const std::string hash = cfg.hash();
  try {
    fs::create_directories(dir);
    std::ofstream log(dir / "train.log");
    TrainOptions options;
    options.per_epoch_outputs = false;
    TrainResult tr = train_model(cfg, prepared, dir, options, log);
    if (cfg.snapshots) {
      write_mask_snapshot(tr.hidden, dir / "masks", tr.hidden.epochs_completed(),
                          prepared.train.n_bins(), header_lines(hash, cfg.seed));
      row.masks = (dir / "masks").string();
    }
    const EvalReport report = evaluate(tr.hidden, tr.readout, prepared.table.hash(), prepared.test);
    row.accuracy = report.accuracy;
    row.auc = report.auc;
    row.train_seconds = tr.hidden_seconds + tr.readout_seconds;
  } catch (const std::exception& e) {
    row.status = failure(e.what());
  }
  try {
    write_text(dir / "cell.json", row_to_json(row, hash).dump(2) + "\n");
  } catch (const std::exception&) {
    // The parent reports a cell without cell.json as failed.
  }
}

std::optional<SweepRow> finished_row(const fs::path& dir, const std::string& hash) {
  const fs::path path = dir / "cell.json";
  if (!fs::exists(path)) return std::nullopt;
  try {
    json j = json::parse(read_text(path));
    if (j.value("config_hash", "") != hash) return std::nullopt;
    return row_from_json(j);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, const std::string& name,
                      const std::vector<SweepCell>& cells, std::ostream& log) {
  config.validate();
  const PreparedData prepared = cmd_prepare(config, log);
  const fs::path root = config.out / name;
  fs::create_directories(root / "cells");
  write_text(root / "config.json", config.to_json());

  std::vector<ExperimentConfig> configs;
  std::vector<fs::path> dirs;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    configs.push_back(cell_config(config, cells[i]));
    configs.back().validate();
    dirs.push_back(root / "cells" / cell_label(cells[i]));
    const auto done = finished_row(dirs[i], configs[i].hash());
    if (done && done->ok()) continue;
    std::error_code ignored;  // a broken cell path fails inside run_cell instead
    fs::remove(dirs[i] / "cell.json", ignored);
    pending.push_back(i);
  }
  log << name << ": " << cells.size() << " cells, " << cells.size() - pending.size()
      << " already done, " << config.jobs << " worker(s)\n";

  auto report_done = [&](std::size_t i) {
    const auto row = finished_row(dirs[i], configs[i].hash());
    log << name << ": " << cell_label(cells[i]) << " "
        << (row ? (row->ok() ? "accuracy " + num(row->accuracy) : row->status) : "no result")
        << "\n";
  };

  if (config.jobs <= 1) {
    for (std::size_t i : pending) {
      run_cell(configs[i], prepared, cells[i], dirs[i]);
      report_done(i);
    }
  } else {
    std::map<pid_t, std::size_t> live;
    std::size_t next = 0;
    while (next < pending.size() || !live.empty()) {
      while (live.size() < config.jobs && next < pending.size()) {
        const std::size_t i = pending[next++];
        log.flush();
        std::fflush(nullptr);
        const pid_t pid = fork();
        if (pid == 0) {
          run_cell(configs[i], prepared, cells[i], dirs[i]);
          std::fflush(nullptr);
          _exit(0);
        }
        if (pid < 0) {
          run_cell(configs[i], prepared, cells[i], dirs[i]);
          report_done(i);
          continue;
        }
        live.emplace(pid, i);
      }
      if (live.empty()) continue;
      int status = 0;
      const pid_t pid = waitpid(-1, &status, 0);
      if (pid < 0) break;
      auto it = live.find(pid);
      if (it == live.end()) continue;
      const std::size_t i = it->second;
      live.erase(it);
      if (!finished_row(dirs[i], configs[i].hash())) {
        SweepRow row = blank_row(cells[i], configs[i].seed);
        row.status = failure(WIFSIGNALED(status)
                                 ? "worker killed by signal " + std::to_string(WTERMSIG(status))
                                 : "worker exited with status " + std::to_string(WEXITSTATUS(status)));
        fs::create_directories(dirs[i]);
        write_text(dirs[i] / "cell.json", row_to_json(row, configs[i].hash()).dump(2) + "\n");
      }
      report_done(i);
    }
  }

  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto row = finished_row(dirs[i], configs[i].hash());
    if (!row) {
      row = blank_row(cells[i], configs[i].seed);
      row->status = "failed: no result";
    }
    result.rows.push_back(*row);
  }
  result.summary = summarize(result.rows);
  const std::string hash = config.hash();
  write_text(root / "rows.csv", result.rows_csv(hash, config.seed));
  write_text(root / "summary.csv", result.summary_csv(hash, config.seed));
  return result;
}

std::vector<SweepCell> capacity_cells(const ExperimentConfig& config) {
  std::vector<SweepCell> cells;
  for (std::size_t m : config.capacity.mcus) {
    for (std::size_t h : config.capacity.hcus) {
      for (std::size_t r = 0; r < config.repetitions; ++r) {
        cells.push_back({h, m, config.capacity.density, r});
      }
    }
  }
  return cells;
}

std::vector<SweepCell> receptive_field_cells(const ExperimentConfig& config) {
  const auto& rf = config.receptive_field;
  const std::vector<double> grid = rf.densities.empty() ? ReceptiveFieldSweep::default_grid()
                                                        : rf.densities;
  std::vector<SweepCell> cells;
  for (double d : grid) {
    for (std::size_t r = 0; r < config.repetitions; ++r) {
      cells.push_back({rf.n_hcus, rf.n_mcus, d, r});
    }
  }
  return cells;
}

SweepResult cmd_sweep_capacity(const ExperimentConfig& config, std::ostream& log) {
  return run_sweep(config, "sweep_capacity", capacity_cells(config), log);
}

SweepResult cmd_sweep_receptive_field(const ExperimentConfig& config, std::ostream& log) {
  return run_sweep(config, "sweep_rf", receptive_field_cells(config), log);
}

}  // namespace bcpnn::pipeline
