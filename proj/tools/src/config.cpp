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

#include "bcpnn/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bcpnn/error.hpp"

namespace bcpnn::pipeline {

using nlohmann::json;

namespace {

const char* granularity_name(MaskGranularity g) {
  return g == MaskGranularity::kBlock ? "block" : "component";
}

MaskGranularity parse_granularity(const std::string& s) {
  if (s == "component") return MaskGranularity::kComponent;
  if (s == "block") return MaskGranularity::kBlock;
  throw ConfigError("layer.granularity must be \"component\" or \"block\", got \"" + s + "\"");
}

const char* trace_update_name(TraceUpdate t) {
  return t == TraceUpdate::kPerSample ? "per_sample" : "batch_mean";
}

TraceUpdate parse_trace_update(const std::string& s) {
  if (s == "batch_mean") return TraceUpdate::kBatchMean;
  if (s == "per_sample") return TraceUpdate::kPerSample;
  throw ConfigError("train.trace_update must be \"batch_mean\" or \"per_sample\", got \"" + s + "\"");
}

// Shortest decimal that reads back as the same float, so 0.001f prints as
// 0.001 rather than its double expansion.
double tidy(float v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::stod(std::string(buf, end));
}

json to_document(const ExperimentConfig& c) {
  json data = {{"csv", c.data.csv.string()},
               {"limit", c.data.limit ? json(*c.data.limit) : json(nullptr)},
               {"train_fraction", c.data.train_fraction},
               {"train_per_class", c.data.train_per_class},
               {"test_per_class", c.data.test_per_class},
               {"n_bins", c.data.n_bins}};
  json layer = {{"n_hcus", c.layer.n_hcus},
                {"n_mcus", c.layer.n_mcus},
                {"density", c.layer.density},
                {"granularity", granularity_name(c.layer.granularity)}};
  const TrainConfig& t = c.train;
  json train = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"alpha", tidy(t.alpha)},
                {"plasticity_swaps", t.plasticity_swaps},
                {"noise_amplitude", tidy(t.noise_amplitude)},
                {"readout", std::string(to_string(t.readout))},
                {"sgd_lr", t.sgd_lr},
                {"sgd_epochs", t.sgd_epochs},
                {"sgd_batch_size", t.sgd_batch_size},
                {"trace_update", trace_update_name(t.trace_update)},
                {"regularization", t.regularization ? json{{"joint", tidy(t.regularization->joint)},
                                                           {"marginal", tidy(t.regularization->marginal)}}
                                                     : json(nullptr)},
                {"prior_gain", tidy(t.prior_gain)}};
  json capacity = {{"mcus", c.capacity.mcus},
                   {"hcus", c.capacity.hcus},
                   {"density", c.capacity.density}};
  json rf = {{"n_hcus", c.receptive_field.n_hcus},
             {"n_mcus", c.receptive_field.n_mcus},
             {"densities", c.receptive_field.densities}};
  return {{"seed", c.seed},
          {"repetitions", c.repetitions},
          {"out", c.out.string()},
          {"threads", c.threads},
          {"jobs", c.jobs},
          {"snapshots", c.snapshots},
          {"data", data},
          {"layer", layer},
          {"train", train},
          {"sweep_capacity", capacity},
          {"sweep_receptive_field", rf}};
}

// Reads `key` from `obj` into `out` when present; wrong types become ConfigError.
template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void reject_unknown(const json& obj, const json& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "config must be a JSON object"
                                                        : where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

// Non-negative integers arrive as JSON numbers; refuse negatives and fractions
// instead of letting them wrap.
void read_count(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  out = it->get<std::size_t>();
}

ExperimentConfig from_document(const json& doc) {
  const ExperimentConfig defaults;
  const json known = to_document(defaults);
  reject_unknown(doc, known, "");

  ExperimentConfig c;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) throw ConfigError("seed must be an integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  read_count(doc, "repetitions", c.repetitions, "");
  std::string out = c.out.string();
  read(doc, "out", out, "");
  c.out = out;
  read_count(doc, "threads", c.threads, "");
  read_count(doc, "jobs", c.jobs, "");
  read(doc, "snapshots", c.snapshots, "");

  if (auto it = doc.find("data"); it != doc.end()) {
    const json& d = *it;
    reject_unknown(d, known["data"], "data");
    std::string csv = c.data.csv.string();
    read(d, "csv", csv, "data");
    c.data.csv = csv;
    if (d.contains("limit") && !d["limit"].is_null()) {
      std::size_t limit = 0;
      read_count(d, "limit", limit, "data");
      c.data.limit = limit;
    }
    read(d, "train_fraction", c.data.train_fraction, "data");
    read_count(d, "train_per_class", c.data.train_per_class, "data");
    read_count(d, "test_per_class", c.data.test_per_class, "data");
    read_count(d, "n_bins", c.data.n_bins, "data");
  }
  if (auto it = doc.find("layer"); it != doc.end()) {
    const json& l = *it;
    reject_unknown(l, known["layer"], "layer");
    read_count(l, "n_hcus", c.layer.n_hcus, "layer");
    read_count(l, "n_mcus", c.layer.n_mcus, "layer");
    read(l, "density", c.layer.density, "layer");
    std::string g = granularity_name(c.layer.granularity);
    read(l, "granularity", g, "layer");
    c.layer.granularity = parse_granularity(g);
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    const json& t = *it;
    reject_unknown(t, known["train"], "train");
    read_count(t, "epochs", c.train.epochs, "train");
    read_count(t, "batch_size", c.train.batch_size, "train");
    read(t, "alpha", c.train.alpha, "train");
    read_count(t, "plasticity_swaps", c.train.plasticity_swaps, "train");
    read(t, "noise_amplitude", c.train.noise_amplitude, "train");
    std::string readout(to_string(c.train.readout));
    read(t, "readout", readout, "train");
    c.train.readout = parse_readout_kind(readout);
    read(t, "sgd_lr", c.train.sgd_lr, "train");
    read_count(t, "sgd_epochs", c.train.sgd_epochs, "train");
    read_count(t, "sgd_batch_size", c.train.sgd_batch_size, "train");
    std::string mode = trace_update_name(c.train.trace_update);
    read(t, "trace_update", mode, "train");
    c.train.trace_update = parse_trace_update(mode);
    // null means the alpha-derived pair.
    if (auto r = t.find("regularization"); r != t.end()) {
      if (r->is_null()) {
        c.train.regularization.reset();
      } else {
        reject_unknown(*r, json{{"joint", 0}, {"marginal", 0}}, "train.regularization");
        if (!r->contains("joint") || !r->contains("marginal")) {
          throw ConfigError("train.regularization needs both joint and marginal (or null)");
        }
        Regularization reg;
        read(*r, "joint", reg.joint, "train.regularization");
        read(*r, "marginal", reg.marginal, "train.regularization");
        c.train.regularization = reg;
      }
    }
    read(t, "prior_gain", c.train.prior_gain, "train");
  }
  if (auto it = doc.find("sweep_capacity"); it != doc.end()) {
    reject_unknown(*it, known["sweep_capacity"], "sweep_capacity");
    read(*it, "mcus", c.capacity.mcus, "sweep_capacity");
    read(*it, "hcus", c.capacity.hcus, "sweep_capacity");
    read(*it, "density", c.capacity.density, "sweep_capacity");
  }
  if (auto it = doc.find("sweep_receptive_field"); it != doc.end()) {
    reject_unknown(*it, known["sweep_receptive_field"], "sweep_receptive_field");
    read_count(*it, "n_hcus", c.receptive_field.n_hcus, "sweep_receptive_field");
    read_count(*it, "n_mcus", c.receptive_field.n_mcus, "sweep_receptive_field");
    read(*it, "densities", c.receptive_field.densities, "sweep_receptive_field");
  }
  c.train.seed = c.seed;
  return c;
}

json parse_value(std::string_view value) {
  json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) return json(std::string(value));
  return parsed;
}

}  // namespace

std::vector<double> ReceptiveFieldSweep::default_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(k / 20.0);
  return grid;
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
  return from_document(doc);
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return from_json(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string ExperimentConfig::to_json() const {
  ExperimentConfig resolved = *this;
  if (resolved.receptive_field.densities.empty()) {
    resolved.receptive_field.densities = ReceptiveFieldSweep::default_grid();
  }
  return to_document(resolved).dump(2) + "\n";
}

void ExperimentConfig::set(std::string_view path, std::string_view value) {
  json doc = json::parse(to_json());
  json* node = &doc;
  std::string key;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    key = std::string(path.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown config key '" + std::string(path) + "'");
    }
    if (dot == std::string_view::npos) break;
    node = &(*node)[key];
    start = dot + 1;
  }
  (*node)[key] = parse_value(value);
  *this = from_document(doc);
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction must lie in (0, 1)");
  }
  if (data.train_per_class < 1 || data.test_per_class < 1) {
    throw ConfigError("data.train_per_class and data.test_per_class must be positive");
  }
  if (data.n_bins < 2) throw ConfigError("data.n_bins must be at least 2");
  geometry(kHiggsFeatures * data.n_bins).validate();
  train.validate();
  if (capacity.mcus.empty() || capacity.hcus.empty()) {
    throw ConfigError("sweep_capacity needs at least one M and one H");
  }
  for (std::size_t m : capacity.mcus) {
    if (m < 1) throw ConfigError("sweep_capacity.mcus entries must be positive");
  }
  for (std::size_t h : capacity.hcus) {
    if (h < 1) throw ConfigError("sweep_capacity.hcus entries must be positive");
  }
  if (!(capacity.density >= 0.0 && capacity.density <= 1.0)) {
    throw ConfigError("sweep_capacity.density must lie in [0, 1]");
  }
  if (receptive_field.n_hcus < 1 || receptive_field.n_mcus < 1) {
    throw ConfigError("sweep_receptive_field needs positive n_hcus and n_mcus");
  }
  for (double d : receptive_field.densities) {
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("sweep_receptive_field densities must lie in [0, 1]");
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const {
  json doc = json::parse(to_json());
  doc.erase("out");
  doc.erase("threads");
  doc.erase("jobs");
  return fnv1a_hex(doc.dump());
}

std::string ExperimentConfig::data_hash() const {
  json doc = json::parse(to_json());
  json data = doc["data"];
  data["seed"] = seed;
  return fnv1a_hex(data.dump());
}

LayerGeometry ExperimentConfig::geometry(std::size_t n_inputs) const {
  LayerGeometry g;
  g.n_inputs = n_inputs;
  g.n_hcus = layer.n_hcus;
  g.n_mcus = layer.n_mcus;
  g.density = layer.density;
  g.granularity = layer.granularity;
  g.block_size = layer.granularity == MaskGranularity::kBlock ? data.n_bins : 1;
  return g;
}

}  // namespace bcpnn::pipeline
