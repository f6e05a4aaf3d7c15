// Copyright 2026 The ngcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ngcc/config.hpp"

#include <algorithm>

#include "ngcc/binary_io.hpp"
#include "ngcc/common.hpp"

namespace ngcc {

using nlohmann::json;

json EvalConfig::to_json() const {
  return json{{"tolerance", tolerance},
              {"baseline_peaks", baseline_peaks},
              {"threshold", threshold},
              {"dump_posteriors", dump_posteriors}};
}

EvalConfig EvalConfig::from_json(const json& j) {
  EvalConfig c;
  if (!j.is_object()) throw ConfigError("eval: expected an object");
  auto get = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(dst);
    } catch (const json::exception&) {
      throw ConfigError(std::string("eval.") + name + ": has the wrong type");
    }
  };
  get("tolerance", c.tolerance);
  get("baseline_peaks", c.baseline_peaks);
  get("threshold", c.threshold);
  get("dump_posteriors", c.dump_posteriors);
  for (const auto& [key, value] : j.items())
    if (key != "tolerance" && key != "baseline_peaks" && key != "threshold" &&
        key != "dump_posteriors")
      throw ConfigError("eval." + key + ": unknown field");
  if (c.tolerance < 0) throw ConfigError("eval.tolerance: must be >= 0");
  if (c.baseline_peaks < 0) throw ConfigError("eval.baseline_peaks: must be >= 0");
  if (!(c.threshold > 0.0 && c.threshold <= 1.0))
    throw ConfigError("eval.threshold: must lie in (0, 1]");
  return c;
}

json ExperimentConfig::to_json() const {
  json model_json = model.to_json();
  return json{{"seed", seed},
              {"output_dir", output_dir.string()},
              {"dataset", dataset_spec_to_json(dataset)},
              {"test_dataset", dataset_spec_to_json(test_dataset)},
              {"model", model_json},
              {"train", train.to_json()},
              {"eval", eval.to_json()}};
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  return hex64(fnv1a(j.dump()));
}

namespace {

void resolve_snippets(json& dataset, const std::filesystem::path& base) {
  if (base.empty() || !dataset.contains("waveform")) return;
  json& wf = dataset["waveform"];
  if (!wf.is_object() || !wf.contains("snippets") || !wf["snippets"].is_array()) return;
  for (auto& s : wf["snippets"])
    if (s.is_string() && std::filesystem::path(s.get<std::string>()).is_relative())
      s = (base / s.get<std::string>()).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const char* known[] = {"seed", "output_dir", "dataset", "test_dataset",
                                "model", "train", "eval"};
  for (const auto& [key, value] : j.items())
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      throw ConfigError(key + ": unknown field");

  ExperimentConfig c;
  if (!j.contains("seed")) throw ConfigError("seed: required");
  const auto& seed = j.at("seed");
  if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
    throw ConfigError("seed: must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  const std::string out = j.value("output_dir", std::string("out"));
  c.output_dir = std::filesystem::path(out).is_relative() && !base.empty() ? base / out
                                                                            : std::filesystem::path(out);
  c.output_dir = c.output_dir.lexically_normal();

  json train_ds = j.value("dataset", json::object());
  if (!train_ds.is_object()) throw ConfigError("dataset: expected an object");
  json test_ds = train_ds;
  if (j.contains("test_dataset")) {
    if (!j.at("test_dataset").is_object()) throw ConfigError("test_dataset: expected an object");
    test_ds.merge_patch(j.at("test_dataset"));
  }
  resolve_snippets(train_ds, base);
  resolve_snippets(test_ds, base);
  c.dataset = parse_dataset_spec(train_ds);
  try {
    c.test_dataset = parse_dataset_spec(test_ds);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("test_") + e.what());
  }
  if (frontend_hash(c.dataset) != frontend_hash(c.test_dataset))
    throw ConfigError("test_dataset: array, sample rate, speed of sound and window must match dataset");

  // Input-layout fields follow the dataset; explicit values must agree.
  json mj = j.value("model", json::object());
  if (!mj.is_object()) throw ConfigError("model: expected an object");
  const json derived{{"tau_max", c.dataset.tau_max()},
                     {"num_mics", c.dataset.geometry.size()},
                     {"window", c.dataset.window},
                     {"sample_rate", c.dataset.sample_rate}};
  for (const auto& [key, value] : derived.items()) {
    if (mj.contains(key) && mj.at(key) != value)
      throw ConfigError("model." + key + ": " + mj.at(key).dump() + " disagrees with the dataset (" +
                        value.dump() + ")");
    mj[key] = value;
  }
  if (!mj.contains("init_seed")) mj["init_seed"] = c.init_seed();
  c.model = ModelConfig::from_json(mj);
  c.model.validate();

  c.train = TrainConfig::from_json(j.value("train", json::object()));
  c.eval = EvalConfig::from_json(j.value("eval", json::object()));
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception&) {
    throw ConfigError("config: cannot read " + path.string());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

}  // namespace ngcc
