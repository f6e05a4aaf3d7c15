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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "ngcc/dataset.hpp"
#include "ngcc/eval.hpp"
#include "ngcc/model.hpp"
#include "ngcc/train.hpp"

namespace ngcc {

struct EvalConfig {
  int tolerance = 1;
  int baseline_peaks = 2;
  double threshold = kDefaultConfidenceThreshold;
  std::size_t dump_posteriors = 0;

  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

/// One reproducible experiment. The "test_dataset" section is a JSON merge
/// patch applied on top of "dataset".
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  DatasetSpec dataset;
  DatasetSpec test_dataset;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  std::uint64_t train_seed() const { return derive_seed(seed, 0x7a1aULL); }
  std::uint64_t test_seed() const { return derive_seed(seed, 0x7e57ULL); }
  std::uint64_t init_seed() const { return derive_seed(seed, 0x1417ULL); }

  /// Fully resolved form, defaults filled in.
  nlohmann::json to_json() const;
  /// Digest of to_json() without the output directory.
  std::string hash() const;
};

/// Relative paths resolve against base_dir. Throws ConfigError naming the
/// offending field.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace ngcc
