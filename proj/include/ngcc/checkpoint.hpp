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
#include "ngcc/model.hpp"

namespace ngcc {

/// Container layout (all little-endian):
///   "NGCCKPT\0" | u32 version | u32 tensor count |
///   per tensor: u32 name length, name bytes, u32 rank, u32 dims..., f32 values.
/// A JSON manifest with the same stem and a .json extension sits alongside.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  ModelConfig model;
  std::string architecture_hash;
  std::string frontend_hash;
  std::string config_hash;
  std::uint64_t seed = 0;
  long step = 0;
  std::size_t frames_seen = 0;

  nlohmann::json to_json() const;
  static CheckpointInfo from_json(const nlohmann::json& j);
};

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& bin);

template <typename T>
void save_checkpoint(const std::filesystem::path& bin, const NgccModel<T>& model,
                     CheckpointInfo info);

/// Throws IncompatibleError when names, shapes or the architecture hash
/// disagree with the manifest, std::runtime_error on I/O failure.
template <typename T>
NgccModel<T> load_checkpoint(const std::filesystem::path& bin, CheckpointInfo* info = nullptr);

}  // namespace ngcc
