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

#include "ngcc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ngcc/binary_io.hpp"
#include "ngcc/common.hpp"

namespace ngcc {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'N', 'G', 'C', 'C', 'K', 'P', 'T', '\0'};
}  // namespace

json CheckpointInfo::to_json() const {
  return json{{"format_version", kCheckpointVersion},
              {"architecture_hash", architecture_hash},
              {"frontend_hash", frontend_hash},
              {"config_hash", config_hash},
              {"seed", seed},
              {"step", step},
              {"frames_seen", frames_seen},
              {"model", model.to_json()}};
}

CheckpointInfo CheckpointInfo::from_json(const json& j) {
  CheckpointInfo info;
  try {
    info.model = ModelConfig::from_json(j.at("model"));
    info.architecture_hash = j.at("architecture_hash").get<std::string>();
    info.frontend_hash = j.value("frontend_hash", "");
    info.config_hash = j.value("config_hash", "");
    info.seed = j.at("seed").get<std::uint64_t>();
    info.step = j.at("step").get<long>();
    info.frames_seen = j.value("frames_seen", std::size_t{0});
  } catch (const json::exception& e) {
    throw IncompatibleError(std::string("checkpoint manifest: ") + e.what());
  }
  return info;
}

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& bin) {
  auto p = bin;
  p.replace_extension(".json");
  return p;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& bin, const NgccModel<T>& model,
                     CheckpointInfo info) {
  info.model = model.config();
  info.architecture_hash = model.config().architecture_hash();
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  const auto tensors = model.named_tensors();
  io::put_le<std::uint32_t>(os, kCheckpointVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    io::put_string(os, name);
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (T v : t->values) io::put_f32(os, static_cast<float>(v));
  }
  io::write_file(bin, os.str());
  io::write_file(checkpoint_manifest_path(bin), info.to_json().dump(2) + "\n");
}

template <typename T>
NgccModel<T> load_checkpoint(const std::filesystem::path& bin, CheckpointInfo* info_out) {
  const auto manifest_path = checkpoint_manifest_path(bin);
  if (!std::filesystem::exists(bin)) throw std::runtime_error("checkpoint not found: " + bin.string());
  if (!std::filesystem::exists(manifest_path))
    throw std::runtime_error("checkpoint manifest not found: " + manifest_path.string());
  json j;
  try {
    j = json::parse(io::read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw IncompatibleError(std::string("checkpoint manifest: ") + e.what());
  }
  const CheckpointInfo info = CheckpointInfo::from_json(j);
  if (info.model.architecture_hash() != info.architecture_hash)
    throw IncompatibleError("checkpoint: architecture hash does not match its model config");
  NgccModel<T> model(info.model);

  std::istringstream is(io::read_file(bin), std::ios::binary);
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + sizeof magic, kMagic))
    throw IncompatibleError("checkpoint: bad magic in " + bin.string());
  const auto version = io::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw IncompatibleError("checkpoint: unsupported version " + std::to_string(version));
  auto params = model.parameters();
  const auto count = io::get_le<std::uint32_t>(is);
  if (count != params.size())
    throw IncompatibleError("checkpoint: expected " + std::to_string(params.size()) +
                            " tensors, found " + std::to_string(count));
  for (auto& p : params) {
    const std::string name = io::get_string(is);
    if (name != p.name) throw IncompatibleError("checkpoint: expected tensor " + p.name + ", found " + name);
    const auto rank = io::get_le<std::uint32_t>(is);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(io::get_le<std::uint32_t>(is));
    if (shape != p.tensor->shape) throw IncompatibleError("checkpoint: shape mismatch for " + name);
    for (auto& v : p.tensor->values) v = static_cast<T>(io::get_f32(is));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw IncompatibleError("checkpoint: trailing bytes in " + bin.string());
  if (info_out) *info_out = info;
  return model;
}

template void save_checkpoint<float>(const std::filesystem::path&, const NgccModel<float>&,
                                     CheckpointInfo);
template void save_checkpoint<double>(const std::filesystem::path&, const NgccModel<double>&,
                                      CheckpointInfo);
template NgccModel<float> load_checkpoint<float>(const std::filesystem::path&, CheckpointInfo*);
template NgccModel<double> load_checkpoint<double>(const std::filesystem::path&, CheckpointInfo*);

}  // namespace ngcc
