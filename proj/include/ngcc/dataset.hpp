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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngcc/scene.hpp"

namespace ngcc {

enum class WaveformFamily { kWhite, kBandLimited, kMixed, kSnippets };

struct RoomSpec {
  bool enabled = false;
  Vec3 dims{6.0, 5.0, 3.0};
  double reflection_min = 0.0;
  double reflection_max = 0.6;
  int max_order = 2;
};

/// Everything needed to draw i.i.d. labelled frames. Parsed from the
/// "dataset" section of an experiment config.
struct DatasetSpec {
  std::size_t frames = 1000;
  ArrayGeometry geometry = tetrahedral_array(0.084);
  nlohmann::json array_json;  // as given, for echoing
  Vec3 array_center{3.0, 2.5, 1.5};
  double sample_rate = 24000.0;
  double speed_of_sound = kSpeedOfSound;
  std::size_t window = 480;

  std::vector<double> polyphony{0.0, 1.0};  // weight of P = 0, 1, ...

  WaveformFamily waveform = WaveformFamily::kWhite;
  double burst_ms = 100.0;
  double band_min_hz = 100.0;   // band-limited lower edge bound
  double band_max_hz = 11000.0;  // band-limited upper edge bound
  double min_bandwidth_hz = 500.0;
  std::vector<std::string> snippets;  // raw little-endian float32 mono files

  std::optional<std::pair<double, double>> snr_db = std::pair{20.0, 20.0};
  std::pair<double, double> gain_db{0.0, 0.0};
  std::pair<double, double> distance_m{1.0, 2.5};
  std::pair<double, double> elevation_deg{-45.0, 45.0};
  double min_separation_deg = 0.0;

  RoomSpec room;

  int max_polyphony() const { return static_cast<int>(polyphony.size()) - 1; }
  int tau_max() const { return max_tdoa(geometry, sample_rate, speed_of_sound); }
};

/// Throws ConfigError naming the field on invalid input.
DatasetSpec parse_dataset_spec(const nlohmann::json& j);
nlohmann::json dataset_spec_to_json(const DatasetSpec& spec);

/// Digest of what fixes the model's input layout: geometry, rate, c, window.
std::string frontend_hash(const ArrayGeometry& geometry, double fs, double c,
                          std::size_t window);
inline std::string frontend_hash(const DatasetSpec& s) {
  return frontend_hash(s.geometry, s.sample_rate, s.speed_of_sound, s.window);
}

struct LabeledFrame {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<float>> channels;  // [mic][sample]
  TdoaLabelSet labels;                       // [pair][event]
  int num_sources = 0;
  std::vector<Vec3> source_positions;  // relative to the array centre
  double snr_db = 0.0;                 // +inf when noise-free
};

/// Draws frame `index` of the stream. Each frame uses its own RNG derived
/// from (seed, index), so frames can be generated in any order or in parallel.
LabeledFrame generate_frame(const DatasetSpec& spec, std::uint64_t seed,
                            std::uint64_t index);

/// Frames [0, spec.frames), generated in parallel.
std::vector<LabeledFrame> sample_dataset(const DatasetSpec& spec,
                                         std::uint64_t seed);

/// Keeps at most `max_events` labels per pair, choosing the same random
/// subset of events for every pair. Deterministic in `seed`.
LabeledFrame select_events(const LabeledFrame& frame, int max_events,
                           std::uint64_t seed);

/// Persisted dataset layout: frame_NNNNNN.f32 (planar little-endian float32),
/// frame_NNNNNN.json (labels, P, geometry hash, seed) and manifest.json.
void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec,
                   std::uint64_t seed, const std::vector<LabeledFrame>& frames);

struct LoadedDataset {
  nlohmann::json manifest;
  std::vector<LabeledFrame> frames;
};

LoadedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace ngcc
