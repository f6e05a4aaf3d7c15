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

#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "ngcc/dataset.hpp"

using namespace ngcc;
using nlohmann::json;

namespace {

DatasetSpec small_spec(json extra = json::object()) {
  json j = {{"frames", 24}, {"polyphony", {0.2, 0.4, 0.3, 0.1}}};
  j.merge_patch(extra);
  return parse_dataset_spec(j);
}

std::string config_error(const json& j) {
  try {
    parse_dataset_spec(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("defaults") {
  const auto s = parse_dataset_spec(json::object());
  CHECK(s.tau_max() == 6);
  CHECK(s.window == 480);
  CHECK(s.sample_rate == 24000.0);
  CHECK(s.geometry.size() == 4);
  CHECK(s.waveform == WaveformFamily::kWhite);
}

TEST_CASE("spec json round trip") {
  const auto s = small_spec({{"room", {{"enabled", true}}}, {"snr_db", {5, 15}}});
  const auto t = parse_dataset_spec(dataset_spec_to_json(s));
  CHECK(dataset_spec_to_json(t) == dataset_spec_to_json(s));
  CHECK(frontend_hash(s) == frontend_hash(t));
  auto u = s;
  u.window = 512;
  CHECK(frontend_hash(u) != frontend_hash(s));
}

TEST_CASE("config errors name the field") {
  CHECK(config_error({{"frames", -1}}).find("dataset.frames") != std::string::npos);
  CHECK(config_error({{"polyphony", {0, 0}}}).find("dataset.polyphony") != std::string::npos);
  CHECK(config_error({{"polyphony", "x"}}).find("dataset.polyphony") != std::string::npos);
  CHECK(config_error({{"window", 8}}).find("dataset.window") != std::string::npos);
  CHECK(config_error({{"waveform", {{"family", "pink"}}}}).find("dataset.waveform") != std::string::npos);
  CHECK(config_error({{"elevation_deg", {-100, 0}}}).find("dataset.elevation_deg") != std::string::npos);
  CHECK(config_error({{"array", {{"type", "ring"}}}}).find("dataset.array") != std::string::npos);
}

TEST_CASE("frames are deterministic and independent of generation order") {
  const auto s = small_spec();
  const auto all = sample_dataset(s, 11);
  REQUIRE(all.size() == 24);
  for (std::uint64_t i : {23u, 0u, 7u}) {
    const auto f = generate_frame(s, 11, i);
    CHECK(f.channels == all[i].channels);
    CHECK(f.labels == all[i].labels);
  }
  const auto other = generate_frame(s, 12, 0);
  CHECK(other.channels != all[0].channels);
}

TEST_CASE("frame shapes and label consistency") {
  const auto s = small_spec();
  const auto frames = sample_dataset(s, 5);
  std::set<int> seen;
  const auto pairs = mic_pairs(4);
  for (const auto& f : frames) {
    REQUIRE(f.channels.size() == 4);
    for (const auto& ch : f.channels) CHECK(ch.size() == 480);
    REQUIRE(f.labels.size() == 6);
    CHECK(f.num_sources <= 3);
    CHECK(static_cast<int>(f.source_positions.size()) == f.num_sources);
    seen.insert(f.num_sources);
    for (std::size_t p = 0; p < 6; ++p) {
      REQUIRE(static_cast<int>(f.labels[p].size()) == f.num_sources);
      for (int e = 0; e < f.num_sources; ++e) {
        CHECK(std::abs(f.labels[p][e]) <= 6);
        const auto& m = s.geometry.mics();
        CHECK(f.labels[p][e] == tdoa_lag(f.source_positions[e], m[pairs[p].first],
                                         m[pairs[p].second], 24000.0, 343.0));
      }
    }
    if (f.num_sources == 0)
      for (const auto& ch : f.channels)
        for (float v : ch) CHECK(std::isfinite(v));
  }
  CHECK(seen.size() >= 3);
}

TEST_CASE("polyphony weights are respected") {
  const auto s = small_spec({{"frames", 30}, {"polyphony", {0, 0, 1}}});
  for (const auto& f : sample_dataset(s, 1)) CHECK(f.num_sources == 2);
}

TEST_CASE("sources keep their distance and elevation ranges") {
  const auto s = small_spec({{"frames", 40}, {"polyphony", {0, 1}}, {"distance_m", {1.5, 2.0}},
                             {"elevation_deg", {-10, 10}}});
  for (const auto& f : sample_dataset(s, 2)) {
    const auto& p = f.source_positions[0];
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    CHECK(r >= 1.5 - 1e-9);
    CHECK(r <= 2.0 + 1e-9);
    CHECK(std::abs(std::asin(p[2] / r)) * 180 / 3.141592653589793 <= 10 + 1e-9);
  }
}

TEST_CASE("event selection keeps one subset across pairs") {
  const auto s = small_spec({{"polyphony", {0, 0, 0, 0, 0, 1}}});
  const auto f = generate_frame(s, 3, 4);
  REQUIRE(f.num_sources == 5);
  const auto g = select_events(f, 3, 99);
  CHECK(g.num_sources == 3);
  REQUIRE(g.source_positions.size() == 3);
  for (int e = 0; e < 3; ++e) {
    int src = -1;
    for (int k = 0; k < 5; ++k)
      if (f.source_positions[k] == g.source_positions[e]) src = k;
    REQUIRE(src >= 0);
    for (std::size_t p = 0; p < 6; ++p) CHECK(g.labels[p][e] == f.labels[p][src]);
  }
  CHECK(select_events(f, 3, 99).labels == g.labels);
  CHECK(select_events(f, 5, 99).labels == f.labels);
  CHECK(g.channels == f.channels);
}

TEST_CASE("write and read back") {
  auto s = small_spec({{"frames", 6}});
  s.snr_db.reset();
  const auto frames = sample_dataset(s, 8);
  const auto dir = test::scratch("dataset_io");
  write_dataset(dir, s, 8, frames);
  const auto back = read_dataset(dir);
  REQUIRE(back.frames.size() == 6);
  CHECK(back.manifest.at("tau_max") == 6);
  CHECK(back.manifest.at("frontend_hash") == frontend_hash(s));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.frames[i].channels == frames[i].channels);
    CHECK(back.frames[i].labels == frames[i].labels);
    CHECK(back.frames[i].num_sources == frames[i].num_sources);
    CHECK(back.frames[i].seed == frames[i].seed);
    CHECK(std::isinf(back.frames[i].snr_db));
  }
  CHECK(std::filesystem::file_size(dir / "frame_000000.f32") == 4 * 480 * 4);
  CHECK_THROWS_AS(read_dataset(dir / "nope"), ConfigError);
}

TEST_CASE("reverberant and band-limited frames render") {
  const auto s = small_spec({{"frames", 8},
                             {"waveform", {{"family", "mixed"}}},
                             {"room", {{"enabled", true}, {"reflection", {0.3, 0.6}}}}});
  for (const auto& f : sample_dataset(s, 4))
    for (const auto& ch : f.channels)
      for (float v : ch) CHECK(std::isfinite(v));
}

}  // TEST_SUITE
