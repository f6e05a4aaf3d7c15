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

#include "ngcc/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "ngcc/binary_io.hpp"
#include "ngcc/fft.hpp"

namespace ngcc {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw ConfigError("dataset." + field + ": " + why);
}

template <typename T>
T field(const json& j, const std::string& name, T fallback) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    bad(name, "has the wrong type");
  }
}

std::pair<double, double> range(const json& j, const std::string& name,
                                std::pair<double, double> fallback) {
  if (!j.contains(name)) return fallback;
  const json& v = j.at(name);
  try {
    if (v.is_number()) return {v.get<double>(), v.get<double>()};
    if (v.is_array() && v.size() == 2) {
      std::pair<double, double> r{v[0].get<double>(), v[1].get<double>()};
      if (r.first > r.second) bad(name, "range minimum exceeds maximum");
      return r;
    }
  } catch (const json::exception&) {
  }
  bad(name, "expected a number or a [min, max] pair");
}

Vec3 vec3(const json& v, const std::string& name) {
  try {
    if (v.is_array() && v.size() == 3)
      return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  } catch (const json::exception&) {
  }
  bad(name, "expected [x, y, z]");
}

const char* family_name(WaveformFamily f) {
  switch (f) {
    case WaveformFamily::kWhite: return "white";
    case WaveformFamily::kBandLimited: return "bandlimited";
    case WaveformFamily::kMixed: return "mixed";
    case WaveformFamily::kSnippets: return "snippets";
  }
  return "white";
}

}  // namespace

DatasetSpec parse_dataset_spec(const json& j) {
  if (!j.is_object()) throw ConfigError("dataset: expected an object");
  DatasetSpec s;
  const long frames = field<long>(j, "frames", static_cast<long>(s.frames));
  if (frames < 0) bad("frames", "must be non-negative");
  s.frames = static_cast<std::size_t>(frames);

  s.array_json = j.value("array", json{{"type", "tetrahedral"}, {"diameter", 0.084}});
  try {
    if (s.array_json.contains("positions")) {
      std::vector<Vec3> mics;
      for (const auto& p : s.array_json.at("positions"))
        mics.push_back(vec3(p, "array.positions"));
      s.geometry = ArrayGeometry(std::move(mics));
    } else {
      const auto type = field<std::string>(s.array_json, "type", "tetrahedral");
      if (type != "tetrahedral") bad("array.type", "unknown array type '" + type + "'");
      const double d = field<double>(s.array_json, "diameter", 0.084);
      if (!(d > 0.0)) bad("array.diameter", "must be positive");
      s.geometry = tetrahedral_array(d);
    }
  } catch (const ContractError& e) {
    bad("array", e.what());
  }
  if (j.contains("array_center")) s.array_center = vec3(j.at("array_center"), "array_center");

  s.sample_rate = field<double>(j, "sample_rate", s.sample_rate);
  if (!(s.sample_rate > 0.0)) bad("sample_rate", "must be positive");
  s.speed_of_sound = field<double>(j, "speed_of_sound", s.speed_of_sound);
  if (!(s.speed_of_sound > 0.0)) bad("speed_of_sound", "must be positive");
  const long window = field<long>(j, "window", static_cast<long>(s.window));
  if (window <= 0) bad("window", "must be positive");
  s.window = static_cast<std::size_t>(window);
  if (2 * static_cast<std::size_t>(s.tau_max()) >= s.window)
    bad("window", "too short for the array's lag range");

  if (j.contains("polyphony")) {
    try {
      s.polyphony = j.at("polyphony").get<std::vector<double>>();
    } catch (const json::exception&) {
      bad("polyphony", "expected an array of weights indexed by source count");
    }
  }
  if (s.polyphony.empty()) bad("polyphony", "must not be empty");
  double total = 0.0;
  for (double w : s.polyphony) {
    if (!(w >= 0.0) || !std::isfinite(w)) bad("polyphony", "weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) bad("polyphony", "weights must not all be zero");

  const json wf = j.value("waveform", json::object());
  const auto family = field<std::string>(wf, "family", "white");
  if (family == "white") s.waveform = WaveformFamily::kWhite;
  else if (family == "bandlimited") s.waveform = WaveformFamily::kBandLimited;
  else if (family == "mixed") s.waveform = WaveformFamily::kMixed;
  else if (family == "snippets") s.waveform = WaveformFamily::kSnippets;
  else bad("waveform.family", "unknown family '" + family + "'");
  s.burst_ms = field<double>(wf, "burst_ms", s.burst_ms);
  if (!(s.burst_ms > 0.0)) bad("waveform.burst_ms", "must be positive");
  const auto band = range(wf, "band_hz", {s.band_min_hz, s.band_max_hz});
  s.band_min_hz = band.first;
  s.band_max_hz = band.second;
  if (s.band_min_hz < 0.0 || s.band_max_hz > s.sample_rate / 2)
    bad("waveform.band_hz", "must lie within [0, Nyquist]");
  s.min_bandwidth_hz = field<double>(wf, "min_bandwidth_hz", s.min_bandwidth_hz);
  if (s.min_bandwidth_hz <= 0.0 || s.min_bandwidth_hz > s.band_max_hz - s.band_min_hz)
    bad("waveform.min_bandwidth_hz", "must be positive and fit inside band_hz");
  s.snippets = field<std::vector<std::string>>(wf, "snippets", {});
  if (s.waveform == WaveformFamily::kSnippets && s.snippets.empty())
    bad("waveform.snippets", "snippet family needs at least one file");

  if (j.contains("snr_db") && j.at("snr_db").is_null()) s.snr_db.reset();
  else s.snr_db = range(j, "snr_db", *s.snr_db);
  s.gain_db = range(j, "gain_db", s.gain_db);
  s.distance_m = range(j, "distance_m", s.distance_m);
  if (!(s.distance_m.first > 0.0)) bad("distance_m", "must be positive");
  s.elevation_deg = range(j, "elevation_deg", s.elevation_deg);
  if (s.elevation_deg.first < -90.0 || s.elevation_deg.second > 90.0)
    bad("elevation_deg", "must lie within [-90, 90]");
  s.min_separation_deg = field<double>(j, "min_separation_deg", s.min_separation_deg);
  if (s.min_separation_deg < 0.0 || s.min_separation_deg > 180.0)
    bad("min_separation_deg", "must lie within [0, 180]");

  const json room = j.value("room", json::object());
  s.room.enabled = field<bool>(room, "enabled", false);
  if (room.contains("dims")) s.room.dims = vec3(room.at("dims"), "room.dims");
  const auto refl = range(room, "reflection", {s.room.reflection_min, s.room.reflection_max});
  if (refl.first < 0.0 || refl.second > 0.9) bad("room.reflection", "must lie within [0, 0.9]");
  s.room.reflection_min = refl.first;
  s.room.reflection_max = refl.second;
  s.room.max_order = field<int>(room, "max_order", s.room.max_order);
  if (s.room.max_order < 0 || s.room.max_order > 4) bad("room.max_order", "must lie within [0, 4]");
  if (s.room.enabled) {
    Shoebox box{s.room.dims, 0.0, 0};
    for (int m = 0; m < s.geometry.size(); ++m) {
      const Vec3& r = s.geometry.mics()[m];
      if (!box.contains({r[0] + s.array_center[0], r[1] + s.array_center[1],
                         r[2] + s.array_center[2]}))
        bad("array_center", "microphones must lie inside the room");
    }
  }
  return s;
}

json dataset_spec_to_json(const DatasetSpec& s) {
  json j;
  j["frames"] = s.frames;
  j["array"] = s.array_json;
  j["array_center"] = s.array_center;
  j["sample_rate"] = s.sample_rate;
  j["speed_of_sound"] = s.speed_of_sound;
  j["window"] = s.window;
  j["polyphony"] = s.polyphony;
  j["waveform"] = {{"family", family_name(s.waveform)},
                   {"burst_ms", s.burst_ms},
                   {"band_hz", {s.band_min_hz, s.band_max_hz}},
                   {"min_bandwidth_hz", s.min_bandwidth_hz},
                   {"snippets", s.snippets}};
  j["snr_db"] = s.snr_db ? json{s.snr_db->first, s.snr_db->second} : json(nullptr);
  j["gain_db"] = {s.gain_db.first, s.gain_db.second};
  j["distance_m"] = {s.distance_m.first, s.distance_m.second};
  j["elevation_deg"] = {s.elevation_deg.first, s.elevation_deg.second};
  j["min_separation_deg"] = s.min_separation_deg;
  j["room"] = {{"enabled", s.room.enabled},
               {"dims", s.room.dims},
               {"reflection", {s.room.reflection_min, s.room.reflection_max}},
               {"max_order", s.room.max_order}};
  return j;
}

std::string frontend_hash(const ArrayGeometry& geometry, double fs, double c,
                          std::size_t window) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "|%.17g|%.17g|%zu", fs, c, window);
  return hex64(fnv1a(geometry.hash() + buf));
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_direction(Rng& rng, const DatasetSpec& spec) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double az = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double sin_el = uniform(rng, std::sin(spec.elevation_deg.first * kDeg),
                                std::sin(spec.elevation_deg.second * kDeg));
  const double cos_el = std::sqrt(std::max(0.0, 1.0 - sin_el * sin_el));
  return {cos_el * std::cos(az), cos_el * std::sin(az), sin_el};
}

double angle_deg(const Vec3& a, const Vec3& b) {
  double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  dot = std::clamp(dot, -1.0, 1.0);
  return std::acos(dot) * 180.0 / std::numbers::pi;
}

void normalize_rms(std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e == 0.0) return;
  const double s = 1.0 / std::sqrt(e / static_cast<double>(x.size()));
  for (double& v : x) v *= s;
}

std::vector<double> white_noise(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

std::vector<double> band_limited_noise(Rng& rng, std::size_t n,
                                       const DatasetSpec& spec) {
  const double bw = uniform(rng, spec.min_bandwidth_hz,
                            spec.band_max_hz - spec.band_min_hz);
  const double lo = uniform(rng, spec.band_min_hz, spec.band_max_hz - bw);
  const double hi = lo + bw;
  auto x = white_noise(rng, n);
  Dft<double> dft(n);
  std::vector<std::complex<double>> spec_bins(n), out(n);
  dft.forward_real(x, spec_bins);
  const double df = spec.sample_rate / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) * df;
    if (f < lo || f > hi) spec_bins[k] = 0.0;
  }
  dft.inverse(spec_bins, out);
  for (std::size_t i = 0; i < n; ++i) x[i] = out[i].real();
  normalize_rms(x);
  return x;
}

std::vector<double> load_snippet(const std::string& path) {
  const std::string bytes = io::read_file(path);
  std::vector<double> x(bytes.size() / 4);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    x[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  if (x.empty()) throw ConfigError("dataset.waveform.snippets: empty file " + path);
  return x;
}

std::vector<double> snippet_noise(Rng& rng, std::size_t n, const DatasetSpec& spec) {
  const auto& path = spec.snippets[std::uniform_int_distribution<std::size_t>(
      0, spec.snippets.size() - 1)(rng)];
  const auto src = load_snippet(path);
  const std::size_t start =
      std::uniform_int_distribution<std::size_t>(0, src.size() - 1)(rng);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = src[(start + i) % src.size()];
  normalize_rms(x);
  return x;
}

std::vector<double> draw_waveform(Rng& rng, std::size_t n, const DatasetSpec& spec) {
  switch (spec.waveform) {
    case WaveformFamily::kWhite: return white_noise(rng, n);
    case WaveformFamily::kBandLimited: return band_limited_noise(rng, n, spec);
    case WaveformFamily::kSnippets: return snippet_noise(rng, n, spec);
    case WaveformFamily::kMixed:
      return std::bernoulli_distribution(0.5)(rng) ? white_noise(rng, n)
                                                   : band_limited_noise(rng, n, spec);
  }
  return white_noise(rng, n);
}

}  // namespace

LabeledFrame generate_frame(const DatasetSpec& spec, std::uint64_t seed,
                            std::uint64_t index) {
  LabeledFrame frame;
  frame.index = index;
  frame.seed = derive_seed(seed, index);
  Rng rng(frame.seed);

  std::discrete_distribution<int> poly(spec.polyphony.begin(), spec.polyphony.end());
  const int num_sources = poly(rng);

  AcousticScene scene;
  scene.geometry = spec.geometry;
  scene.array_center = spec.array_center;
  scene.sample_rate = spec.sample_rate;
  scene.speed_of_sound = spec.speed_of_sound;
  if (spec.room.enabled)
    scene.room = Shoebox{spec.room.dims,
                         uniform(rng, spec.room.reflection_min, spec.room.reflection_max),
                         spec.room.max_order};

  constexpr int kMaxTries = 1000;
  constexpr double kWallMargin = 0.1;
  std::vector<Vec3> directions;
  for (int p = 0; p < num_sources; ++p) {
    Vec3 pos{}, dir{};
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
      dir = random_direction(rng, spec);
      const double d = uniform(rng, spec.distance_m.first, spec.distance_m.second);
      pos = {spec.array_center[0] + d * dir[0], spec.array_center[1] + d * dir[1],
             spec.array_center[2] + d * dir[2]};
      placed = true;
      for (const auto& other : directions)
        if (angle_deg(dir, other) < spec.min_separation_deg) placed = false;
      if (placed && scene.room) {
        for (int a = 0; a < 3; ++a)
          if (pos[a] < kWallMargin || pos[a] > scene.room->dims[a] - kWallMargin)
            placed = false;
      }
    }
    if (!placed)
      throw ConfigError("dataset: could not place sources (room too small or "
                        "min_separation_deg too large)");
    directions.push_back(dir);
    SourceEvent ev;
    ev.position = pos;
    ev.gain = std::pow(10.0, uniform(rng, spec.gain_db.first, spec.gain_db.second) / 20.0);
    scene.events.push_back(std::move(ev));
  }

  // The window must see every path of every event in steady state, so the
  // burst starts early enough for the latest reflection to have arrived.
  const std::size_t burst = static_cast<std::size_t>(
      std::llround(spec.burst_ms * 1e-3 * spec.sample_rate));
  for (auto& ev : scene.events) {
    double latest = 0.0;
    for (int m = 0; m < scene.geometry.size(); ++m) {
      const Vec3 mic = scene.mic_position(m);
      if (scene.room) {
        for (const auto& img : image_sources(*scene.room, ev.position, mic,
                                             scene.room->max_order))
          latest = std::max(latest, img.distance);
      } else {
        latest = std::max(latest, distance(ev.position, mic));
      }
    }
    const std::size_t needed =
        spec.window + static_cast<std::size_t>(std::ceil(latest * spec.sample_rate /
                                                          spec.speed_of_sound)) +
        2 * kDefaultDelayHalfWidth + 1;
    const std::size_t len = std::max(burst, needed);
    ev.waveform = draw_waveform(rng, len, spec);
    ev.onset = -static_cast<long>(len - spec.window);
  }

  frame.snr_db = std::numeric_limits<double>::infinity();
  if (spec.snr_db) frame.snr_db = uniform(rng, spec.snr_db->first, spec.snr_db->second);
  scene.noise_snr_db = frame.snr_db;

  const std::uint64_t noise_seed = rng();
  const RenderResult rendered = render_scene(scene, spec.window, noise_seed);
  frame.channels.resize(rendered.channels.size());
  for (std::size_t m = 0; m < rendered.channels.size(); ++m)
    frame.channels[m].assign(rendered.channels[m].begin(), rendered.channels[m].end());

  frame.labels = true_tdoas(scene);
  frame.num_sources = num_sources;
  for (const auto& ev : scene.events)
    frame.source_positions.push_back({ev.position[0] - spec.array_center[0],
                                      ev.position[1] - spec.array_center[1],
                                      ev.position[2] - spec.array_center[2]});
  return frame;
}

std::vector<LabeledFrame> sample_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  std::vector<LabeledFrame> frames(spec.frames);
  const long n = static_cast<long>(spec.frames);
  // Generation errors are rethrown after the parallel region.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    try {
      frames[i] = generate_frame(spec, seed, static_cast<std::uint64_t>(i));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return frames;
}

LabeledFrame select_events(const LabeledFrame& frame, int max_events,
                           std::uint64_t seed) {
  if (frame.num_sources <= max_events) return frame;
  std::vector<int> order(frame.num_sources);
  for (int p = 0; p < frame.num_sources; ++p) order[p] = p;
  Rng rng(derive_seed(seed, frame.index));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(max_events);
  std::sort(order.begin(), order.end());

  LabeledFrame out = frame;
  out.num_sources = max_events;
  out.source_positions.clear();
  for (int p : order) out.source_positions.push_back(frame.source_positions[p]);
  for (std::size_t pair = 0; pair < frame.labels.size(); ++pair) {
    out.labels[pair].clear();
    for (int p : order) out.labels[pair].push_back(frame.labels[pair][p]);
  }
  return out;
}

namespace {

std::string frame_stem(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06llu", static_cast<unsigned long long>(index));
  return buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec,
                   std::uint64_t seed, const std::vector<LabeledFrame>& frames) {
  std::filesystem::create_directories(dir);
  const std::string geometry_hash = spec.geometry.hash();
  for (const auto& f : frames) {
    const std::string stem = frame_stem(f.index);
    {
      std::ofstream out(dir / (stem + ".f32"), std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + (dir / stem).string());
      for (const auto& ch : f.channels) io::put_f32s(out, ch);
    }
    json side;
    side["index"] = f.index;
    side["seed"] = f.seed;
    side["P"] = f.num_sources;
    side["labels"] = f.labels;
    side["geometry_hash"] = geometry_hash;
    side["channels"] = f.channels.size();
    side["samples"] = f.channels.empty() ? 0 : f.channels.front().size();
    side["sources"] = f.source_positions;
    side["snr_db"] = std::isfinite(f.snr_db) ? json(f.snr_db) : json(nullptr);
    io::write_file(dir / (stem + ".json"), side.dump(1) + "\n");
  }
  json manifest;
  manifest["frames"] = frames.size();
  manifest["seed"] = seed;
  manifest["geometry_hash"] = geometry_hash;
  manifest["frontend_hash"] = frontend_hash(spec);
  manifest["tau_max"] = spec.tau_max();
  manifest["num_mics"] = spec.geometry.size();
  manifest["window"] = spec.window;
  manifest["sample_rate"] = spec.sample_rate;
  manifest["spec"] = dataset_spec_to_json(spec);
  io::write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  LoadedDataset ds;
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError("dataset directory has no manifest: " + dir.string());
  ds.manifest = json::parse(io::read_file(manifest_path));
  const std::size_t count = ds.manifest.at("frames").get<std::size_t>();
  ds.frames.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string stem = frame_stem(i);
    const json side = json::parse(io::read_file(dir / (stem + ".json")));
    auto& f = ds.frames[i];
    f.index = side.at("index").get<std::uint64_t>();
    f.seed = side.at("seed").get<std::uint64_t>();
    f.num_sources = side.at("P").get<int>();
    f.labels = side.at("labels").get<TdoaLabelSet>();
    f.source_positions = side.at("sources").get<std::vector<Vec3>>();
    f.snr_db = side.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                           : side.at("snr_db").get<double>();
    const auto channels = side.at("channels").get<std::size_t>();
    const auto samples = side.at("samples").get<std::size_t>();
    std::ifstream in(dir / (stem + ".f32"), std::ios::binary);
    if (!in) throw std::runtime_error("missing waveform for " + stem);
    f.channels.assign(channels, std::vector<float>(samples));
    for (auto& ch : f.channels)
      for (float& v : ch) v = io::get_f32(in);
  }
  return ds;
}

}  // namespace ngcc
