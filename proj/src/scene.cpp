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

#include "ngcc/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <random>

namespace ngcc {

ArrayGeometry::ArrayGeometry(std::vector<Vec3> mics) : mics_(std::move(mics)) {
  require(mics_.size() >= 2, "ArrayGeometry: need at least two microphones");
  for (std::size_t i = 0; i < mics_.size(); ++i)
    for (std::size_t j = i + 1; j < mics_.size(); ++j)
      require(distance(mics_[i], mics_[j]) > 0.0,
              "ArrayGeometry: microphone positions must be distinct");
}

double ArrayGeometry::aperture() const {
  double best = 0.0;
  for (std::size_t i = 0; i < mics_.size(); ++i)
    for (std::size_t j = i + 1; j < mics_.size(); ++j)
      best = std::max(best, distance(mics_[i], mics_[j]));
  return best;
}

std::string ArrayGeometry::hash() const {
  std::string text;
  char buf[96];
  for (const auto& m : mics_) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g;", m[0], m[1], m[2]);
    text += buf;
  }
  return hex64(fnv1a(text));
}

ArrayGeometry tetrahedral_array(double diameter) {
  require(diameter > 0.0, "tetrahedral_array: diameter must be positive");
  const double s = 0.5 * diameter / std::sqrt(3.0);
  return ArrayGeometry({{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}});
}

namespace {

long round_half_away(double x) {
  return static_cast<long>(x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

}  // namespace

int max_tdoa(const ArrayGeometry& geometry, double fs, double c) {
  require(fs > 0.0 && c > 0.0, "max_tdoa: fs and c must be positive");
  // Diameter of the centroid-centred sphere through the outermost mic. It
  // bounds every pairwise distance and, for arrays laid out on a sphere,
  // is the quoted array diameter.
  Vec3 centroid{};
  for (const auto& m : geometry.mics())
    for (int a = 0; a < 3; ++a) centroid[a] += m[a] / geometry.size();
  double radius = 0.0;
  for (const auto& m : geometry.mics())
    radius = std::max(radius, distance(m, centroid));
  const long by_sphere = round_half_away(2.0 * radius * fs / c);
  const long by_pairs = round_half_away(geometry.aperture() * fs / c);
  return static_cast<int>(std::max(by_sphere, by_pairs));
}

bool Shoebox::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a)
    if (!(p[a] > 0.0 && p[a] < dims[a])) return false;
  return true;
}

Vec3 AcousticScene::mic_position(int m) const {
  const Vec3& r = geometry.mics().at(m);
  return {r[0] + array_center[0], r[1] + array_center[1],
          r[2] + array_center[2]};
}

int tdoa_lag(const Vec3& source, const Vec3& mic_i, const Vec3& mic_j,
             double fs, double c) {
  const double diff = distance(source, mic_i) - distance(source, mic_j);
  return static_cast<int>(round_half_away(fs / c * diff));
}

TdoaLabelSet true_tdoas(const AcousticScene& scene) {
  const auto pairs = mic_pairs(scene.geometry.size());
  TdoaLabelSet labels(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Vec3 ri = scene.mic_position(pairs[p].first);
    const Vec3 rj = scene.mic_position(pairs[p].second);
    for (const auto& ev : scene.events)
      labels[p].push_back(tdoa_lag(ev.position, ri, rj, scene.sample_rate,
                                   scene.speed_of_sound));
  }
  return labels;
}

namespace {

// Blackman-windowed sinc evaluated at t, support |t| <= half_width.
double delay_kernel(double t, int half_width) {
  const double w = static_cast<double>(half_width);
  if (std::abs(t) >= w) return 0.0;
  const double pi = std::numbers::pi;
  const double window =
      0.42 + 0.5 * std::cos(pi * t / w) + 0.08 * std::cos(2.0 * pi * t / w);
  const double sinc = t == 0.0 ? 1.0 : std::sin(pi * t) / (pi * t);
  return sinc * window;
}

}  // namespace

void add_delayed(std::span<double> out, std::span<const double> waveform,
                 double delay, double gain, int half_width) {
  require(half_width >= 1, "add_delayed: half_width must be positive");
  const double whole = std::floor(delay);
  const double frac = delay - whole;
  const long shift = static_cast<long>(whole);
  const long out_len = static_cast<long>(out.size());
  const long in_len = static_cast<long>(waveform.size());

  auto accumulate = [&](long offset, double coeff) {
    // out[m + offset] += coeff * waveform[m]
    const long m_lo = std::max(0L, -offset);
    const long m_hi = std::min(in_len, out_len - offset);
    for (long m = m_lo; m < m_hi; ++m) out[m + offset] += coeff * waveform[m];
  };

  if (frac == 0.0) {
    accumulate(shift, gain);
    return;
  }
  for (int k = -half_width + 1; k <= half_width; ++k) {
    const double c = delay_kernel(static_cast<double>(k) - frac, half_width);
    if (c != 0.0) accumulate(shift + k, gain * c);
  }
}

std::vector<double> fractional_delay(std::span<const double> signal,
                                     double delay, int half_width) {
  require(half_width >= 16, "fractional_delay: half_width must be >= 16");
  std::vector<double> out(signal.size(), 0.0);
  add_delayed(out, signal, delay, 1.0, half_width);
  return out;
}

int image_count_of_order(int q) {
  require(q >= 0, "image_count_of_order: negative order");
  return q == 0 ? 1 : 4 * q * q + 2;
}

std::vector<ImageSource> image_sources(const Shoebox& room, const Vec3& source,
                                       const Vec3& mic, int max_order) {
  require(max_order >= 0 && max_order <= 4,
          "image_sources: max_order must be in [0, 4]");
  require(room.contains(source) && room.contains(mic),
          "image_sources: source and mic must lie strictly inside the room");
  auto axis = [&](int a, int j) {
    const double x = source[a], len = room.dims[a];
    return (j % 2 == 0) ? x + j * len : (j + 1) * len - x;
  };
  std::vector<ImageSource> images;
  for (int q = 0; q <= max_order; ++q) {
    for (int jx = -q; jx <= q; ++jx) {
      for (int jy = -(q - std::abs(jx)); jy <= q - std::abs(jx); ++jy) {
        const int rest = q - std::abs(jx) - std::abs(jy);
        for (int side = 0; side < (rest == 0 ? 1 : 2); ++side) {
          const int jz = side == 0 ? -rest : rest;
          ImageSource img;
          img.position = {axis(0, jx), axis(1, jy), axis(2, jz)};
          img.reflections = q;
          img.distance = distance(img.position, mic);
          img.amplitude = std::pow(room.reflection, q) /
                          std::max(img.distance, kMinAttenuationDistance);
          images.push_back(img);
        }
      }
    }
  }
  return images;
}

std::vector<double> image_source_rir(const Shoebox& room, const Vec3& source,
                                     const Vec3& mic, int max_order, double fs,
                                     double c, int half_width) {
  const auto images = image_sources(room, source, mic, max_order);
  double latest = 0.0;
  for (const auto& img : images) latest = std::max(latest, img.distance);
  const auto length =
      static_cast<std::size_t>(std::ceil(latest * fs / c)) + half_width + 1;
  std::vector<double> rir(length, 0.0);
  const double unit[1] = {1.0};
  for (const auto& img : images) {
    if (img.amplitude == 0.0) continue;
    add_delayed(rir, unit, img.distance * fs / c, img.amplitude, half_width);
  }
  return rir;
}

RenderResult render_scene(const AcousticScene& scene, std::size_t length,
                          std::uint64_t seed) {
  require(length > 0, "render_scene: length must be positive");
  const int num_mics = scene.geometry.size();
  const double fs = scene.sample_rate, c = scene.speed_of_sound;
  RenderResult result;
  result.channels.assign(num_mics, std::vector<double>(length, 0.0));

  for (const auto& ev : scene.events) {
    require(ev.gain > 0.0, "render_scene: event gain must be positive");
    if (ev.onset >= static_cast<long>(length)) {
      ++result.skipped_events;
      continue;
    }
    for (int m = 0; m < num_mics; ++m) {
      const Vec3 mic = scene.mic_position(m);
      auto& out = result.channels[m];
      if (scene.room) {
        for (const auto& img : image_sources(*scene.room, ev.position, mic,
                                             scene.room->max_order)) {
          if (img.amplitude == 0.0) continue;
          add_delayed(out, ev.waveform,
                      static_cast<double>(ev.onset) + img.distance * fs / c,
                      ev.gain * img.amplitude);
        }
      } else {
        const double d = distance(ev.position, mic);
        add_delayed(out, ev.waveform,
                    static_cast<double>(ev.onset) + d * fs / c,
                    ev.gain / std::max(d, kMinAttenuationDistance));
      }
    }
  }

  if (std::isfinite(scene.noise_snr_db)) {
    double energy = 0.0;
    for (const auto& ch : result.channels)
      for (double v : ch) energy += v * v;
    double ref = std::sqrt(energy / static_cast<double>(num_mics * length));
    if (ref == 0.0) ref = 1.0;
    const double noise_rms = ref * std::pow(10.0, -scene.noise_snr_db / 20.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_rms);
    for (auto& ch : result.channels)
      for (double& v : ch) v += normal(rng);
  }
  return result;
}

}  // namespace ngcc
