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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngcc/common.hpp"
#include "ngcc/signal.hpp"

namespace ngcc {

inline constexpr double kSpeedOfSound = 343.0;     // m/s
inline constexpr double kMinAttenuationDistance = 0.1;  // m
inline constexpr int kDefaultDelayHalfWidth = 16;  // taps either side

/// Microphone positions in metres. At least two, all distinct.
class ArrayGeometry {
 public:
  ArrayGeometry() = default;
  explicit ArrayGeometry(std::vector<Vec3> mics);

  const std::vector<Vec3>& mics() const { return mics_; }
  int size() const { return static_cast<int>(mics_.size()); }
  int num_pairs() const { return size() * (size() - 1) / 2; }
  double aperture() const;  // largest pairwise distance
  /// Stable hex digest of the positions (used to tie artifacts together).
  std::string hash() const;

 private:
  std::vector<Vec3> mics_;
};

/// Regular tetrahedron inscribed in a sphere of the given diameter, centred
/// at the origin.
ArrayGeometry tetrahedral_array(double diameter);

/// Largest lag magnitude in samples: round(D * fs / c), where D is the larger
/// of the aperture and the diameter of the centroid-centred enclosing sphere.
int max_tdoa(const ArrayGeometry& geometry, double fs, double c = kSpeedOfSound);

/// Frequency-independent shoebox room with one corner at the origin.
struct Shoebox {
  Vec3 dims{};
  double reflection = 0.0;  // beta in [0, 1)
  int max_order = 2;

  bool contains(const Vec3& p) const;
};

struct SourceEvent {
  Vec3 position{};
  std::vector<double> waveform;
  long onset = 0;  // output sample where waveform[0] is emitted; may be < 0
  double gain = 1.0;
};

struct AcousticScene {
  ArrayGeometry geometry;
  /// Mic positions are geometry positions shifted by this offset.
  Vec3 array_center{};
  std::vector<SourceEvent> events;
  double noise_snr_db = std::numeric_limits<double>::infinity();
  std::optional<Shoebox> room;
  double sample_rate = 24000.0;
  double speed_of_sound = kSpeedOfSound;

  Vec3 mic_position(int m) const;
};

/// Per microphone pair (mic_pairs order), one integer lag per event.
using TdoaLabelSet = std::vector<std::vector<int>>;

/// round-half-away-from-zero of (fs / c) * (|s - r_i| - |s - r_j|).
int tdoa_lag(const Vec3& source, const Vec3& mic_i, const Vec3& mic_j,
             double fs, double c);

TdoaLabelSet true_tdoas(const AcousticScene& scene);

/// Windowed-sinc fractional delay. Output has the input's length and
/// out[n] = in[n - delay] (band-limited). Integer delays are exact shifts.
std::vector<double> fractional_delay(std::span<const double> signal,
                                     double delay,
                                     int half_width = kDefaultDelayHalfWidth);

/// Adds gain * waveform delayed by `delay` samples into out, so that
/// waveform[m] lands near out[m + delay].
void add_delayed(std::span<double> out, std::span<const double> waveform,
                 double delay, double gain,
                 int half_width = kDefaultDelayHalfWidth);

struct ImageSource {
  Vec3 position{};
  int reflections = 0;
  double distance = 0.0;
  double amplitude = 0.0;  // beta^reflections / max(distance, 0.1)
};

/// All mirror images with total reflection order <= max_order, ordered by
/// (order, then lexicographic image index).
std::vector<ImageSource> image_sources(const Shoebox& room, const Vec3& source,
                                       const Vec3& mic, int max_order);

/// Number of images of order exactly q in a 3-D shoebox.
int image_count_of_order(int q);

/// Image-source room impulse response, long enough for the latest tap.
std::vector<double> image_source_rir(const Shoebox& room, const Vec3& source,
                                     const Vec3& mic, int max_order, double fs,
                                     double c = kSpeedOfSound,
                                     int half_width = kDefaultDelayHalfWidth);

struct RenderResult {
  MultiChannel channels;  // [mic][sample]
  int skipped_events = 0;
};

/// Renders every microphone signal: spherical spreading plus propagation
/// delay per event (or an image-source response when a room is present),
/// plus white noise at the scene SNR. Deterministic in `seed`.
RenderResult render_scene(const AcousticScene& scene, std::size_t length,
                          std::uint64_t seed);

}  // namespace ngcc
