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

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace ngcc {

/// PHAT guard added to |X_i X_j*| before normalization.
inline constexpr double kPhatEpsilon = 1e-12;

/// One channel of one analysis window.
struct Frame {
  std::vector<double> samples;
  double sample_rate = 0.0;

  std::size_t size() const { return samples.size(); }
};

/// One Frame per microphone, all of the same length.
using FrameSet = std::vector<Frame>;

/// Planar multichannel audio: [channel][sample].
using MultiChannel = std::vector<std::vector<double>>;

/// GCC values for lags -tau_max..tau_max.
struct CorrelationVector {
  int tau_max = 0;
  std::vector<double> values;  // values[tau + tau_max]
  bool degenerate = false;     // zero cross-spectrum energy

  double at(int lag) const { return values.at(lag + tau_max); }
  int argmax() const;
};

/// Splits every channel into windows starting at t*hop. A trailing partial
/// window is dropped; input shorter than one window yields no frames.
/// Result is indexed [frame][channel].
std::vector<FrameSet> frame_signal(const MultiChannel& signal,
                                   double sample_rate, std::size_t window_len,
                                   std::size_t hop);

/// GCC-PHAT over the full N-point DFT, evaluated with an inverse FFT.
/// A positive peak lag means x_i lags behind x_j.
CorrelationVector gcc_phat(std::span<const double> x_i,
                           std::span<const double> x_j, int tau_max,
                           double epsilon = kPhatEpsilon);

inline CorrelationVector gcc_phat(const Frame& x_i, const Frame& x_j,
                                  int tau_max, double epsilon = kPhatEpsilon) {
  return gcc_phat(x_i.samples, x_j.samples, tau_max, epsilon);
}

/// Term-by-term O(N^2) evaluation of the same sum. Test oracle.
CorrelationVector gcc_phat_direct(std::span<const double> x_i,
                                  std::span<const double> x_j, int tau_max,
                                  double epsilon = kPhatEpsilon);

/// GCC-PHAT for every microphone pair of a frame, pairs in mic_pairs order.
/// The OpenMP version splits pairs across threads.
std::vector<CorrelationVector> gcc_phat_all_pairs(const FrameSet& frame,
                                                  int tau_max,
                                                  double epsilon = kPhatEpsilon);
std::vector<CorrelationVector> gcc_phat_all_pairs_serial(
    const FrameSet& frame, int tau_max, double epsilon = kPhatEpsilon);

struct Peak {
  int lag = 0;
  double value = 0.0;
};

/// Up to k local maxima (value >= both neighbours; endpoints compare their
/// single neighbour), by descending value, ties to smaller |lag| then lag.
std::vector<Peak> top_k_peaks(const CorrelationVector& corr, int k);

/// Writes `pair_i,pair_j,lag,value` rows (no header).
void write_correlation_csv(std::ostream& os, int pair_i, int pair_j,
                           const CorrelationVector& corr);

}  // namespace ngcc
