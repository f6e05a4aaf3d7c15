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

#include "ngcc/signal.hpp"

#include <algorithm>
#include <cassert>
#include <complex>
#include <numbers>
#include <ostream>

#include "ngcc/common.hpp"
#include "ngcc/fft.hpp"

namespace ngcc {

int CorrelationVector::argmax() const {
  require(!values.empty(), "argmax of empty correlation");
  auto it = std::max_element(values.begin(), values.end());
  return static_cast<int>(it - values.begin()) - tau_max;
}

std::vector<FrameSet> frame_signal(const MultiChannel& signal,
                                   double sample_rate, std::size_t window_len,
                                   std::size_t hop) {
  require(window_len > 0, "frame_signal: window_len must be positive");
  require(hop > 0, "frame_signal: hop must be positive");
  std::vector<FrameSet> frames;
  if (signal.empty()) return frames;
  const std::size_t length = signal.front().size();
  for (const auto& ch : signal)
    require(ch.size() == length, "frame_signal: ragged channels");
  if (length < window_len) return frames;

  const std::size_t count = (length - window_len) / hop + 1;
  frames.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    FrameSet fs;
    fs.reserve(signal.size());
    for (const auto& ch : signal) {
      auto first = ch.begin() + static_cast<std::ptrdiff_t>(t * hop);
      fs.push_back(Frame{std::vector<double>(first, first + window_len),
                         sample_rate});
    }
    frames.push_back(std::move(fs));
  }
  return frames;
}

namespace {

void check_gcc_args(std::span<const double> x_i, std::span<const double> x_j,
                    int tau_max, double epsilon) {
  require(x_i.size() == x_j.size(), "gcc_phat: frames differ in length");
  require(!x_i.empty(), "gcc_phat: empty frame");
  require(tau_max >= 0 && 2 * static_cast<std::size_t>(tau_max) < x_i.size(),
          "gcc_phat: tau_max must satisfy 0 <= tau_max < N/2");
  require(epsilon >= 0.0, "gcc_phat: epsilon must be non-negative");
}

// X_i X_j^* / (|X_i X_j^*| + eps); zero where the denominator vanishes.
std::complex<double> phat(std::complex<double> s, double epsilon) {
  const double denom = std::abs(s) + epsilon;
  return denom > 0.0 ? s / denom : std::complex<double>{};
}

}  // namespace

CorrelationVector gcc_phat(std::span<const double> x_i,
                           std::span<const double> x_j, int tau_max,
                           double epsilon) {
  check_gcc_args(x_i, x_j, tau_max, epsilon);
  const std::size_t n = x_i.size();
  Dft<double> dft(n);
  std::vector<std::complex<double>> xi(n), xj(n), g(n), r(n);
  dft.forward_real(x_i, xi);
  dft.forward_real(x_j, xj);

  double energy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = xi[k] * std::conj(xj[k]);
    energy += std::abs(s);
    g[k] = phat(s, epsilon);
  }
  dft.inverse(g, r);

  CorrelationVector out;
  out.tau_max = tau_max;
  out.degenerate = energy == 0.0;
  out.values.resize(2 * tau_max + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int tau = -tau_max; tau <= tau_max; ++tau) {
    const std::size_t idx = tau >= 0 ? static_cast<std::size_t>(tau)
                                     : n - static_cast<std::size_t>(-tau);
    assert(std::abs(r[idx].imag()) * inv_n <= 1e-9);
    out.values[tau + tau_max] = r[idx].real() * inv_n;
  }
  return out;
}

CorrelationVector gcc_phat_direct(std::span<const double> x_i,
                                  std::span<const double> x_j, int tau_max,
                                  double epsilon) {
  check_gcc_args(x_i, x_j, tau_max, epsilon);
  const std::size_t n = x_i.size();
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);

  // Plain DFT sums, no FFT.
  std::vector<std::complex<double>> xi(n), xj(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> a, b;
    for (std::size_t m = 0; m < n; ++m) {
      const double ang = -w * static_cast<double>((k * m) % n);
      const std::complex<double> e{std::cos(ang), std::sin(ang)};
      a += x_i[m] * e;
      b += x_j[m] * e;
    }
    xi[k] = a;
    xj[k] = b;
  }

  CorrelationVector out;
  out.tau_max = tau_max;
  out.values.assign(2 * tau_max + 1, 0.0);
  double energy = 0.0;
  std::vector<std::complex<double>> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = xi[k] * std::conj(xj[k]);
    energy += std::abs(s);
    g[k] = phat(s, epsilon);
  }
  out.degenerate = energy == 0.0;
  for (int tau = -tau_max; tau <= tau_max; ++tau) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const long long phase_idx =
          (static_cast<long long>(k) * tau) % static_cast<long long>(n);
      const double ang = w * static_cast<double>(phase_idx);
      acc += (g[k] * std::complex<double>{std::cos(ang), std::sin(ang)}).real();
    }
    out.values[tau + tau_max] = acc / static_cast<double>(n);
  }
  return out;
}

std::vector<CorrelationVector> gcc_phat_all_pairs_serial(const FrameSet& frame,
                                                         int tau_max,
                                                         double epsilon) {
  const auto pairs = mic_pairs(static_cast<int>(frame.size()));
  std::vector<CorrelationVector> out;
  out.reserve(pairs.size());
  for (auto [i, j] : pairs)
    out.push_back(gcc_phat(frame[i], frame[j], tau_max, epsilon));
  return out;
}

std::vector<CorrelationVector> gcc_phat_all_pairs(const FrameSet& frame,
                                                  int tau_max,
                                                  double epsilon) {
  const auto pairs = mic_pairs(static_cast<int>(frame.size()));
  std::vector<CorrelationVector> out(pairs.size());
  const int count = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(static)
  for (int p = 0; p < count; ++p)
    out[p] = gcc_phat(frame[pairs[p].first], frame[pairs[p].second], tau_max,
                      epsilon);
  return out;
}

std::vector<Peak> top_k_peaks(const CorrelationVector& corr, int k) {
  require(k >= 0, "top_k_peaks: k must be non-negative");
  const auto& v = corr.values;
  const int n = static_cast<int>(v.size());
  std::vector<Peak> peaks;
  for (int idx = 0; idx < n; ++idx) {
    const bool left_ok = idx == 0 || v[idx] >= v[idx - 1];
    const bool right_ok = idx == n - 1 || v[idx] >= v[idx + 1];
    if (left_ok && right_ok) peaks.push_back({idx - corr.tau_max, v[idx]});
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (std::abs(a.lag) != std::abs(b.lag)) return std::abs(a.lag) < std::abs(b.lag);
    return a.lag < b.lag;
  });
  if (static_cast<int>(peaks.size()) > k) peaks.resize(k);
  return peaks;
}

void write_correlation_csv(std::ostream& os, int pair_i, int pair_j,
                           const CorrelationVector& corr) {
  for (int tau = -corr.tau_max; tau <= corr.tau_max; ++tau)
    os << pair_i << ',' << pair_j << ',' << tau << ',' << corr.at(tau) << '\n';
}

}  // namespace ngcc
