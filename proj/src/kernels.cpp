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

#include "ngcc/kernels.hpp"

#include <algorithm>
#include <vector>

#include "ngcc/common.hpp"

namespace ngcc {

void validate(const ConvShape& s) {
  require(s.in_channels > 0 && s.out_channels > 0 && s.length > 0,
          "conv1d: channel counts and length must be positive");
  require(s.taps > 0 && s.taps % 2 == 1, "conv1d: tap count must be odd");
  require(s.padding == Padding::kZero || s.taps <= s.length,
          "conv1d: circular padding needs taps <= length");
}

namespace {

void check_spans(const ConvShape& s, std::size_t in, std::size_t w,
                 std::size_t b, std::size_t out) {
  validate(s);
  require(in == static_cast<std::size_t>(s.input_size()), "conv1d: input shape mismatch");
  require(w == static_cast<std::size_t>(s.weight_size()), "conv1d: weight shape mismatch");
  require(b == 0 || b == static_cast<std::size_t>(s.out_channels), "conv1d: bias shape mismatch");
  require(out == static_cast<std::size_t>(s.output_size()), "conv1d: output shape mismatch");
}

// Input index for output position n and tap t, or -1 when it falls in zero
// padding.
inline int source_index(const ConvShape& s, int n, int t) {
  int m = n + t - s.taps / 2;
  if (s.padding == Padding::kCircular) {
    m %= s.length;
    if (m < 0) m += s.length;
    return m;
  }
  return (m < 0 || m >= s.length) ? -1 : m;
}

// [in_channels][length + taps - 1], padded[c][n + t] = in[c][n + t - taps/2].
template <typename T>
std::vector<T> pad_input(const ConvShape& s, std::span<const T> in) {
  const int width = s.length + s.taps - 1;
  std::vector<T> padded(static_cast<std::size_t>(s.in_channels) * width, T(0));
  for (int c = 0; c < s.in_channels; ++c)
    for (int m = 0; m < width; ++m) {
      const int src = source_index(s, m, 0);
      if (src >= 0) padded[c * width + m] = in[c * s.length + src];
    }
  return padded;
}

// Roughly where thread start-up stops dominating.
constexpr long kParallelWork = 1L << 15;

// Fixed-lane dot product: the summation order is independent of the
// vector width, so results stay reproducible while the compiler can
// vectorize without reassociating.
template <typename T>
T dot(const T* a, const T* b, int n) {
  constexpr int kLanes = 16;
  T lane[kLanes] = {};
  int i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int l = 0; l < kLanes; ++l) lane[l] += a[i + l] * b[i + l];
  T acc = 0;
  for (int l = 0; l < kLanes; ++l) acc += lane[l];
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

long work(const ConvShape& s) {
  return static_cast<long>(s.out_channels) * s.in_channels * s.taps * s.length;
}

}  // namespace

template <typename T>
void conv1d_forward(const ConvShape& s, std::span<const T> in,
                    std::span<const T> w, std::span<const T> bias,
                    std::span<T> out) {
  check_spans(s, in.size(), w.size(), bias.size(), out.size());
  const int width = s.length + s.taps - 1;
  const std::vector<T> padded = pad_input(s, in);
  const bool parallel = work(s) >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (int o = 0; o < s.out_channels; ++o) {
    T* y = out.data() + static_cast<std::size_t>(o) * s.length;
    const T b0 = bias.empty() ? T(0) : bias[o];
    std::fill(y, y + s.length, b0);
    for (int c = 0; c < s.in_channels; ++c) {
      const T* x = padded.data() + static_cast<std::size_t>(c) * width;
      const T* wk = w.data() + (static_cast<std::size_t>(o) * s.in_channels + c) * s.taps;
      for (int t = 0; t < s.taps; ++t) {
        const T wt = wk[t];
        const T* xt = x + t;
        for (int n = 0; n < s.length; ++n) y[n] += wt * xt[n];
      }
    }
  }
}

template <typename T>
void conv1d_backward(const ConvShape& s, std::span<const T> in,
                     std::span<const T> w, std::span<const T> gout,
                     std::span<T> gin, std::span<T> gw, std::span<T> gb) {
  check_spans(s, in.size(), w.size(), 0, gout.size());
  require(gin.empty() || gin.size() == in.size(), "conv1d: grad_input shape mismatch");
  require(gw.empty() || gw.size() == w.size(), "conv1d: grad_weights shape mismatch");
  require(gb.empty() || gb.size() == static_cast<std::size_t>(s.out_channels),
          "conv1d: grad_bias shape mismatch");
  const int width = s.length + s.taps - 1;
  const bool parallel = work(s) >= kParallelWork;

  if (!gw.empty() || !gb.empty()) {
    const std::vector<T> padded = pad_input(s, in);
#pragma omp parallel for schedule(static) if (parallel)
    for (int o = 0; o < s.out_channels; ++o) {
      const T* g = gout.data() + static_cast<std::size_t>(o) * s.length;
      if (!gb.empty()) {
        T acc = 0;
        for (int n = 0; n < s.length; ++n) acc += g[n];
        gb[o] += acc;
      }
      if (gw.empty()) continue;
      for (int c = 0; c < s.in_channels; ++c) {
        const T* x = padded.data() + static_cast<std::size_t>(c) * width;
        T* gk = gw.data() + (static_cast<std::size_t>(o) * s.in_channels + c) * s.taps;
        for (int t = 0; t < s.taps; ++t) gk[t] += dot(g, x + t, s.length);
      }
    }
  }

  if (!gin.empty()) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int c = 0; c < s.in_channels; ++c) {
      std::vector<T> gpad(width, T(0));
      for (int o = 0; o < s.out_channels; ++o) {
        const T* g = gout.data() + static_cast<std::size_t>(o) * s.length;
        const T* wk = w.data() + (static_cast<std::size_t>(o) * s.in_channels + c) * s.taps;
        for (int t = 0; t < s.taps; ++t) {
          const T wt = wk[t];
          T* dst = gpad.data() + t;
          for (int n = 0; n < s.length; ++n) dst[n] += wt * g[n];
        }
      }
      T* gi = gin.data() + static_cast<std::size_t>(c) * s.length;
      std::fill(gi, gi + s.length, T(0));
      for (int m = 0; m < width; ++m) {
        const int src = source_index(s, m, 0);
        if (src >= 0) gi[src] += gpad[m];
      }
    }
  }
}

template <typename T>
void conv1d_forward_serial(const ConvShape& s, std::span<const T> in,
                           std::span<const T> w, std::span<const T> bias,
                           std::span<T> out) {
  check_spans(s, in.size(), w.size(), bias.size(), out.size());
  for (int o = 0; o < s.out_channels; ++o)
    for (int n = 0; n < s.length; ++n) {
      T acc = bias.empty() ? T(0) : bias[o];
      for (int c = 0; c < s.in_channels; ++c)
        for (int t = 0; t < s.taps; ++t) {
          const int m = source_index(s, n, t);
          if (m >= 0)
            acc += w[(o * s.in_channels + c) * s.taps + t] * in[c * s.length + m];
        }
      out[o * s.length + n] = acc;
    }
}

template <typename T>
void conv1d_backward_serial(const ConvShape& s, std::span<const T> in,
                            std::span<const T> w, std::span<const T> gout,
                            std::span<T> gin, std::span<T> gw, std::span<T> gb) {
  check_spans(s, in.size(), w.size(), 0, gout.size());
  if (!gin.empty()) std::fill(gin.begin(), gin.end(), T(0));
  for (int o = 0; o < s.out_channels; ++o)
    for (int n = 0; n < s.length; ++n) {
      const T g = gout[o * s.length + n];
      if (!gb.empty()) gb[o] += g;
      for (int c = 0; c < s.in_channels; ++c)
        for (int t = 0; t < s.taps; ++t) {
          const int m = source_index(s, n, t);
          if (m < 0) continue;
          const int wi = (o * s.in_channels + c) * s.taps + t;
          if (!gw.empty()) gw[wi] += g * in[c * s.length + m];
          if (!gin.empty()) gin[c * s.length + m] += g * w[wi];
        }
    }
}

#define NGCC_INSTANTIATE(T)                                                   \
  template void conv1d_forward<T>(const ConvShape&, std::span<const T>,       \
                                  std::span<const T>, std::span<const T>,     \
                                  std::span<T>);                              \
  template void conv1d_backward<T>(const ConvShape&, std::span<const T>,      \
                                   std::span<const T>, std::span<const T>,    \
                                   std::span<T>, std::span<T>, std::span<T>); \
  template void conv1d_forward_serial<T>(                                     \
      const ConvShape&, std::span<const T>, std::span<const T>,               \
      std::span<const T>, std::span<T>);                                      \
  template void conv1d_backward_serial<T>(                                    \
      const ConvShape&, std::span<const T>, std::span<const T>,               \
      std::span<const T>, std::span<T>, std::span<T>, std::span<T>);

NGCC_INSTANTIATE(float)
NGCC_INSTANTIATE(double)
#undef NGCC_INSTANTIATE

}  // namespace ngcc
