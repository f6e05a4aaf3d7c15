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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ngcc/kernels.hpp"

namespace ngcc {

/// Dense row-major array with an optional gradient buffer of the same shape.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, bool with_grad = false);

  std::size_t size() const { return values.size(); }
  void zero_grad();
  /// Throws NumericError naming `what` on NaN/Inf.
  void check_finite(const std::string& what) const;
};

/// A named trainable tensor. Names are stable and used in checkpoints.
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* tensor = nullptr;
};

// ---------------------------------------------------------------------------
// Pointwise

inline constexpr double kLeakySlope = 0.2;

template <typename T>
void leaky_relu_forward(std::span<const T> x, std::span<T> y,
                        T slope = T(kLeakySlope));

/// grad_x = grad_y * (x > 0 ? 1 : slope), in place on grad.
template <typename T>
void leaky_relu_backward(std::span<const T> x, std::span<T> grad,
                         T slope = T(kLeakySlope));

// ---------------------------------------------------------------------------
// Sinc band-pass layer
//
// Filter l is the Hamming-windowed difference of two ideal low-passes with
// cutoffs f1 < f2 (fractions of the sample rate):
//   g[n] = (2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n)) * hamming[n]
// with f1 = |low_raw|, f2 = min(f1 + |band_raw|, 1/2).

template <typename T>
struct SincLayerParams {
  Tensor<T> low;   // [L]
  Tensor<T> band;  // [L]
  int filter_length = 101;

  int filters() const { return static_cast<int>(low.size()); }
  /// Cutoffs spaced on the mel scale from min_hz to Nyquist.
  static SincLayerParams mel_init(int filters, int filter_length,
                                  double sample_rate, double min_hz = 30.0);
  /// Normalized (f1, f2) for filter l.
  std::pair<T, T> cutoffs(int l) const;
};

/// Kernels laid out [L][1][taps] for conv1d.
template <typename T>
std::vector<T> sinc_kernels(const SincLayerParams<T>& params);

/// Chains d(loss)/d(kernel) into d(loss)/d(low_raw) and d(loss)/d(band_raw),
/// accumulating into grad_low / grad_band.
template <typename T>
void sinc_kernels_backward(const SincLayerParams<T>& params,
                           std::span<const T> grad_kernels,
                           std::span<T> grad_low, std::span<T> grad_band);

/// Same, accumulating into params.low.grad and params.band.grad.
template <typename T>
void sinc_kernels_backward(SincLayerParams<T>& params,
                           std::span<const T> grad_kernels);

/// input [1, N] -> output [L, N].
template <typename T>
void sinc_forward(std::span<const T> input, const SincLayerParams<T>& params,
                  Padding padding, std::span<T> output);

// ---------------------------------------------------------------------------
// Softmax cross-entropy over the lag axis

struct XentResult {
  double loss = 0.0;          // -(1/K) sum_k log p_k(target_k)
  std::vector<double> grad;   // [K, lags], (p - onehot) / K
};

/// logits [K, 2*tau_max+1]; targets are lags in [-tau_max, tau_max].
XentResult softmax_xent(std::span<const double> logits, int tau_max,
                        std::span<const int> target_lags);

/// Row-wise log-softmax of [rows, cols], numerically stable.
template <typename T>
void log_softmax_rows(std::span<const T> logits, int rows, int cols,
                      std::span<T> out);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam step at step index t >= 1 on a flat parameter
/// block, updating the moment buffers in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, std::span<T> m,
               std::span<T> v, const AdamConfig& cfg, long t);

/// Adam over a list of parameters, using their grad buffers.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<NamedParam<T>> params, AdamConfig cfg);

  void step();
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<NamedParam<T>> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckLayer {
  std::string name;
  int checked = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  int refined = 0;  // entries whose step had to shrink
};

struct GradCheckReport {
  std::vector<GradCheckLayer> layers;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string failing_layer;  // worst offender when !passed
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-6;
  /// The step is divided by 10 up to this many times, when a perturbation
  /// changes the region fingerprint (activation pattern, chosen assignment)
  /// or when successive estimates disagree by more than `agreement`.
  int refinements = 2;
  double agreement = 1e-5;
  int samples_per_layer = 50;
  std::uint64_t seed = 0;
  /// Denominator floor for relative errors of near-zero gradients.
  double abs_floor = 1e-7;
};

/// Central-difference check. `loss` evaluates the scalar loss at the current
/// parameter values; `backward` recomputes analytic gradients into the grad
/// buffers (after zeroing them). Parameters are restored on exit.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           const std::vector<NamedParam<double>>& params,
                           const GradCheckOptions& options);

/// Same, for piecewise-smooth losses. `loss` also writes a fingerprint of the
/// smooth piece it evaluated on; a central difference whose endpoints land
/// on a different piece than the unperturbed point is retried with a
/// smaller step.
GradCheckReport grad_check(const std::function<double(std::uint64_t*)>& loss,
                           const std::function<void()>& backward,
                           const std::vector<NamedParam<double>>& params,
                           const GradCheckOptions& options);

}  // namespace ngcc
