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

#include "ngcc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ngcc/common.hpp"

namespace ngcc {

template <typename T>
Tensor<T>::Tensor(std::vector<int> dims, bool with_grad) : shape(std::move(dims)) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d >= 0, "Tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  values.assign(n, T(0));
  if (with_grad) grad.assign(n, T(0));
}

template <typename T>
void Tensor<T>::zero_grad() {
  grad.assign(values.size(), T(0));
}

template <typename T>
void Tensor<T>::check_finite(const std::string& what) const {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw NumericError(what + ": non-finite value at index " + std::to_string(i));
}

template <typename T>
void leaky_relu_forward(std::span<const T> x, std::span<T> y, T slope) {
  require(x.size() == y.size(), "leaky_relu: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(std::span<const T> x, std::span<T> grad, T slope) {
  require(x.size() == grad.size(), "leaky_relu: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > T(0))) grad[i] *= slope;
}

// ---------------------------------------------------------------------------

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

template <typename T>
T hamming(int i, int taps) {
  if (taps == 1) return T(1);
  return T(0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (taps - 1)));
}

// Stays clear of the Nyquist clamp at initialization.
constexpr double kTopMarginHz = 1.0;

}  // namespace

template <typename T>
SincLayerParams<T> SincLayerParams<T>::mel_init(int filters, int filter_length,
                                                double sample_rate, double min_hz) {
  require(filters > 0, "sinc: need at least one filter");
  require(filter_length > 0 && filter_length % 2 == 1, "sinc: filter length must be odd");
  SincLayerParams p;
  p.filter_length = filter_length;
  p.low = Tensor<T>({filters}, true);
  p.band = Tensor<T>({filters}, true);
  const double top = sample_rate / 2.0 - kTopMarginHz;
  const double m0 = hz_to_mel(min_hz), m1 = hz_to_mel(top);
  for (int l = 0; l < filters; ++l) {
    const double f1 = mel_to_hz(m0 + (m1 - m0) * l / filters);
    const double f2 = mel_to_hz(m0 + (m1 - m0) * (l + 1) / filters);
    p.low.values[l] = T(f1 / sample_rate);
    p.band.values[l] = T((f2 - f1) / sample_rate);
  }
  return p;
}

template <typename T>
std::pair<T, T> SincLayerParams<T>::cutoffs(int l) const {
  const T f1 = std::min(std::abs(low.values[l]), T(0.5));
  const T f2 = std::min(f1 + std::abs(band.values[l]), T(0.5));
  return {f1, f2};
}

template <typename T>
std::vector<T> sinc_kernels(const SincLayerParams<T>& p) {
  const int taps = p.filter_length, half = taps / 2;
  std::vector<T> k(static_cast<std::size_t>(p.filters()) * taps);
  const T two_pi = T(2.0 * std::numbers::pi);
  for (int l = 0; l < p.filters(); ++l) {
    const auto [f1, f2] = p.cutoffs(l);
    for (int i = 0; i < taps; ++i) {
      const int n = i - half;
      T g;
      if (n == 0) {
        g = T(2) * (f2 - f1);
      } else {
        const T pn = T(std::numbers::pi) * T(n);
        g = (std::sin(two_pi * f2 * T(n)) - std::sin(two_pi * f1 * T(n))) / pn;
      }
      k[static_cast<std::size_t>(l) * taps + i] = g * hamming<T>(i, taps);
    }
  }
  return k;
}

template <typename T>
void sinc_kernels_backward(SincLayerParams<T>& p, std::span<const T> gk) {
  if (p.low.grad.size() != p.low.size()) p.low.zero_grad();
  if (p.band.grad.size() != p.band.size()) p.band.zero_grad();
  sinc_kernels_backward<T>(static_cast<const SincLayerParams<T>&>(p), gk,
                           p.low.grad, p.band.grad);
}

template <typename T>
void sinc_kernels_backward(const SincLayerParams<T>& p, std::span<const T> gk,
                           std::span<T> grad_low, std::span<T> grad_band) {
  const int taps = p.filter_length, half = taps / 2;
  require(gk.size() == static_cast<std::size_t>(p.filters()) * taps,
          "sinc backward: kernel gradient shape mismatch");
  require(grad_low.size() == p.low.size() && grad_band.size() == p.band.size(),
          "sinc backward: parameter gradient shape mismatch");
  const T two_pi = T(2.0 * std::numbers::pi);
  for (int l = 0; l < p.filters(); ++l) {
    const auto [f1, f2] = p.cutoffs(l);
    T d_f1 = 0, d_f2 = 0;
    for (int i = 0; i < taps; ++i) {
      const T n = T(i - half);
      const T w = hamming<T>(i, taps) * gk[static_cast<std::size_t>(l) * taps + i];
      d_f2 += T(2) * std::cos(two_pi * f2 * n) * w;
      d_f1 -= T(2) * std::cos(two_pi * f1 * n) * w;
    }
    const T low = p.low.values[l], band = p.band.values[l];
    const T sign_low = low > T(0) ? T(1) : (low < T(0) ? T(-1) : T(0));
    const T sign_band = band > T(0) ? T(1) : (band < T(0) ? T(-1) : T(0));
    const bool f1_free = std::abs(low) < T(0.5);
    const bool f2_free = std::abs(low) + std::abs(band) < T(0.5);
    T d_low = 0, d_band = 0;
    if (f1_free) d_low += d_f1 * sign_low;
    if (f2_free) {
      if (f1_free) d_low += d_f2 * sign_low;
      d_band += d_f2 * sign_band;
    }
    grad_low[l] += d_low;
    grad_band[l] += d_band;
  }
}

template <typename T>
void sinc_forward(std::span<const T> input, const SincLayerParams<T>& p,
                  Padding padding, std::span<T> output) {
  const ConvShape shape{1, p.filters(), p.filter_length,
                        static_cast<int>(input.size()), padding};
  const std::vector<T> kernels = sinc_kernels(p);
  conv1d_forward<T>(shape, input, kernels, {}, output);
}

// ---------------------------------------------------------------------------

template <typename T>
void log_softmax_rows(std::span<const T> logits, int rows, int cols, std::span<T> out) {
  require(logits.size() == static_cast<std::size_t>(rows) * cols && out.size() == logits.size(),
          "log_softmax: shape mismatch");
  for (int r = 0; r < rows; ++r) {
    const T* x = logits.data() + static_cast<std::size_t>(r) * cols;
    T* y = out.data() + static_cast<std::size_t>(r) * cols;
    const T mx = *std::max_element(x, x + cols);
    T sum = 0;
    for (int c = 0; c < cols; ++c) sum += std::exp(x[c] - mx);
    const T log_sum = std::log(sum);
    for (int c = 0; c < cols; ++c) y[c] = (x[c] - mx) - log_sum;
  }
}

XentResult softmax_xent(std::span<const double> logits, int tau_max,
                        std::span<const int> targets) {
  const int cols = 2 * tau_max + 1;
  const int rows = static_cast<int>(targets.size());
  require(rows > 0 && logits.size() == static_cast<std::size_t>(rows) * cols,
          "softmax_xent: logits must be [K, 2*tau_max+1]");
  std::vector<double> logp(logits.size());
  log_softmax_rows<double>(logits, rows, cols, logp);
  XentResult r;
  r.grad.resize(logits.size());
  for (int k = 0; k < rows; ++k) {
    require(std::abs(targets[k]) <= tau_max, "softmax_xent: target lag out of range");
    const int target = targets[k] + tau_max;
    r.loss -= logp[k * cols + target] / rows;
    for (int c = 0; c < cols; ++c)
      r.grad[k * cols + c] = (std::exp(logp[k * cols + c]) - (c == target ? 1.0 : 0.0)) / rows;
  }
  return r;
}

// ---------------------------------------------------------------------------

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, std::span<T> m,
               std::span<T> v, const AdamConfig& cfg, long t) {
  require(t >= 1, "adam_step: step index must be >= 1");
  require(grads.size() == params.size() && m.size() == params.size() &&
              v.size() == params.size(),
          "adam_step: size mismatch");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const double m_hat = static_cast<double>(m[i]) / bc1;
    const double v_hat = static_cast<double>(v[i]) / bc2;
    params[i] -= T(cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

template <typename T>
AdamOptimizer<T>::AdamOptimizer(std::vector<NamedParam<T>> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->size(), T(0));
    v_.emplace_back(p.tensor->size(), T(0));
  }
}

template <typename T>
void AdamOptimizer<T>::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = *params_[i].tensor;
    require(p.grad.size() == p.size(), "Adam: missing gradient for " + params_[i].name);
    adam_step<T>(p.values, p.grad, m_[i], v_[i], cfg_, t_);
  }
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           const std::vector<NamedParam<double>>& params,
                           const GradCheckOptions& opt) {
  return grad_check([&](std::uint64_t* region) {
    if (region) *region = 0;
    return loss();
  }, backward, params, opt);
}

GradCheckReport grad_check(const std::function<double(std::uint64_t*)>& loss,
                           const std::function<void()>& backward,
                           const std::vector<NamedParam<double>>& params,
                           const GradCheckOptions& opt) {
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (const auto& p : params) p.tensor->zero_grad();
  backward();
  std::uint64_t base = 0;
  loss(&base);
  std::mt19937_64 rng(opt.seed);
  for (const auto& p : params) {
    Tensor<double>& t = *p.tensor;
    std::vector<std::size_t> idx(t.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), opt.samples_per_layer));
    std::sort(idx.begin(), idx.end());

    GradCheckLayer layer;
    layer.name = p.name;
    for (std::size_t i : idx) {
      const double saved = t.values[i];
      // Estimates at h, h/10, ...; the larger step of the closest agreeing
      // neighbours wins. Steps whose endpoints leave the piece are dropped.
      double numeric = 0.0, prev = 0.0, best_gap = std::numeric_limits<double>::infinity();
      bool have_prev = false, have_any = false, shrank = false;
      double h = opt.step;
      for (int r = 0; r <= opt.refinements; ++r, h /= 10.0) {
        std::uint64_t at_up = 0, at_down = 0;
        t.values[i] = saved + h;
        const double up = loss(&at_up);
        t.values[i] = saved - h;
        const double down = loss(&at_down);
        t.values[i] = saved;
        const double d = (up - down) / (2.0 * h);
        if (at_up != base || at_down != base) {
          shrank = true;
          if (!have_any) numeric = d;
          continue;
        }
        if (!have_any) numeric = d;
        have_any = true;
        if (have_prev) {
          const double gap =
              std::abs(d - prev) / std::max({std::abs(d), std::abs(prev), opt.abs_floor});
          if (gap < best_gap) best_gap = gap, numeric = prev;
          if (gap <= opt.agreement) break;
          shrank = true;
        }
        prev = d;
        have_prev = true;
      }
      if (shrank) ++layer.refined;
      const double analytic = t.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.abs_floor});
      layer.max_rel_error = std::max(layer.max_rel_error, std::abs(analytic - numeric) / denom);
      layer.max_abs_analytic = std::max(layer.max_abs_analytic, std::abs(analytic));
      ++layer.checked;
    }
    if (layer.max_rel_error > report.max_rel_error) {
      report.max_rel_error = layer.max_rel_error;
      if (layer.max_rel_error > opt.tolerance) report.failing_layer = layer.name;
    }
    report.layers.push_back(layer);
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

#define NGCC_INSTANTIATE(T)                                                          \
  template struct Tensor<T>;                                                         \
  template struct SincLayerParams<T>;                                                \
  template class AdamOptimizer<T>;                                                   \
  template void leaky_relu_forward<T>(std::span<const T>, std::span<T>, T);          \
  template void leaky_relu_backward<T>(std::span<const T>, std::span<T>, T);         \
  template std::vector<T> sinc_kernels<T>(const SincLayerParams<T>&);                \
  template void sinc_kernels_backward<T>(SincLayerParams<T>&, std::span<const T>);   \
  template void sinc_kernels_backward<T>(const SincLayerParams<T>&,                  \
                                         std::span<const T>, std::span<T>,           \
                                         std::span<T>);                              \
  template void sinc_forward<T>(std::span<const T>, const SincLayerParams<T>&,       \
                                Padding, std::span<T>);                              \
  template void log_softmax_rows<T>(std::span<const T>, int, int, std::span<T>);     \
  template void adam_step<T>(std::span<T>, std::span<const T>, std::span<T>,         \
                             std::span<T>, const AdamConfig&, long);

NGCC_INSTANTIATE(float)
NGCC_INSTANTIATE(double)
#undef NGCC_INSTANTIATE

}  // namespace ngcc
