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

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngcc/autodiff.hpp"
#include "ngcc/signal.hpp"

namespace ngcc {

struct ModelConfig {
  int filters = 32;            // L, filter-bank channels
  int feature_channels = 16;   // C, head output channels
  int tracks = 3;              // K
  int sinc_length = 101;
  std::vector<int> filterbank_lengths{11, 9, 7};
  std::vector<int> head_lengths{9, 9, 9, 1};
  int head_channels = 32;
  int tau_max = 6;
  int num_mics = 4;
  int window = 480;
  double sample_rate = 24000.0;
  double leaky_slope = kLeakySlope;
  Padding padding = Padding::kCircular;  // filter bank; the head zero-pads
  std::uint64_t init_seed = 0;

  int pairs() const { return num_mics * (num_mics - 1) / 2; }
  int lags() const { return 2 * tau_max + 1; }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  /// Digest of every field that affects parameter shapes or the forward pass.
  std::string architecture_hash() const;
};

/// p_k(tau | x_i, x_j): probs laid out [pair][track][lag].
struct TrackPosterior {
  int pairs = 0, tracks = 0, tau_max = 0;
  std::vector<double> probs;

  int lags() const { return 2 * tau_max + 1; }
  double at(int pair, int track, int lag) const {
    return probs[(static_cast<std::size_t>(pair) * tracks + track) * lags() + lag + tau_max];
  }
  std::span<const double> row(int pair, int track) const {
    return {probs.data() + (static_cast<std::size_t>(pair) * tracks + track) * lags(),
            static_cast<std::size_t>(lags())};
  }
};

/// TDOA feature laid out [channel][pair][lag].
struct TdoaFeature {
  int channels = 0, pairs = 0, lags = 0;
  std::vector<double> values;

  double at(int c, int p, int lag_index) const {
    return values[(static_cast<std::size_t>(c) * pairs + p) * lags + lag_index];
  }
};

/// Differentiable GCC-PHAT for every channel of two [L, N] feature maps.
/// Owns the lag twiddle table for (N, tau_max).
template <typename T>
class ChannelwiseGcc {
 public:
  ChannelwiseGcc(int length, int tau_max, double epsilon = kPhatEpsilon);

  int length() const { return n_; }
  int lags() const { return 2 * tau_max_ + 1; }

  /// Full-length spectra of each channel, [L][N].
  void spectra(std::span<const T> feat, int channels,
               std::vector<std::complex<T>>& out) const;
  /// Correlations [L, lags] from the two spectra.
  void correlate(std::span<const std::complex<T>> spec_i,
                 std::span<const std::complex<T>> spec_j, int channels,
                 std::span<T> out) const;
  /// Accumulates d/dspec_i and d/dspec_j given d/dcorr.
  void correlate_backward(std::span<const std::complex<T>> spec_i,
                          std::span<const std::complex<T>> spec_j, int channels,
                          std::span<const T> grad_corr,
                          std::span<std::complex<T>> grad_spec_i,
                          std::span<std::complex<T>> grad_spec_j) const;
  /// d/dfeat from d/dspectra (overwrites grad_feat).
  void spectra_backward(std::span<const std::complex<T>> grad_spec, int channels,
                        std::span<T> grad_feat) const;

  /// Convenience: correlations of two [L, N] maps.
  std::vector<T> operator()(std::span<const T> feat_i, std::span<const T> feat_j,
                            int channels) const;

 private:
  int n_, tau_max_;
  T epsilon_;
  std::vector<T> cos_, sin_;  // [lag][k], angle 2 pi k tau / N
};

/// The NGCC-PHAT network: shared sinc + conv filter bank per microphone,
/// channel-wise GCC-PHAT per pair, a per-pair conv head over the lag axis and
/// a 1-tap projection to K track posteriors.
template <typename T>
class NgccModel {
 public:
  explicit NgccModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  /// All trainable tensors in a fixed order.
  std::vector<NamedParam<T>> parameters();
  std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const;
  std::size_t parameter_count() const;

  /// Activations of one frame, kept for the backward pass.
  struct Cache {
    std::vector<std::vector<T>> fb_pre;   // [mic * layers + layer] [L, N]
    std::vector<std::vector<T>> fb_post;  // same, after the activation
    std::vector<std::complex<T>> spectra; // [mic][L][N]
    std::vector<T> corr;                  // [pair][L][lags]
    std::vector<std::vector<T>> head_pre, head_post;  // [layer] [pair][ch][lags]
    std::vector<T> logits;                // [pair][K][lags]
    std::vector<T> log_probs;             // [pair][K][lags]

    std::span<const T> feature(int pair, int channels, int lags) const {
      const auto& f = head_post.back();
      return {f.data() + static_cast<std::size_t>(pair) * channels * lags,
              static_cast<std::size_t>(channels) * lags};
    }
  };

  /// Gradient storage parallel to parameters().
  using Gradients = std::vector<std::vector<T>>;
  Gradients zero_gradients() const;

  /// frame: num_mics channels of window samples each.
  void forward(std::span<const std::span<const T>> frame, Cache& cache) const;
  /// Reruns the head and track stages on cache.corr.
  void forward_head(Cache& cache) const;
  /// Accumulates parameter gradients given d(loss)/d(logits).
  void backward(std::span<const std::span<const T>> frame, const Cache& cache,
                std::span<const T> grad_logits, Gradients& grads) const;

  // Stage-level entry points.
  std::vector<T> filterbank_forward(std::span<const T> samples) const;   // [L, N]
  std::vector<T> channelwise_gcc(std::span<const T> feat_i,
                                 std::span<const T> feat_j) const;       // [L, lags]
  /// corr [L, pairs, lags] -> feature [C, pairs, lags]
  std::vector<T> head_forward(std::span<const T> corr, int pairs) const;
  TrackPosterior track_forward(const TdoaFeature& feature) const;

  /// Posterior and retained feature for one frame.
  std::pair<TrackPosterior, TdoaFeature> model_forward(const FrameSet& frame) const;
  std::pair<TrackPosterior, TdoaFeature> model_forward(
      std::span<const std::span<const T>> frame) const;

  /// Non-overlapping windows of `signal`, one feature per window (the track
  /// projection is skipped). Parallel over windows.
  std::vector<TdoaFeature> extract_features(const MultiChannel& signal) const;

  TrackPosterior posterior(const Cache& cache) const;
  TdoaFeature feature(const Cache& cache) const;

  /// Copies values from another precision.
  template <typename U>
  void assign_from(const NgccModel<U>& other);

 private:
  ModelConfig config_;
  SincLayerParams<T> sinc_;
  std::vector<Tensor<T>> fb_weights_;
  std::vector<Tensor<T>> head_weights_, head_biases_;
  Tensor<T> track_weight_;
  ChannelwiseGcc<T> gcc_;

  ConvShape fb_shape(int layer) const;
  ConvShape head_shape(int layer) const;
  int fb_layers() const { return 1 + static_cast<int>(fb_weights_.size()); }

  template <typename U>
  friend class NgccModel;
};

}  // namespace ngcc
