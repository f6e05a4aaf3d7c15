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

#include "ngcc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ngcc/common.hpp"
#include "ngcc/fft.hpp"

namespace ngcc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ConfigError("model." + field + ": " + why);
  };
  if (filters < 1) bad("filters", "must be >= 1");
  if (feature_channels < 1) bad("feature_channels", "must be >= 1");
  if (tracks < 1) bad("tracks", "must be >= 1");
  if (tau_max < 1) bad("tau_max", "must be >= 1");
  if (num_mics < 2) bad("num_mics", "must be >= 2");
  if (head_channels < 1) bad("head_channels", "must be >= 1");
  if (window <= 2 * tau_max) bad("window", "must exceed 2 * tau_max");
  if (sinc_length < 1 || sinc_length % 2 == 0 || sinc_length > window)
    bad("sinc_length", "must be odd and no longer than the window");
  for (int len : filterbank_lengths)
    if (len < 1 || len % 2 == 0 || len > window)
      bad("filterbank_lengths", "lengths must be odd and no longer than the window");
  if (head_lengths.empty()) bad("head_lengths", "need at least one head layer");
  for (int len : head_lengths)
    if (len < 1 || len % 2 == 0) bad("head_lengths", "lengths must be odd");
  if (!(sample_rate > 0.0)) bad("sample_rate", "must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) bad("leaky_slope", "must lie in [0, 1)");
}

json ModelConfig::to_json() const {
  return json{{"filters", filters},
              {"feature_channels", feature_channels},
              {"tracks", tracks},
              {"sinc_length", sinc_length},
              {"filterbank_lengths", filterbank_lengths},
              {"head_lengths", head_lengths},
              {"head_channels", head_channels},
              {"tau_max", tau_max},
              {"num_mics", num_mics},
              {"window", window},
              {"sample_rate", sample_rate},
              {"leaky_slope", leaky_slope},
              {"padding", padding == Padding::kCircular ? "circular" : "zero"},
              {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  if (!j.is_object()) throw ConfigError("model: expected an object");
  auto get = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(dst);
    } catch (const json::exception&) {
      throw ConfigError(std::string("model.") + name + ": has the wrong type");
    }
  };
  get("filters", c.filters);
  get("feature_channels", c.feature_channels);
  get("tracks", c.tracks);
  get("sinc_length", c.sinc_length);
  get("filterbank_lengths", c.filterbank_lengths);
  get("head_lengths", c.head_lengths);
  get("head_channels", c.head_channels);
  get("tau_max", c.tau_max);
  get("num_mics", c.num_mics);
  get("window", c.window);
  get("sample_rate", c.sample_rate);
  get("leaky_slope", c.leaky_slope);
  get("init_seed", c.init_seed);
  std::string padding = "circular";
  get("padding", padding);
  if (padding == "circular") c.padding = Padding::kCircular;
  else if (padding == "zero") c.padding = Padding::kZero;
  else throw ConfigError("model.padding: expected 'circular' or 'zero'");
  c.validate();
  return c;
}

std::string ModelConfig::architecture_hash() const {
  json j = to_json();
  j.erase("init_seed");
  return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------------------
// ChannelwiseGcc

template <typename T>
ChannelwiseGcc<T>::ChannelwiseGcc(int length, int tau_max, double epsilon)
    : n_(length), tau_max_(tau_max), epsilon_(T(epsilon)) {
  require(length > 0 && tau_max >= 0 && 2 * tau_max < length,
          "channelwise_gcc: need 0 <= tau_max < N/2");
  const int lags = 2 * tau_max + 1;
  cos_.resize(static_cast<std::size_t>(lags) * n_);
  sin_.resize(cos_.size());
  const double w = 2.0 * std::numbers::pi / n_;
  for (int li = 0; li < lags; ++li) {
    const long tau = li - tau_max;
    for (int k = 0; k < n_; ++k) {
      long idx = (static_cast<long>(k) * tau) % n_;
      if (idx < 0) idx += n_;
      cos_[static_cast<std::size_t>(li) * n_ + k] = T(std::cos(w * idx));
      sin_[static_cast<std::size_t>(li) * n_ + k] = T(std::sin(w * idx));
    }
  }
}

template <typename T>
void ChannelwiseGcc<T>::spectra(std::span<const T> feat, int channels,
                                std::vector<std::complex<T>>& out) const {
  require(feat.size() == static_cast<std::size_t>(channels) * n_,
          "channelwise_gcc: feature shape mismatch");
  out.resize(feat.size());
  Dft<T> dft(n_);
  for (int c = 0; c < channels; ++c)
    dft.forward_real(feat.subspan(static_cast<std::size_t>(c) * n_, n_),
                     std::span(out).subspan(static_cast<std::size_t>(c) * n_, n_));
}

template <typename T>
void ChannelwiseGcc<T>::correlate(std::span<const std::complex<T>> si,
                                  std::span<const std::complex<T>> sj,
                                  int channels, std::span<T> out) const {
  const int lags = this->lags();
  require(out.size() == static_cast<std::size_t>(channels) * lags,
          "channelwise_gcc: output shape mismatch");
  std::vector<T> gr(n_), gi(n_);
  const T inv_n = T(1) / T(n_);
  for (int c = 0; c < channels; ++c) {
    const std::complex<T>* xi = si.data() + static_cast<std::size_t>(c) * n_;
    const std::complex<T>* xj = sj.data() + static_cast<std::size_t>(c) * n_;
    for (int k = 0; k < n_; ++k) {
      const std::complex<T> s = xi[k] * std::conj(xj[k]);
      const T d = std::abs(s) + epsilon_;
      gr[k] = d > T(0) ? s.real() / d : T(0);
      gi[k] = d > T(0) ? s.imag() / d : T(0);
    }
    for (int li = 0; li < lags; ++li) {
      const T* cs = cos_.data() + static_cast<std::size_t>(li) * n_;
      const T* sn = sin_.data() + static_cast<std::size_t>(li) * n_;
      T acc = 0;
      for (int k = 0; k < n_; ++k) acc += gr[k] * cs[k] - gi[k] * sn[k];
      out[static_cast<std::size_t>(c) * lags + li] = acc * inv_n;
    }
  }
}

template <typename T>
void ChannelwiseGcc<T>::correlate_backward(std::span<const std::complex<T>> si,
                                           std::span<const std::complex<T>> sj,
                                           int channels, std::span<const T> gcorr,
                                           std::span<std::complex<T>> gsi,
                                           std::span<std::complex<T>> gsj) const {
  const int lags = this->lags();
  std::vector<T> ggr(n_), ggi(n_);
  const T inv_n = T(1) / T(n_);
  for (int c = 0; c < channels; ++c) {
    std::fill(ggr.begin(), ggr.end(), T(0));
    std::fill(ggi.begin(), ggi.end(), T(0));
    for (int li = 0; li < lags; ++li) {
      const T g = gcorr[static_cast<std::size_t>(c) * lags + li] * inv_n;
      const T* cs = cos_.data() + static_cast<std::size_t>(li) * n_;
      const T* sn = sin_.data() + static_cast<std::size_t>(li) * n_;
      for (int k = 0; k < n_; ++k) {
        ggr[k] += g * cs[k];
        ggi[k] -= g * sn[k];
      }
    }
    const std::size_t off = static_cast<std::size_t>(c) * n_;
    for (int k = 0; k < n_; ++k) {
      const std::complex<T> xi = si[off + k], xj = sj[off + k];
      const std::complex<T> s = xi * std::conj(xj);
      const T m = std::abs(s);
      const T d = m + epsilon_;
      if (!(d > T(0))) continue;
      const std::complex<T> gg{ggr[k], ggi[k]};
      // G = S / (|S| + eps): quotient rule through the magnitude.
      std::complex<T> gs = gg / d;
      if (m > T(0)) {
        const T proj = gg.real() * s.real() + gg.imag() * s.imag();
        gs -= s * (proj / (d * d * m));
      }
      gsi[off + k] += gs * xj;
      gsj[off + k] += std::conj(gs) * xi;
    }
  }
}

template <typename T>
void ChannelwiseGcc<T>::spectra_backward(std::span<const std::complex<T>> gspec,
                                         int channels, std::span<T> gfeat) const {
  require(gfeat.size() == static_cast<std::size_t>(channels) * n_,
          "channelwise_gcc: gradient shape mismatch");
  Dft<T> dft(n_);
  std::vector<std::complex<T>> tmp(n_);
  for (int c = 0; c < channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * n_;
    dft.inverse(gspec.subspan(off, n_), tmp);
    for (int n = 0; n < n_; ++n) gfeat[off + n] = tmp[n].real();
  }
}

template <typename T>
std::vector<T> ChannelwiseGcc<T>::operator()(std::span<const T> feat_i,
                                             std::span<const T> feat_j,
                                             int channels) const {
  std::vector<std::complex<T>> si, sj;
  spectra(feat_i, channels, si);
  spectra(feat_j, channels, sj);
  std::vector<T> out(static_cast<std::size_t>(channels) * lags());
  correlate(si, sj, channels, out);
  return out;
}

// ---------------------------------------------------------------------------
// NgccModel

namespace {

template <typename T>
Tensor<T> he_uniform(std::vector<int> shape, int fan_in, double slope,
                     std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape), true);
  const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.values) v = T(u(rng));
  return t;
}

}  // namespace

template <typename T>
NgccModel<T>::NgccModel(const ModelConfig& config)
    : config_(config), gcc_(config.window, config.tau_max) {
  config_.validate();
  const int L = config_.filters;
  sinc_ = SincLayerParams<T>::mel_init(L, config_.sinc_length, config_.sample_rate);
  std::mt19937_64 rng(config_.init_seed);
  for (int len : config_.filterbank_lengths)
    fb_weights_.push_back(he_uniform<T>({L, L, len}, L * len, config_.leaky_slope, rng));
  const int layers = static_cast<int>(config_.head_lengths.size());
  for (int h = 0; h < layers; ++h) {
    const ConvShape s = head_shape(h);
    head_weights_.push_back(he_uniform<T>({s.out_channels, s.in_channels, s.taps},
                                          s.in_channels * s.taps, config_.leaky_slope, rng));
    head_biases_.emplace_back(std::vector<int>{s.out_channels}, true);
  }
  track_weight_ = he_uniform<T>({config_.tracks, config_.feature_channels, 1},
                                config_.feature_channels, 1.0, rng);
}

template <typename T>
ConvShape NgccModel<T>::fb_shape(int layer) const {
  // layer 0 is the sinc layer
  const int taps = layer == 0 ? config_.sinc_length : config_.filterbank_lengths[layer - 1];
  return ConvShape{layer == 0 ? 1 : config_.filters, config_.filters, taps, config_.window,
                   config_.padding};
}

template <typename T>
ConvShape NgccModel<T>::head_shape(int layer) const {
  const int layers = static_cast<int>(config_.head_lengths.size());
  const int in = layer == 0 ? config_.filters : config_.head_channels;
  const int out = layer == layers - 1 ? config_.feature_channels : config_.head_channels;
  return ConvShape{in, out, config_.head_lengths[layer], config_.lags(), Padding::kZero};
}

template <typename T>
std::vector<NamedParam<T>> NgccModel<T>::parameters() {
  std::vector<NamedParam<T>> p;
  p.push_back({"sinc.low", &sinc_.low});
  p.push_back({"sinc.band", &sinc_.band});
  for (std::size_t i = 0; i < fb_weights_.size(); ++i)
    p.push_back({"filterbank" + std::to_string(i + 1) + ".weight", &fb_weights_[i]});
  for (std::size_t i = 0; i < head_weights_.size(); ++i) {
    p.push_back({"head" + std::to_string(i + 1) + ".weight", &head_weights_[i]});
    p.push_back({"head" + std::to_string(i + 1) + ".bias", &head_biases_[i]});
  }
  p.push_back({"track.weight", &track_weight_});
  return p;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> NgccModel<T>::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  for (const auto& p : const_cast<NgccModel*>(this)->parameters())
    out.emplace_back(p.name, p.tensor);
  return out;
}

template <typename T>
std::size_t NgccModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

template <typename T>
typename NgccModel<T>::Gradients NgccModel<T>::zero_gradients() const {
  Gradients g;
  for (const auto& [name, t] : named_tensors()) g.emplace_back(t->size(), T(0));
  return g;
}

template <typename T>
void NgccModel<T>::forward(std::span<const std::span<const T>> frame, Cache& cache) const {
  const ModelConfig& c = config_;
  require(static_cast<int>(frame.size()) == c.num_mics, "model: wrong number of channels");
  for (const auto& ch : frame)
    require(static_cast<int>(ch.size()) == c.window, "model: frame length must equal the window");
  const int L = c.filters, N = c.window, lags = c.lags(), pairs = c.pairs();
  const int layers = fb_layers();
  const T slope = T(c.leaky_slope);
  const std::vector<T> kernels = sinc_kernels(sinc_);

  cache.fb_pre.assign(static_cast<std::size_t>(c.num_mics) * layers, {});
  cache.fb_post.assign(cache.fb_pre.size(), {});
  cache.spectra.assign(static_cast<std::size_t>(c.num_mics) * L * N, {});
  for (int m = 0; m < c.num_mics; ++m) {
    std::span<const T> input = frame[m];
    for (int layer = 0; layer < layers; ++layer) {
      auto& pre = cache.fb_pre[m * layers + layer];
      auto& post = cache.fb_post[m * layers + layer];
      pre.assign(static_cast<std::size_t>(L) * N, T(0));
      post.resize(pre.size());
      const std::span<const T> w = layer == 0 ? std::span<const T>(kernels)
                                              : std::span<const T>(fb_weights_[layer - 1].values);
      conv1d_forward<T>(fb_shape(layer), input, w, {}, pre);
      leaky_relu_forward<T>(pre, post, slope);
      input = post;
    }
    std::vector<std::complex<T>> spec;
    gcc_.spectra(input, L, spec);
    std::copy(spec.begin(), spec.end(),
              cache.spectra.begin() + static_cast<std::ptrdiff_t>(m) * L * N);
  }

  const auto pair_list = mic_pairs(c.num_mics);
  cache.corr.assign(static_cast<std::size_t>(pairs) * L * lags, T(0));
  const std::span<const std::complex<T>> spectra(cache.spectra);
  for (int p = 0; p < pairs; ++p) {
    const auto [i, j] = pair_list[p];
    gcc_.correlate(spectra.subspan(static_cast<std::size_t>(i) * L * N, L * N),
                   spectra.subspan(static_cast<std::size_t>(j) * L * N, L * N), L,
                   std::span(cache.corr).subspan(static_cast<std::size_t>(p) * L * lags, L * lags));
  }
  forward_head(cache);
}

template <typename T>
void NgccModel<T>::forward_head(Cache& cache) const {
  const ModelConfig& c = config_;
  const int lags = c.lags(), pairs = c.pairs();
  const T slope = T(c.leaky_slope);
  require(cache.corr.size() == static_cast<std::size_t>(pairs) * c.filters * lags,
          "model: cache holds no correlations");
  const int head_layers = static_cast<int>(head_weights_.size());
  cache.head_pre.assign(head_layers, {});
  cache.head_post.assign(head_layers, {});
  for (int h = 0; h < head_layers; ++h) {
    const ConvShape s = head_shape(h);
    const std::vector<T>& in = h == 0 ? cache.corr : cache.head_post[h - 1];
    auto& pre = cache.head_pre[h];
    auto& post = cache.head_post[h];
    pre.assign(static_cast<std::size_t>(pairs) * s.output_size(), T(0));
    post.resize(pre.size());
    for (int p = 0; p < pairs; ++p)
      conv1d_forward<T>(s, std::span(in).subspan(static_cast<std::size_t>(p) * s.input_size(), s.input_size()),
                        head_weights_[h].values, head_biases_[h].values,
                        std::span(pre).subspan(static_cast<std::size_t>(p) * s.output_size(), s.output_size()));
    leaky_relu_forward<T>(pre, post, slope);
  }

  const ConvShape ts{c.feature_channels, c.tracks, 1, lags, Padding::kZero};
  cache.logits.assign(static_cast<std::size_t>(pairs) * ts.output_size(), T(0));
  for (int p = 0; p < pairs; ++p)
    conv1d_forward<T>(ts, cache.feature(p, c.feature_channels, lags), track_weight_.values, {},
                      std::span(cache.logits).subspan(static_cast<std::size_t>(p) * ts.output_size(),
                                                      ts.output_size()));
  cache.log_probs.resize(cache.logits.size());
  log_softmax_rows<T>(cache.logits, pairs * c.tracks, lags, cache.log_probs);
}

template <typename T>
void NgccModel<T>::backward(std::span<const std::span<const T>> frame, const Cache& cache,
                            std::span<const T> grad_logits, Gradients& grads) const {
  const ModelConfig& c = config_;
  const int L = c.filters, N = c.window, lags = c.lags(), pairs = c.pairs();
  const int layers = fb_layers();
  const int head_layers = static_cast<int>(head_weights_.size());
  const T slope = T(c.leaky_slope);
  require(grad_logits.size() == cache.logits.size(), "model backward: logits gradient shape");
  require(grads.size() == 3 + fb_weights_.size() + 2 * head_weights_.size(),
          "model backward: gradient buffer layout");

  const std::size_t fb_base = 2;
  const std::size_t head_base = fb_base + fb_weights_.size();
  const std::size_t track_index = head_base + 2 * head_weights_.size();

  // Track projection.
  const ConvShape ts{c.feature_channels, c.tracks, 1, lags, Padding::kZero};
  std::vector<T> g_post(static_cast<std::size_t>(pairs) * ts.input_size(), T(0));
  for (int p = 0; p < pairs; ++p)
    conv1d_backward<T>(ts, cache.feature(p, c.feature_channels, lags), track_weight_.values,
                       grad_logits.subspan(static_cast<std::size_t>(p) * ts.output_size(), ts.output_size()),
                       std::span(g_post).subspan(static_cast<std::size_t>(p) * ts.input_size(), ts.input_size()),
                       grads[track_index], {});

  // Head, last layer first.
  for (int h = head_layers - 1; h >= 0; --h) {
    const ConvShape s = head_shape(h);
    leaky_relu_backward<T>(cache.head_pre[h], g_post, slope);
    const std::vector<T>& in = h == 0 ? cache.corr : cache.head_post[h - 1];
    std::vector<T> g_in(static_cast<std::size_t>(pairs) * s.input_size(), T(0));
    for (int p = 0; p < pairs; ++p)
      conv1d_backward<T>(s, std::span(in).subspan(static_cast<std::size_t>(p) * s.input_size(), s.input_size()),
                         head_weights_[h].values,
                         std::span<const T>(g_post).subspan(static_cast<std::size_t>(p) * s.output_size(), s.output_size()),
                         std::span(g_in).subspan(static_cast<std::size_t>(p) * s.input_size(), s.input_size()),
                         grads[head_base + 2 * h], grads[head_base + 2 * h + 1]);
    g_post = std::move(g_in);
  }
  // g_post is now d/dcorr, [pair][L][lags].

  std::vector<std::complex<T>> g_spec(cache.spectra.size());
  const auto pair_list = mic_pairs(c.num_mics);
  const std::span<const std::complex<T>> spectra(cache.spectra);
  const std::size_t block = static_cast<std::size_t>(L) * N;
  for (int p = 0; p < pairs; ++p) {
    const auto [i, j] = pair_list[p];
    gcc_.correlate_backward(spectra.subspan(i * block, block), spectra.subspan(j * block, block), L,
                            std::span<const T>(g_post).subspan(static_cast<std::size_t>(p) * L * lags, L * lags),
                            std::span(g_spec).subspan(i * block, block),
                            std::span(g_spec).subspan(j * block, block));
  }

  const std::vector<T> kernels = sinc_kernels(sinc_);
  std::vector<T> g_kernels(kernels.size(), T(0));
  std::vector<T> g(block), g_in(block);
  for (int m = 0; m < c.num_mics; ++m) {
    gcc_.spectra_backward(std::span<const std::complex<T>>(g_spec).subspan(m * block, block), L, g);
    for (int layer = layers - 1; layer >= 0; --layer) {
      leaky_relu_backward<T>(cache.fb_pre[m * layers + layer], g, slope);
      if (layer == 0) {
        conv1d_backward<T>(fb_shape(0), frame[m], kernels, g, {}, g_kernels, {});
      } else {
        conv1d_backward<T>(fb_shape(layer), cache.fb_post[m * layers + layer - 1],
                           fb_weights_[layer - 1].values, g, g_in, grads[fb_base + layer - 1], {});
        std::swap(g, g_in);
      }
    }
  }
  sinc_kernels_backward<T>(sinc_, g_kernels, grads[0], grads[1]);
}

template <typename T>
std::vector<T> NgccModel<T>::filterbank_forward(std::span<const T> samples) const {
  require(static_cast<int>(samples.size()) == config_.window,
          "filterbank_forward: frame length must equal the window");
  const int layers = fb_layers();
  const std::size_t size = static_cast<std::size_t>(config_.filters) * config_.window;
  const std::vector<T> kernels = sinc_kernels(sinc_);
  std::vector<T> in(samples.begin(), samples.end()), pre(size), post(size);
  for (int layer = 0; layer < layers; ++layer) {
    const std::span<const T> w = layer == 0 ? std::span<const T>(kernels)
                                            : std::span<const T>(fb_weights_[layer - 1].values);
    conv1d_forward<T>(fb_shape(layer), in, w, {}, pre);
    leaky_relu_forward<T>(pre, post, T(config_.leaky_slope));
    in = post;
  }
  return in;
}

template <typename T>
std::vector<T> NgccModel<T>::channelwise_gcc(std::span<const T> feat_i,
                                             std::span<const T> feat_j) const {
  require(feat_i.size() == feat_j.size() &&
              feat_i.size() == static_cast<std::size_t>(config_.filters) * config_.window,
          "channelwise_gcc: feature maps must be [L, window]");
  return gcc_(feat_i, feat_j, config_.filters);
}

template <typename T>
std::vector<T> NgccModel<T>::head_forward(std::span<const T> corr, int pairs) const {
  const int L = config_.filters, lags = config_.lags();
  require(corr.size() == static_cast<std::size_t>(L) * pairs * lags,
          "head_forward: expected [L, pairs, lags]");
  std::vector<T> x(corr.size());
  for (int l = 0; l < L; ++l)
    for (int p = 0; p < pairs; ++p)
      for (int t = 0; t < lags; ++t)
        x[(static_cast<std::size_t>(p) * L + l) * lags + t] = corr[(static_cast<std::size_t>(l) * pairs + p) * lags + t];
  for (int h = 0; h < static_cast<int>(head_weights_.size()); ++h) {
    const ConvShape s = head_shape(h);
    std::vector<T> y(static_cast<std::size_t>(pairs) * s.output_size());
    for (int p = 0; p < pairs; ++p)
      conv1d_forward<T>(s, std::span<const T>(x).subspan(static_cast<std::size_t>(p) * s.input_size(), s.input_size()),
                        head_weights_[h].values, head_biases_[h].values,
                        std::span(y).subspan(static_cast<std::size_t>(p) * s.output_size(), s.output_size()));
    leaky_relu_forward<T>(std::span<const T>(y), std::span<T>(y), T(config_.leaky_slope));
    x = std::move(y);
  }
  const int C = config_.feature_channels;
  std::vector<T> out(x.size());
  for (int p = 0; p < pairs; ++p)
    for (int ch = 0; ch < C; ++ch)
      for (int t = 0; t < lags; ++t)
        out[(static_cast<std::size_t>(ch) * pairs + p) * lags + t] = x[(static_cast<std::size_t>(p) * C + ch) * lags + t];
  return out;
}

template <typename T>
TrackPosterior NgccModel<T>::track_forward(const TdoaFeature& feature) const {
  const int C = config_.feature_channels, K = config_.tracks, lags = config_.lags();
  require(feature.channels == C && feature.lags == lags &&
              feature.values.size() == static_cast<std::size_t>(C) * feature.pairs * lags,
          "track_forward: feature shape mismatch");
  const ConvShape ts{C, K, 1, lags, Padding::kZero};
  TrackPosterior post;
  post.pairs = feature.pairs;
  post.tracks = K;
  post.tau_max = config_.tau_max;
  post.probs.resize(static_cast<std::size_t>(feature.pairs) * K * lags);
  std::vector<T> x(static_cast<std::size_t>(C) * lags), logits(static_cast<std::size_t>(K) * lags),
      logp(logits.size());
  for (int p = 0; p < feature.pairs; ++p) {
    for (int ch = 0; ch < C; ++ch)
      for (int t = 0; t < lags; ++t) x[static_cast<std::size_t>(ch) * lags + t] = T(feature.at(ch, p, t));
    conv1d_forward<T>(ts, x, track_weight_.values, {}, logits);
    log_softmax_rows<T>(logits, K, lags, logp);
    for (std::size_t i = 0; i < logp.size(); ++i)
      post.probs[static_cast<std::size_t>(p) * K * lags + i] = std::exp(static_cast<double>(logp[i]));
  }
  return post;
}

template <typename T>
TrackPosterior NgccModel<T>::posterior(const Cache& cache) const {
  TrackPosterior post;
  post.pairs = config_.pairs();
  post.tracks = config_.tracks;
  post.tau_max = config_.tau_max;
  post.probs.resize(cache.log_probs.size());
  for (std::size_t i = 0; i < post.probs.size(); ++i)
    post.probs[i] = std::exp(static_cast<double>(cache.log_probs[i]));
  return post;
}

template <typename T>
TdoaFeature NgccModel<T>::feature(const Cache& cache) const {
  const int C = config_.feature_channels, lags = config_.lags(), pairs = config_.pairs();
  TdoaFeature f;
  f.channels = C;
  f.pairs = pairs;
  f.lags = lags;
  f.values.resize(static_cast<std::size_t>(C) * pairs * lags);
  const auto& x = cache.head_post.back();
  for (int p = 0; p < pairs; ++p)
    for (int ch = 0; ch < C; ++ch)
      for (int t = 0; t < lags; ++t)
        f.values[(static_cast<std::size_t>(ch) * pairs + p) * lags + t] =
            static_cast<double>(x[(static_cast<std::size_t>(p) * C + ch) * lags + t]);
  return f;
}

template <typename T>
std::pair<TrackPosterior, TdoaFeature> NgccModel<T>::model_forward(
    std::span<const std::span<const T>> frame) const {
  Cache cache;
  forward(frame, cache);
  return {posterior(cache), feature(cache)};
}

template <typename T>
std::pair<TrackPosterior, TdoaFeature> NgccModel<T>::model_forward(const FrameSet& frame) const {
  std::vector<std::vector<T>> data;
  for (const auto& ch : frame) data.emplace_back(ch.samples.begin(), ch.samples.end());
  std::vector<std::span<const T>> spans(data.begin(), data.end());
  return model_forward(spans);
}

template <typename T>
std::vector<TdoaFeature> NgccModel<T>::extract_features(const MultiChannel& signal) const {
  require(static_cast<int>(signal.size()) == config_.num_mics || signal.empty(),
          "extract_features: wrong number of channels");
  const auto frames = frame_signal(signal, config_.sample_rate, config_.window, config_.window);
  std::vector<TdoaFeature> out(frames.size());
  const long count = static_cast<long>(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < count; ++t) {
    std::vector<std::vector<T>> data;
    for (const auto& ch : frames[t]) data.emplace_back(ch.samples.begin(), ch.samples.end());
    std::vector<std::span<const T>> spans(data.begin(), data.end());
    Cache cache;
    forward(spans, cache);
    out[t] = feature(cache);
  }
  return out;
}

template <typename T>
template <typename U>
void NgccModel<T>::assign_from(const NgccModel<U>& other) {
  require(other.config_.architecture_hash() == config_.architecture_hash(),
          "assign_from: architectures differ");
  auto dst = parameters();
  const auto src = other.named_tensors();
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t k = 0; k < dst[i].tensor->size(); ++k)
      dst[i].tensor->values[k] = static_cast<T>(src[i].second->values[k]);
}

template class ChannelwiseGcc<float>;
template class ChannelwiseGcc<double>;
template class NgccModel<float>;
template class NgccModel<double>;
template void NgccModel<float>::assign_from<double>(const NgccModel<double>&);
template void NgccModel<double>::assign_from<float>(const NgccModel<float>&);
template void NgccModel<float>::assign_from<float>(const NgccModel<float>&);
template void NgccModel<double>::assign_from<double>(const NgccModel<double>&);

}  // namespace ngcc
