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

#include "ngcc/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ngcc/common.hpp"

namespace ngcc {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(adam.lr >= 0.0) || !std::isfinite(adam.lr)) throw ConfigError("train.lr: must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("train.beta1: must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("train.beta2: must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("train.epsilon: must be positive");
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"batch_size", batch_size},
              {"lr", adam.lr},
              {"beta1", adam.beta1},
              {"beta2", adam.beta2},
              {"epsilon", adam.epsilon},
              {"shuffle", shuffle},
              {"global_assignment", pit.global_assignment},
              {"all_subsets", all_subsets}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ConfigError("train: expected an object");
  auto get = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(dst);
    } catch (const json::exception&) {
      throw ConfigError(std::string("train.") + name + ": has the wrong type");
    }
  };
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("lr", c.adam.lr);
  get("beta1", c.adam.beta1);
  get("beta2", c.adam.beta2);
  get("epsilon", c.adam.epsilon);
  get("shuffle", c.shuffle);
  get("global_assignment", c.pit.global_assignment);
  get("all_subsets", c.all_subsets);
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"epochs", "batch_size", "lr", "beta1", "beta2", "epsilon",
                                  "shuffle", "global_assignment", "all_subsets"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      throw ConfigError("train." + key + ": unknown field");
  }
  c.validate();
  return c;
}

json BatchRecord::to_json() const {
  return json{{"step", step},
              {"epoch", epoch},
              {"loss", loss},
              {"frames", frames_used},
              {"discarded", frames_discarded},
              {"lr", lr}};
}

std::vector<LabeledFrame> prepare_training_frames(std::vector<LabeledFrame> frames, int tracks,
                                                  bool all_subsets, std::uint64_t seed) {
  if (all_subsets) return frames;
  const std::uint64_t selection_seed = derive_seed(seed, 0x5e1ec7ULL);
  for (auto& f : frames)
    if (f.num_sources > tracks) f = select_events(f, tracks, selection_seed);
  return frames;
}

template <typename T>
LossReport frame_loss(const NgccModel<T>& model, std::span<const std::span<const T>> channels,
                      const TdoaLabelSet& labels, int events, const PitOptions& pit,
                      typename NgccModel<T>::Gradients* grads) {
  const ModelConfig& c = model.config();
  if (events == 0) {
    LossReport r;
    r.frames_discarded = 1;
    return r;
  }
  typename NgccModel<T>::Cache cache;
  model.forward(channels, cache);
  std::vector<T> grad_logits;
  if (grads) grad_logits.resize(cache.logits.size());
  LossReport r = pit_frame_loss<T>(cache.log_probs, c.pairs(), c.tracks, c.tau_max, labels,
                                   events, pit, grad_logits);
  if (grads) model.backward(channels, cache, grad_logits, *grads);
  return r;
}

template LossReport frame_loss<float>(const NgccModel<float>&, std::span<const std::span<const float>>,
                                      const TdoaLabelSet&, int, const PitOptions&,
                                      NgccModel<float>::Gradients*);
template LossReport frame_loss<double>(const NgccModel<double>&,
                                       std::span<const std::span<const double>>,
                                       const TdoaLabelSet&, int, const PitOptions&,
                                       NgccModel<double>::Gradients*);

namespace {

std::string parameter_norms(NgccModel<float>& model) {
  std::ostringstream os;
  for (const auto& p : model.parameters()) {
    double v = 0.0, g = 0.0;
    for (float x : p.tensor->values) v += static_cast<double>(x) * x;
    for (float x : p.tensor->grad) g += static_cast<double>(x) * x;
    os << "\n  " << p.name << ": |w| = " << std::sqrt(v) << ", |grad| = " << std::sqrt(g);
  }
  return os.str();
}

}  // namespace

TrainResult train_model(NgccModel<float>& model, const std::vector<LabeledFrame>& frames,
                        const TrainConfig& config, std::uint64_t seed,
                        const std::function<void(const BatchRecord&)>& on_batch) {
  config.validate();
  const ModelConfig& mc = model.config();
  for (const auto& f : frames) {
    require(static_cast<int>(f.channels.size()) == mc.num_mics, "train: frame channel count");
    require(static_cast<int>(f.labels.size()) == mc.pairs(), "train: frame pair count");
  }
  auto params = model.parameters();
  for (auto& p : params) p.tensor->zero_grad();
  AdamOptimizer<float> adam(params, config.adam);
  TrainResult result;
  const std::size_t n = frames.size();
  const std::size_t B = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) {
      std::mt19937_64 rng(derive_seed(seed, 0xE90C0000ULL + static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t start = 0; start < n; start += B) {
      const std::size_t count = std::min(B, n - start);
      std::vector<typename NgccModel<float>::Gradients> grads(count);
      std::vector<LossReport> reports(count);
      std::vector<std::string> errors(count);
#pragma omp parallel for schedule(dynamic)
      for (std::size_t b = 0; b < count; ++b) {
        try {
          const LabeledFrame& f = frames[order[start + b]];
          std::vector<std::span<const float>> ch(f.channels.begin(), f.channels.end());
          grads[b] = model.zero_gradients();
          reports[b] = frame_loss<float>(model, ch, f.labels, f.num_sources, config.pit, &grads[b]);
        } catch (const std::exception& e) {
          errors[b] = e.what();
        }
      }
      for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("train: " + e);

      // Fixed-order reduction.
      LossReport batch;
      for (auto& p : params) std::fill(p.tensor->grad.begin(), p.tensor->grad.end(), 0.0f);
      for (std::size_t b = 0; b < count; ++b) {
        batch.merge(reports[b]);
        if (reports[b].frames_used == 0) continue;
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto& g = params[i].tensor->grad;
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += grads[b][i][k];
        }
      }
      const long step = static_cast<long>(result.history.size());
      if (!std::isfinite(batch.total))
        throw NumericError("train: non-finite loss at batch " + std::to_string(step) +
                           parameter_norms(model));
      if (batch.frames_used > 0) {
        const float inv = 1.0f / static_cast<float>(batch.frames_used);
        for (auto& p : params) {
          for (auto& g : p.tensor->grad) g *= inv;
          for (float g : p.tensor->grad)
            if (!std::isfinite(g))
              throw NumericError("train: non-finite gradient in " + p.name + " at batch " +
                                 std::to_string(step) + parameter_norms(model));
        }
        adam.step();
      }
      BatchRecord rec{step, epoch, batch.total, batch.frames_used, batch.frames_discarded,
                      config.adam.lr};
      result.history.push_back(rec);
      result.overall.merge(batch);
      if (on_batch) on_batch(rec);
    }
  }
  result.steps = adam.steps();

  auto running = [&](std::size_t from, std::size_t to) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = from; i < to; ++i) {
      sum += result.history[i].loss * result.history[i].frames_used;
      used += result.history[i].frames_used;
    }
    return used ? sum / used : 0.0;
  };
  const std::size_t h = result.history.size();
  const std::size_t tenth = std::max<std::size_t>(1, h / 10);
  result.initial_running_loss = running(0, std::min(tenth, h));
  result.final_running_loss = running(h - std::min(tenth, h), h);
  return result;
}

GradCheckReport model_grad_check(const NgccModel<double>& model_in, const LabeledFrame& frame,
                                 const PitOptions& pit, const GradCheckOptions& options,
                                 int* ties) {
  NgccModel<double> model = model_in;
  const ModelConfig& c = model.config();
  std::vector<std::vector<double>> data;
  for (const auto& ch : frame.channels) data.emplace_back(ch.begin(), ch.end());
  std::vector<std::span<const double>> ch(data.begin(), data.end());
  auto params = model.parameters();

  if (ties) {
    typename NgccModel<double>::Cache cache;
    model.forward(ch, cache);
    *ties = count_ties(cache.log_probs, c.pairs(), c.tracks, c.tau_max, frame.labels,
                       frame.num_sources);
  }
  // Fingerprint: activation signs and chosen assignments. While the front
  // end (sinc and filter bank) is untouched only the head is recomputed.
  const std::size_t front = 2 + static_cast<std::size_t>(c.filterbank_lengths.size());
  std::vector<std::vector<double>> front_values;
  for (std::size_t i = 0; i < front; ++i) front_values.push_back(params[i].tensor->values);
  typename NgccModel<double>::Cache base;
  model.forward(ch, base);
  auto loss = [&](std::uint64_t* region) {
    bool head_only = true;
    for (std::size_t i = 0; i < front; ++i)
      head_only = head_only && params[i].tensor->values == front_values[i];
    typename NgccModel<double>::Cache cache;
    if (head_only) {
      cache.corr = base.corr;
      cache.fb_pre = base.fb_pre;
      model.forward_head(cache);
    } else {
      model.forward(ch, cache);
    }
    const LossReport r = pit_frame_loss<double>(cache.log_probs, c.pairs(), c.tracks, c.tau_max,
                                                frame.labels, frame.num_sources, pit, {});
    if (region) {
      std::uint64_t h = 1469598103934665603ULL;
      auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ULL; };
      for (const auto* group : {&cache.fb_pre, &cache.head_pre})
        for (const auto& layer : *group)
          for (double v : layer) mix(v > 0.0);
      for (int a : r.chosen_assignment) mix(static_cast<std::uint64_t>(a));
      *region = h;
    }
    return r.total;
  };
  auto backward = [&] {
    auto grads = model.zero_gradients();
    frame_loss<double>(model, ch, frame.labels, frame.num_sources, pit, &grads);
    for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor->grad = grads[i];
  };
  return grad_check(loss, backward, params, options);
}

}  // namespace ngcc
