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
#include <vector>

#include "json.hpp"
#include "ngcc/autodiff.hpp"
#include "ngcc/dataset.hpp"
#include "ngcc/model.hpp"
#include "ngcc/pit.hpp"

namespace ngcc {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 32;
  AdamConfig adam;
  bool shuffle = true;
  PitOptions pit;
  /// Keep every label of P > K frames and minimise over all K-subsets
  /// instead of drawing K labels at load time.
  bool all_subsets = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct BatchRecord {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;  // mean over used frames of the batch
  std::size_t frames_used = 0;
  std::size_t frames_discarded = 0;
  double lr = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<BatchRecord> history;
  LossReport overall;
  long steps = 0;
  /// Frame-weighted mean loss over the first and last tenth of the batches.
  double initial_running_loss = 0.0;
  double final_running_loss = 0.0;
};

/// Label policy applied when a dataset is loaded for training.
std::vector<LabeledFrame> prepare_training_frames(std::vector<LabeledFrame> frames,
                                                  int tracks, bool all_subsets,
                                                  std::uint64_t seed);

/// PIT loss of one frame; accumulates parameter gradients into `grads`
/// when it is non-null.
template <typename T>
LossReport frame_loss(const NgccModel<T>& model,
                      std::span<const std::span<const T>> channels,
                      const TdoaLabelSet& labels, int events,
                      const PitOptions& pit,
                      typename NgccModel<T>::Gradients* grads);

/// Mini-batch Adam over `frames` (already passed through
/// prepare_training_frames). Per-frame gradients are reduced in frame order,
/// so the result does not depend on the thread count. Throws NumericError
/// with diagnostics on a non-finite loss or gradient.
TrainResult train_model(NgccModel<float>& model, const std::vector<LabeledFrame>& frames,
                        const TrainConfig& config, std::uint64_t seed,
                        const std::function<void(const BatchRecord&)>& on_batch = {});

/// Finite-difference check of the full model plus PIT loss at 64-bit on one
/// frame. Pairs whose argmin assignment is tied are reported through `ties`.
GradCheckReport model_grad_check(const NgccModel<double>& model,
                                 const LabeledFrame& frame,
                                 const PitOptions& pit,
                                 const GradCheckOptions& options, int* ties = nullptr);

}  // namespace ngcc
