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
#include <span>
#include <vector>

#include "ngcc/model.hpp"
#include "ngcc/scene.hpp"

namespace ngcc {

/// Track -> event maps of length K, in lexicographic order over [0, P)^K.
/// P <= K: every surjective map (each event used at least once).
/// P > K: every injective map (all K-subsets in all orders).
struct AssignmentSet {
  int events = 0;
  int tracks = 0;
  std::vector<std::vector<int>> maps;

  std::size_t size() const { return maps.size(); }
};

/// P = 0 gives an empty set.
AssignmentSet assignment_set(int events, int tracks);

/// -(1/K) sum_k log p_k(labels[assignment[k]]) for one pair.
/// log_probs is [K][2*tau_max+1].
double assignment_loss(std::span<const double> log_probs, int tau_max,
                       std::span<const int> labels,
                       std::span<const int> assignment);
double assignment_loss(const TrackPosterior& posterior, int pair,
                       std::span<const int> labels,
                       std::span<const int> assignment);

struct PitOptions {
  /// One assignment shared by every pair of the frame instead of a
  /// per-pair minimum.
  bool global_assignment = false;
};

struct LossReport {
  double total = 0.0;               // mean of per_pair over used frames
  std::vector<double> per_pair;     // summed over used frames, then averaged
  std::vector<int> chosen_assignment;  // per pair, last frame only
  std::size_t frames_used = 0;
  std::size_t frames_discarded = 0;

  /// Folds another report in, weighting by frames_used.
  void merge(const LossReport& other);
};

/// Loss of one frame from log-probabilities [pair][K][lags]. When
/// grad_logits is non-empty it receives d(loss)/d(logits) for the chosen
/// assignments (overwritten). P = 0 yields a discarded report and zero
/// gradient.
template <typename T>
LossReport pit_frame_loss(std::span<const T> log_probs, int pairs, int tracks,
                          int tau_max, const TdoaLabelSet& labels, int events,
                          const PitOptions& options, std::span<T> grad_logits);

/// Same on a posterior (probabilities are logged here).
LossReport pit_loss(const TrackPosterior& posterior, const TdoaLabelSet& labels,
                    int events, const PitOptions& options = {});

/// Number of chosen assignments that were tied with another; the
/// subgradient is not unique there.
int count_ties(std::span<const double> log_probs, int pairs, int tracks,
               int tau_max, const TdoaLabelSet& labels, int events,
               double margin = 1e-9);

}  // namespace ngcc
