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

#include "ngcc/pit.hpp"

#include <cmath>
#include <limits>

#include "ngcc/autodiff.hpp"
#include "ngcc/common.hpp"

namespace ngcc {

AssignmentSet assignment_set(int events, int tracks) {
  require(events >= 0, "assignment_set: negative event count");
  require(tracks >= 1, "assignment_set: need at least one track");
  AssignmentSet set{events, tracks, {}};
  if (events == 0) return set;
  std::vector<int> map(tracks, 0);
  std::vector<int> used(events);
  for (;;) {
    std::fill(used.begin(), used.end(), 0);
    for (int e : map) ++used[e];
    bool keep = true;
    for (int e = 0; e < events; ++e) {
      if (events <= tracks && used[e] == 0) keep = false;
      if (events > tracks && used[e] > 1) keep = false;
    }
    if (keep) set.maps.push_back(map);
    int k = tracks - 1;
    while (k >= 0 && ++map[k] == events) map[k--] = 0;
    if (k < 0) break;
  }
  return set;
}

double assignment_loss(std::span<const double> log_probs, int tau_max,
                       std::span<const int> labels,
                       std::span<const int> assignment) {
  const int lags = 2 * tau_max + 1;
  const int K = static_cast<int>(assignment.size());
  require(!labels.empty(), "assignment_loss: no labels");
  require(K >= 1 && log_probs.size() == static_cast<std::size_t>(K) * lags,
          "assignment_loss: log_probs must be [K, 2*tau_max+1]");
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const int e = assignment[k];
    require(e >= 0 && e < static_cast<int>(labels.size()), "assignment_loss: bad event index");
    require(std::abs(labels[e]) <= tau_max, "assignment_loss: label outside lag range");
    sum += log_probs[static_cast<std::size_t>(k) * lags + labels[e] + tau_max];
  }
  return -sum / K;
}

double assignment_loss(const TrackPosterior& posterior, int pair,
                       std::span<const int> labels,
                       std::span<const int> assignment) {
  const int lags = posterior.lags();
  std::vector<double> logp(static_cast<std::size_t>(posterior.tracks) * lags);
  for (int k = 0; k < posterior.tracks; ++k) {
    const auto row = posterior.row(pair, k);
    for (int l = 0; l < lags; ++l) logp[k * lags + l] = std::log(row[l]);
  }
  return assignment_loss(logp, posterior.tau_max, labels, assignment);
}

void LossReport::merge(const LossReport& o) {
  const std::size_t n = frames_used + o.frames_used;
  if (o.frames_used > 0) {
    if (per_pair.empty()) per_pair.assign(o.per_pair.size(), 0.0);
    require(per_pair.size() == o.per_pair.size(), "LossReport: pair count mismatch");
    const double a = static_cast<double>(frames_used) / n;
    const double b = static_cast<double>(o.frames_used) / n;
    for (std::size_t p = 0; p < per_pair.size(); ++p)
      per_pair[p] = a * per_pair[p] + b * o.per_pair[p];
    total = a * total + b * o.total;
    chosen_assignment = o.chosen_assignment;
  }
  frames_used = n;
  frames_discarded += o.frames_discarded;
}

namespace {

void check_labels(const TdoaLabelSet& labels, int pairs, int events, int tau_max) {
  require(static_cast<int>(labels.size()) == pairs, "pit: label pair count mismatch");
  for (const auto& row : labels) {
    require(static_cast<int>(row.size()) == events, "pit: label count differs from P");
    for (int lag : row) require(std::abs(lag) <= tau_max, "pit: label outside lag range");
  }
}

// losses[p * A + a] for every pair and assignment.
template <typename T>
std::vector<double> all_losses(std::span<const T> log_probs, int pairs, int tracks,
                               int tau_max, const TdoaLabelSet& labels,
                               const AssignmentSet& set) {
  const int lags = 2 * tau_max + 1;
  const std::size_t A = set.size();
  std::vector<double> out(pairs * A);
  for (int p = 0; p < pairs; ++p) {
    const T* lp = log_probs.data() + static_cast<std::size_t>(p) * tracks * lags;
    for (std::size_t a = 0; a < A; ++a) {
      double sum = 0.0;
      for (int k = 0; k < tracks; ++k)
        sum += static_cast<double>(lp[k * lags + labels[p][set.maps[a][k]] + tau_max]);
      out[p * A + a] = -sum / tracks;
    }
  }
  return out;
}

}  // namespace

template <typename T>
LossReport pit_frame_loss(std::span<const T> log_probs, int pairs, int tracks,
                          int tau_max, const TdoaLabelSet& labels, int events,
                          const PitOptions& options, std::span<T> grad_logits) {
  const int lags = 2 * tau_max + 1;
  const std::size_t n = static_cast<std::size_t>(pairs) * tracks * lags;
  require(log_probs.size() == n, "pit: log_probs must be [pairs, K, lags]");
  require(grad_logits.empty() || grad_logits.size() == n, "pit: gradient shape mismatch");
  if (!grad_logits.empty()) std::fill(grad_logits.begin(), grad_logits.end(), T(0));

  LossReport r;
  if (events == 0) {
    r.frames_discarded = 1;
    return r;
  }
  check_labels(labels, pairs, events, tau_max);
  const AssignmentSet set = assignment_set(events, tracks);
  const std::size_t A = set.size();
  const std::vector<double> losses = all_losses(log_probs, pairs, tracks, tau_max, labels, set);

  r.per_pair.assign(pairs, 0.0);
  r.chosen_assignment.assign(pairs, 0);
  if (options.global_assignment) {
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      double s = 0.0;
      for (int p = 0; p < pairs; ++p) s += losses[p * A + a];
      if (s < best_sum) best_sum = s, best = a;
    }
    for (int p = 0; p < pairs; ++p) r.chosen_assignment[p] = static_cast<int>(best);
  } else {
    for (int p = 0; p < pairs; ++p) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < A; ++a)
        if (losses[p * A + a] < losses[p * A + best]) best = a;
      r.chosen_assignment[p] = static_cast<int>(best);
    }
  }
  double total = 0.0;
  for (int p = 0; p < pairs; ++p) {
    r.per_pair[p] = losses[p * A + r.chosen_assignment[p]];
    total += r.per_pair[p];
  }
  r.total = total / pairs;
  r.frames_used = 1;

  if (!grad_logits.empty()) {
    const T scale = T(1.0 / (static_cast<double>(pairs) * tracks));
    for (int p = 0; p < pairs; ++p) {
      const auto& map = set.maps[r.chosen_assignment[p]];
      for (int k = 0; k < tracks; ++k) {
        const std::size_t off = (static_cast<std::size_t>(p) * tracks + k) * lags;
        const int target = labels[p][map[k]] + tau_max;
        for (int l = 0; l < lags; ++l)
          grad_logits[off + l] =
              scale * (std::exp(log_probs[off + l]) - (l == target ? T(1) : T(0)));
      }
    }
  }
  return r;
}

LossReport pit_loss(const TrackPosterior& posterior, const TdoaLabelSet& labels,
                    int events, const PitOptions& options) {
  std::vector<double> logp(posterior.probs.size());
  for (std::size_t i = 0; i < logp.size(); ++i) logp[i] = std::log(posterior.probs[i]);
  return pit_frame_loss<double>(logp, posterior.pairs, posterior.tracks, posterior.tau_max,
                                labels, events, options, {});
}

int count_ties(std::span<const double> log_probs, int pairs, int tracks, int tau_max,
               const TdoaLabelSet& labels, int events, double margin) {
  if (events == 0) return 0;
  check_labels(labels, pairs, events, tau_max);
  const AssignmentSet set = assignment_set(events, tracks);
  const std::size_t A = set.size();
  const std::vector<double> losses = all_losses(log_probs, pairs, tracks, tau_max, labels, set);
  int ties = 0;
  for (int p = 0; p < pairs; ++p) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < A; ++a)
      if (losses[p * A + a] < losses[p * A + best]) best = a;
    // Maps that reach the same targets (two events on one lag) share the
    // gradient and do not count.
    for (std::size_t a = 0; a < A; ++a) {
      if (a == best || losses[p * A + a] - losses[p * A + best] > margin) continue;
      bool same = true;
      for (int k = 0; k < tracks; ++k)
        same = same && labels[p][set.maps[a][k]] == labels[p][set.maps[best][k]];
      if (!same) {
        ++ties;
        break;
      }
    }
  }
  return ties;
}

template LossReport pit_frame_loss<float>(std::span<const float>, int, int, int,
                                          const TdoaLabelSet&, int, const PitOptions&,
                                          std::span<float>);
template LossReport pit_frame_loss<double>(std::span<const double>, int, int, int,
                                           const TdoaLabelSet&, int, const PitOptions&,
                                           std::span<double>);

}  // namespace ngcc
