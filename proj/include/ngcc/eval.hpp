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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngcc/dataset.hpp"
#include "ngcc/model.hpp"
#include "ngcc/scene.hpp"

namespace ngcc {

struct LagConfidence {
  int lag = 0;
  double confidence = 0.0;
};

/// Per pair, up to K decoded lags ordered by descending confidence.
using TdoaPrediction = std::vector<std::vector<LagConfidence>>;

inline constexpr double kDefaultConfidenceThreshold = 0.3;

/// Argmax per track (ties to smaller |lag|, then the negative lag), duplicate
/// lags merged keeping the highest confidence. With p_hint the top p_hint
/// lags are kept; otherwise lags with confidence >= threshold, and at least
/// the single most confident one.
TdoaPrediction decode_tracks(const TrackPosterior& posterior,
                             std::optional<int> p_hint,
                             double threshold = kDefaultConfidenceThreshold);

struct ScoreCard {
  double recall_at_1 = 0.0;  // at the configured tolerance
  double recall_at_0 = 0.0;
  double mean_abs_lag_error = 0.0;  // over matched truths
  std::size_t frames = 0;
  std::size_t truths = 0;
  std::size_t predictions = 0;
  int tolerance = 1;

  nlohmann::json to_json() const;
};

struct PairMatch {
  /// pred_for_truth[t] = index into preds, or -1 when unmatched.
  std::vector<int> pred_for_truth;
  int total_error = 0;
};

/// Minimum-total-|error| one-to-one matching of min(#truths, #preds) pairs,
/// found by exhaustive search. Ties go to the lexicographically first
/// truth -> prediction map.
PairMatch match_lags(std::span<const int> truths, std::span<const int> preds);

struct DetailRow {
  std::size_t frame = 0;
  int pair = 0;
  std::vector<int> true_lags, pred_lags;
  int matched = 0;     // truths matched within tolerance
  double abs_err = 0;  // summed |error| over matched truths
};

/// Streams frames into a ScoreCard and optional per-pair detail rows.
class Scorer {
 public:
  explicit Scorer(int tolerance = 1, bool keep_detail = false);
  void add(std::size_t frame, const TdoaPrediction& prediction, const TdoaLabelSet& labels);
  ScoreCard card() const;
  const std::vector<DetailRow>& detail() const { return detail_; }

 private:
  int tolerance_;
  bool keep_detail_;
  std::size_t frames_ = 0, truths_ = 0, preds_ = 0, hit1_ = 0, hit0_ = 0, matched_ = 0;
  double err_sum_ = 0.0;
  std::vector<DetailRow> detail_;
};

ScoreCard score(const std::vector<TdoaPrediction>& predictions,
                const std::vector<TdoaLabelSet>& labels, int tolerance = 1,
                std::vector<DetailRow>* detail = nullptr);

/// `frame,pair,true_lags,pred_lags,matched,abs_err` with ';'-separated lag lists.
void write_detail_csv(std::ostream& os, const std::vector<DetailRow>& rows);

/// Plain GCC-PHAT peak picking for one frame.
TdoaPrediction gcc_predict(const LabeledFrame& frame, int tau_max, int k_peaks);

ScoreCard gcc_baseline(const std::vector<LabeledFrame>& frames, int tau_max, int k_peaks,
                       int tolerance = 1, std::vector<DetailRow>* detail = nullptr);

/// Model posteriors for every frame, parallel over frames.
std::vector<TrackPosterior> predict_posteriors(const NgccModel<float>& model,
                                               const std::vector<LabeledFrame>& frames);

/// `frame,pair,track,lag,prob` rows (header included).
void write_posterior_csv(std::ostream& os, const std::vector<TrackPosterior>& posteriors,
                         std::size_t max_frames);

struct DoaEstimate {
  Vec3 direction{};       // unit vector, zero when degenerate
  bool degenerate = false;
};

/// Far-field least squares: tau_ij ~ (fs / c) (r_j - r_i) . d.
/// Throws ContractError when the array baselines do not span 3-D.
DoaEstimate doa_least_squares(std::span<const double> tdoas, const ArrayGeometry& geometry,
                              double fs, double c = kSpeedOfSound);

/// Angle between two directions in degrees.
double angular_error_deg(const Vec3& a, const Vec3& b);

}  // namespace ngcc
