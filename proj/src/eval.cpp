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

#include "ngcc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>

#include "ngcc/common.hpp"
#include "ngcc/signal.hpp"

namespace ngcc {

using nlohmann::json;

TdoaPrediction decode_tracks(const TrackPosterior& post, std::optional<int> p_hint,
                             double threshold) {
  require(!p_hint || *p_hint >= 0, "decode_tracks: negative P hint");
  TdoaPrediction out(post.pairs);
  for (int p = 0; p < post.pairs; ++p) {
    std::vector<LagConfidence> cand;
    for (int k = 0; k < post.tracks; ++k) {
      const auto row = post.row(p, k);
      int best = -post.tau_max;
      for (int lag = -post.tau_max; lag <= post.tau_max; ++lag) {
        const double v = row[lag + post.tau_max], b = row[best + post.tau_max];
        if (v > b || (v == b && (std::abs(lag) < std::abs(best)))) best = lag;
      }
      const double conf = row[best + post.tau_max];
      auto it = std::find_if(cand.begin(), cand.end(), [&](const auto& c) { return c.lag == best; });
      if (it == cand.end()) cand.push_back({best, conf});
      else it->confidence = std::max(it->confidence, conf);
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (std::abs(a.lag) != std::abs(b.lag)) return std::abs(a.lag) < std::abs(b.lag);
      return a.lag < b.lag;
    });
    if (p_hint) {
      if (static_cast<int>(cand.size()) > *p_hint) cand.resize(*p_hint);
    } else {
      std::size_t keep = 1;
      while (keep < cand.size() && cand[keep].confidence >= threshold) ++keep;
      cand.resize(std::min(keep, cand.size()));
    }
    out[p] = std::move(cand);
  }
  return out;
}

json ScoreCard::to_json() const {
  return json{{"recall_at_1", recall_at_1},
              {"recall_at_0", recall_at_0},
              {"mean_abs_lag_error", mean_abs_lag_error},
              {"frames", frames},
              {"truths", truths},
              {"predictions", predictions},
              {"tolerance", tolerance}};
}

PairMatch match_lags(std::span<const int> truths, std::span<const int> preds) {
  const int nt = static_cast<int>(truths.size()), np = static_cast<int>(preds.size());
  PairMatch best;
  best.pred_for_truth.assign(nt, -1);
  best.total_error = 0;
  const int m = std::min(nt, np);
  if (m == 0) return best;
  best.total_error = std::numeric_limits<int>::max();
  // Enumerate injective maps from a subset of truths onto predictions by
  // assigning each truth a prediction index or -1, using exactly m matches.
  std::vector<int> map(nt, -1);
  std::vector<char> used(np, 0);
  auto rec = [&](auto&& self, int t, int matched, int err) -> void {
    if (t == nt) {
      if (matched == m && err < best.total_error) {
        best.total_error = err;
        best.pred_for_truth = map;
      }
      return;
    }
    if (nt - t + matched > m) {  // leaving truth t unmatched still allows m matches
      map[t] = -1;
      self(self, t + 1, matched, err);
    }
    for (int q = 0; q < np; ++q) {
      if (used[q] || matched == m) continue;
      used[q] = 1;
      map[t] = q;
      self(self, t + 1, matched + 1, err + std::abs(truths[t] - preds[q]));
      used[q] = 0;
      map[t] = -1;
    }
  };
  rec(rec, 0, 0, 0);
  return best;
}

Scorer::Scorer(int tolerance, bool keep_detail) : tolerance_(tolerance), keep_detail_(keep_detail) {
  require(tolerance >= 0, "score: tolerance must be >= 0");
}

void Scorer::add(std::size_t frame, const TdoaPrediction& pred, const TdoaLabelSet& labels) {
  require(pred.size() == labels.size(), "score: prediction and label pair counts differ");
  ++frames_;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    std::vector<int> lags;
    for (const auto& e : pred[p]) lags.push_back(e.lag);
    const PairMatch match = match_lags(labels[p], lags);
    DetailRow row{frame, static_cast<int>(p), labels[p], lags, 0, 0.0};
    for (std::size_t t = 0; t < labels[p].size(); ++t) {
      const int q = match.pred_for_truth[t];
      if (q < 0) continue;
      const int err = std::abs(labels[p][t] - lags[q]);
      ++matched_;
      err_sum_ += err;
      row.abs_err += err;
      if (err <= tolerance_) ++hit1_, ++row.matched;
      if (err == 0) ++hit0_;
    }
    truths_ += labels[p].size();
    preds_ += lags.size();
    if (keep_detail_) detail_.push_back(std::move(row));
  }
}

ScoreCard Scorer::card() const {
  ScoreCard c;
  c.tolerance = tolerance_;
  c.frames = frames_;
  c.truths = truths_;
  c.predictions = preds_;
  if (truths_ > 0) {
    c.recall_at_1 = static_cast<double>(hit1_) / truths_;
    c.recall_at_0 = static_cast<double>(hit0_) / truths_;
  }
  if (matched_ > 0) c.mean_abs_lag_error = err_sum_ / matched_;
  return c;
}

ScoreCard score(const std::vector<TdoaPrediction>& predictions,
                const std::vector<TdoaLabelSet>& labels, int tolerance,
                std::vector<DetailRow>* detail) {
  require(predictions.size() == labels.size(), "score: streams are not aligned");
  Scorer s(tolerance, detail != nullptr);
  for (std::size_t f = 0; f < labels.size(); ++f) s.add(f, predictions[f], labels[f]);
  if (detail) *detail = s.detail();
  return s.card();
}

void write_detail_csv(std::ostream& os, const std::vector<DetailRow>& rows) {
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
    return s;
  };
  os << "frame,pair,true_lags,pred_lags,matched,abs_err\n";
  for (const auto& r : rows)
    os << r.frame << ',' << r.pair << ',' << list(r.true_lags) << ',' << list(r.pred_lags) << ','
       << r.matched << ',' << r.abs_err << '\n';
}

TdoaPrediction gcc_predict(const LabeledFrame& frame, int tau_max, int k_peaks) {
  FrameSet fs;
  for (const auto& ch : frame.channels) fs.push_back(Frame{{ch.begin(), ch.end()}, 0.0});
  const auto corr = gcc_phat_all_pairs_serial(fs, tau_max);
  TdoaPrediction out(corr.size());
  for (std::size_t p = 0; p < corr.size(); ++p)
    for (const Peak& pk : top_k_peaks(corr[p], k_peaks))
      out[p].push_back({pk.lag, std::clamp(pk.value, std::numeric_limits<double>::min(), 1.0)});
  return out;
}

ScoreCard gcc_baseline(const std::vector<LabeledFrame>& frames, int tau_max, int k_peaks,
                       int tolerance, std::vector<DetailRow>* detail) {
  require(k_peaks >= 0, "gcc_baseline: negative peak count");
  std::vector<TdoaPrediction> preds(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < frames.size(); ++f) preds[f] = gcc_predict(frames[f], tau_max, k_peaks);
  std::vector<TdoaLabelSet> labels;
  for (const auto& f : frames) labels.push_back(f.labels);
  return score(preds, labels, tolerance, detail);
}

std::vector<TrackPosterior> predict_posteriors(const NgccModel<float>& model,
                                               const std::vector<LabeledFrame>& frames) {
  std::vector<TrackPosterior> out(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<std::span<const float>> ch(frames[f].channels.begin(), frames[f].channels.end());
    out[f] = model.model_forward(ch).first;
  }
  return out;
}

void write_posterior_csv(std::ostream& os, const std::vector<TrackPosterior>& posteriors,
                         std::size_t max_frames) {
  os << "frame,pair,track,lag,prob\n";
  const std::size_t n = std::min(max_frames, posteriors.size());
  char buf[64];
  for (std::size_t f = 0; f < n; ++f) {
    const auto& post = posteriors[f];
    for (int p = 0; p < post.pairs; ++p)
      for (int k = 0; k < post.tracks; ++k)
        for (int lag = -post.tau_max; lag <= post.tau_max; ++lag) {
          std::snprintf(buf, sizeof buf, "%.9g", post.at(p, k, lag));
          os << f << ',' << p << ',' << k << ',' << lag << ',' << buf << '\n';
        }
  }
}

DoaEstimate doa_least_squares(std::span<const double> tdoas, const ArrayGeometry& geometry,
                              double fs, double c) {
  const auto pairs = mic_pairs(geometry.size());
  require(tdoas.size() == pairs.size(), "doa: one TDOA per microphone pair expected");
  require(pairs.size() >= 3, "doa: need at least 3 microphone pairs");
  Eigen::MatrixXd A(pairs.size(), 3);
  Eigen::VectorXd b(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& ri = geometry.mics()[pairs[p].first];
    const auto& rj = geometry.mics()[pairs[p].second];
    for (int k = 0; k < 3; ++k) A(p, k) = fs / c * (rj[k] - ri[k]);
    b(p) = tdoas[p];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3)
    throw ContractError("doa: array baselines span only " + std::to_string(qr.rank()) +
                        " dimension(s); 3 are needed");
  const Eigen::Vector3d d = qr.solve(b);
  DoaEstimate est;
  const double norm = d.norm();
  if (!(norm > 1e-12)) {
    est.degenerate = true;
    return est;
  }
  for (int k = 0; k < 3; ++k) est.direction[k] = d(k) / norm;
  return est;
}

double angular_error_deg(const Vec3& a, const Vec3& b) {
  const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  require(na > 0 && nb > 0, "angular_error: zero vector");
  const double cosv = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
  return std::acos(std::clamp(cosv, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace ngcc
