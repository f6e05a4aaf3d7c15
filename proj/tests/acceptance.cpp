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

// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is zero only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ngcc/autodiff.hpp"
#include "ngcc/cli.hpp"
#include "ngcc/config.hpp"
#include "ngcc/dataset.hpp"
#include "ngcc/eval.hpp"
#include "ngcc/model.hpp"
#include "ngcc/pit.hpp"
#include "ngcc/signal.hpp"
#include "ngcc/train.hpp"

using namespace ngcc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Learning-outcome experiment, shared by criteria 8 and 9.
const char* kLearningConfig = R"({
  "seed": 7,
  "dataset": {
    "frames": 12000,
    "polyphony": [0.0, 1.0, 3.0],
    "waveform": {"family": "mixed"},
    "snr_db": [5, 25],
    "room": {"enabled": true, "reflection": [0.2, 0.7], "max_order": 2}
  },
  "test_dataset": {"frames": 1000, "polyphony": [0.0, 0.0, 1.0]},
  "train": {"batch_size": 1, "lr": 0.001, "epochs": 1}
})";

// Small pipeline for the determinism check.
const char* kDeterminismConfig = R"({
  "seed": 11,
  "output_dir": "run",
  "dataset": {"frames": 200, "polyphony": [0.1, 0.5, 0.4]},
  "test_dataset": {"frames": 50},
  "train": {"batch_size": 8}
})";

struct LearningRun {
  bool done = false;
  ExperimentConfig cfg;
  std::vector<LabeledFrame> test;
  std::vector<TrackPosterior> posteriors;
  std::unique_ptr<NgccModel<float>> model;
};

LearningRun g_learning;

// ---------------------------------------------------------------------------

Outcome c1_geometry() {
  const auto t0 = Clock::now();
  const auto g = tetrahedral_array(0.084);
  const int tau = max_tdoa(g, 24000.0, 343.0);
  const double lookup = seconds_since(t0);
  ModelConfig mc;
  mc.tau_max = tau;
  NgccModel<float> model(mc);
  std::vector<std::vector<float>> frame(4, std::vector<float>(480, 0.0f));
  for (int m = 0; m < 4; ++m) frame[m][m * 7] = 1.0f;
  std::vector<std::span<const float>> ch(frame.begin(), frame.end());
  const TdoaFeature f = model.model_forward(ch).second;
  const bool ok = tau == 6 && f.channels == 16 && f.pairs == 6 && f.lags == 13 &&
                  f.values.size() == 16u * 6 * 13 && lookup < 1e-3;
  return {ok, "tau_max = " + std::to_string(tau) + " in " + fmt("%.3f", lookup * 1e3) +
                  " ms, feature shape [" + std::to_string(f.channels) + ", " + std::to_string(f.pairs) +
                  ", " + std::to_string(f.lags) + "]"};
}

Outcome c2_gcc_oracle() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(480), b(480);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const auto fast = gcc_phat(a, b, 6), slow = gcc_phat_direct(a, b, 6);
    for (std::size_t i = 0; i < fast.values.size(); ++i)
      worst = std::max(worst, std::abs(fast.values[i] - slow.values[i]));
  }
  return {worst < 1e-9, "max |fft - direct| = " + fmt("%.3g", worst) + " over 100 frames"};
}

Outcome c3_baseline() {
  const auto spec = parse_dataset_spec(
      {{"frames", 1000}, {"polyphony", {0, 1}}, {"snr_db", {20, 20}}, {"room", {{"enabled", false}}}});
  const auto frames = sample_dataset(spec, 3);
  const auto card = gcc_baseline(frames, spec.tau_max(), 1, 1);
  return {card.recall_at_0 >= 0.95 && card.frames >= 1000,
          "recall_at_0 = " + fmt("%.4f", card.recall_at_0) + " over " + std::to_string(card.frames) +
              " frames (recall_at_1 " + fmt("%.4f", card.recall_at_1) + ")"};
}

Outcome c4_gradient() {
  const auto spec = parse_dataset_spec({{"frames", 64}, {"polyphony", {0, 1, 1, 1}}});
  ModelConfig mc;
  mc.init_seed = 4;
  const NgccModel<double> model(mc);
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  opt.seed = 4;
  std::set<int> covered;
  double worst = 0;
  std::string layer;
  for (std::uint64_t i = 0; i < 64 && covered.size() < 3; ++i) {
    const LabeledFrame f = generate_frame(spec, 4, i);
    if (f.num_sources == 0 || covered.count(f.num_sources)) continue;
    int ties = -1;
    const auto r = model_grad_check(model, f, {}, opt, &ties);
    if (ties != 0) continue;
    covered.insert(f.num_sources);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      for (const auto& l : r.layers)
        if (l.max_rel_error == r.max_rel_error) layer = l.name;
    }
  }
  return {covered.size() == 3 && worst < 1e-4,
          "max relative error " + fmt("%.3g", worst) + " (" + layer + ") over frames with P = 1, 2, 3"};
}

double oracle_pair(const std::vector<double>& logp, int K, int lags, int tau, const std::vector<int>& labels) {
  const int P = static_cast<int>(labels.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> map(K);
  long total = 1;
  for (int k = 0; k < K; ++k) total *= P;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int k = 0; k < K; ++k, c /= P) map[k] = static_cast<int>(c % P);
    const std::set<int> used(map.begin(), map.end());
    if (static_cast<int>(used.size()) != std::min(P, K)) continue;
    double s = 0;
    for (int k = 0; k < K; ++k) s += logp[k * lags + labels[map[k]] + tau];
    best = std::min(best, -s / K);
  }
  return best;
}

Outcome c5_pit_oracle() {
  const int K = 3, tau = 6, lags = 13;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 2);
  std::uniform_int_distribution<int> lag(-tau, tau);
  double worst = 0;
  bool invariant = true;
  for (int t = 0; t < 200; ++t) {
    const int P = 1 + t % 3;
    std::vector<double> logits(K * lags), logp(K * lags);
    for (auto& x : logits) x = n(rng);
    log_softmax_rows<double>(logits, K, lags, logp);
    std::vector<int> labels(P);
    for (auto& l : labels) l = lag(rng);
    TrackPosterior post{1, K, tau, {}};
    for (double v : logp) post.probs.push_back(std::exp(v));
    const double got = pit_loss(post, {labels}, P).total;
    worst = std::max(worst, std::abs(got - oracle_pair(logp, K, lags, tau, labels)));
    std::vector<int> perm = labels;
    std::sort(perm.begin(), perm.end());
    do {
      invariant = invariant && pit_loss(post, {perm}, P).total == got;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return {worst < 1e-10 && invariant, "max |pit - oracle| = " + fmt("%.3g", worst) +
                                          ", label order " + (invariant ? "invariant" : "NOT invariant")};
}

Outcome c6_counts() {
  const std::size_t a = assignment_set(3, 3).size(), b = assignment_set(2, 3).size(),
                    c = assignment_set(1, 3).size();
  return {a == 6 && b == 6 && c == 1, "counts " + std::to_string(a) + ", " + std::to_string(b) + ", " +
                                          std::to_string(c) + " for P = 3, 2, 1"};
}

Outcome c7_shift() {
  ModelConfig mc;
  mc.init_seed = 7;
  const NgccModel<double> model(mc);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<int> shift_dist(1, 479);
  int exact = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(480), xs(480);
    for (auto& v : x) v = n(rng);
    const int s = shift_dist(rng);
    for (int i = 0; i < 480; ++i) xs[(i + s) % 480] = x[i];
    const auto y = model.filterbank_forward(x), ys = model.filterbank_forward(xs);
    bool same = true;
    for (int l = 0; l < mc.filters && same; ++l)
      for (int i = 0; i < 480; ++i)
        if (ys[l * 480 + (i + s) % 480] != y[l * 480 + i]) {
          same = false;
          break;
        }
    exact += same;
  }
  return {exact == 50, std::to_string(exact) + "/50 shifted inputs bit-identical"};
}

Outcome c8_learning() {
  auto& L = g_learning;
  L.cfg = parse_experiment_config(json::parse(kLearningConfig));
  const auto t_sim = Clock::now();
  auto train = prepare_training_frames(sample_dataset(L.cfg.dataset, L.cfg.train_seed()),
                                       L.cfg.model.tracks, L.cfg.train.all_subsets, L.cfg.train_seed());
  L.test = sample_dataset(L.cfg.test_dataset, L.cfg.test_seed());
  const double sim_s = seconds_since(t_sim);

  const auto t0 = Clock::now();
  L.model = std::make_unique<NgccModel<float>>(L.cfg.model);
  const TrainResult tr = train_model(*L.model, train, L.cfg.train, L.cfg.train_seed());
  L.posteriors = predict_posteriors(*L.model, L.test);
  Scorer model_score(1);
  for (std::size_t f = 0; f < L.test.size(); ++f)
    model_score.add(f, decode_tracks(L.posteriors[f], L.test[f].num_sources), L.test[f].labels);
  const ScoreCard base = gcc_baseline(L.test, L.cfg.model.tau_max, 2, 1);
  const double run_s = seconds_since(t0);
  L.done = true;

  const ScoreCard m = model_score.card();
  const double margin = (m.recall_at_1 - base.recall_at_1) * 100.0;
  std::ostringstream os;
  os << "model recall_at_1 " << fmt("%.4f", m.recall_at_1) << " vs top-2 GCC-PHAT "
     << fmt("%.4f", base.recall_at_1) << " (" << fmt("%+.2f", margin) << " pp) on "
     << m.frames << " two-source frames; " << train.size() << " train frames, " << tr.steps
     << " steps, loss " << fmt("%.3f", tr.initial_running_loss) << " -> "
     << fmt("%.3f", tr.final_running_loss) << "; train+eval " << fmt("%.0f", run_s)
     << " s (simulation " << fmt("%.0f", sim_s) << " s)";
  return {margin >= 5.0 && run_s <= 600.0, os.str()};
}

Outcome c9_tracks() {
  auto& L = g_learning;
  if (!L.done) return {false, "needs the criterion 8 model (run it first)"};
  auto separated = [](const LabeledFrame& f) {
    if (f.num_sources != 2) return false;
    for (const auto& row : f.labels)
      if (std::abs(row[0] - row[1]) < 3) return false;
    return true;
  };
  auto pairs_hit = [](const TrackPosterior& post, const TdoaLabelSet& labels) {
    int hits = 0;
    for (int p = 0; p < post.pairs; ++p) {
      std::vector<int> top(post.tracks);
      for (int k = 0; k < post.tracks; ++k) {
        const auto row = post.row(p, k);
        top[k] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()) - post.tau_max;
      }
      bool ok = false;
      for (int a = 0; a < post.tracks; ++a)
        for (int b = 0; b < post.tracks; ++b)
          ok = ok || (a != b && std::abs(top[a] - labels[p][0]) <= 1 &&
                      std::abs(top[b] - labels[p][1]) <= 1);
      hits += ok;
    }
    return hits;
  };
  std::size_t first = L.test.size();
  int eligible = 0, passing = 0;
  for (std::size_t f = 0; f < L.test.size(); ++f) {
    if (!separated(L.test[f])) continue;
    if (first == L.test.size()) first = f;
    ++eligible;
    passing += pairs_hit(L.posteriors[f], L.test[f].labels) >= 4;
  }
  if (first == L.test.size()) return {false, "no test frame with TDOAs >= 3 lags apart on every pair"};
  const int hits = pairs_hit(L.posteriors[first], L.test[first].labels);
  return {hits >= 4, "test frame " + std::to_string(first) + ": " + std::to_string(hits) +
                         "/6 pairs with both truths on distinct tracks (" + std::to_string(passing) + "/" +
                         std::to_string(eligible) + " separated frames reach 4)"};
}

Outcome c10_determinism(const fs::path& work) {
  const fs::path root = work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  std::ofstream(cfg) << kDeterminismConfig;
  auto cli = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "ngcc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };
  for (const char* run : {"a", "b"}) {
    const std::string out = (root / run).string();
    const std::string threads = std::string(run) == "a" ? "1" : "2";
    for (const char* cmd : {"simulate", "train", "eval"})
      if (int rc = cli({cmd, "-c", cfg.string(), "-o", out, "--threads", threads}); rc != 0)
        return {false, std::string(cmd) + " exited with " + std::to_string(rc)};
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::vector<std::string> differing;
  for (const char* file : {"checkpoint.bin", "checkpoint.json", "eval/scorecard.json"})
    if (slurp(root / "a" / file) != slurp(root / "b" / file) || slurp(root / "a" / file).empty())
      differing.push_back(file);
  return {differing.empty(), differing.empty()
                                 ? "checkpoint.bin, checkpoint.json, eval/scorecard.json identical "
                                   "across two runs (1 vs 2 threads)"
                                 : "differs: " + differing.front()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  setenv("NGCC_VERBOSE", "0", 0);
  fs::create_directories(work);

  const std::vector<std::pair<double, std::function<Outcome()>>> criteria{
      {std::numeric_limits<double>::infinity(), c1_geometry},  // lookup timed inside
      {10, c2_gcc_oracle},
      {60, c3_baseline},
      {120, c4_gradient},
      {30, c5_pit_oracle},
      {1, c6_counts},
      {30, c7_shift},
      {std::numeric_limits<double>::infinity(), c8_learning},  // budget checked inside
      {60, c9_tracks},
      {900, [&] { return c10_determinism(work); }},
  };
  json summary = json::array();
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    if (s > criteria[i].first) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", criteria[i].first) + " s budget";
    }
    all = all && o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt("%.1f", s) << " s]" << std::endl;
    summary.push_back({{"criterion", id}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", s}});
  }
  std::ofstream(fs::path(work) / "acceptance.json") << summary.dump(2) << '\n';
  return all ? 0 : 1;
}
