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

#include "ngcc/cli.hpp"

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ngcc/binary_io.hpp"
#include "ngcc/checkpoint.hpp"
#include "ngcc/common.hpp"
#include "ngcc/config.hpp"
#include "ngcc/dataset.hpp"
#include "ngcc/eval.hpp"
#include "ngcc/model.hpp"
#include "ngcc/train.hpp"

namespace ngcc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int verbosity() {
  const char* v = std::getenv("NGCC_VERBOSE");
  return v ? std::atoi(v) : 1;
}

void info(const std::string& msg) {
  if (verbosity() >= 1) std::cerr << msg << '\n';
}

struct Common {
  std::string config;
  std::string out;
  int threads = 0;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_experiment_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.threads > 0) omp_set_num_threads(c.threads);
  fs::create_directories(cfg.output_dir);
  return cfg;
}

void echo_config(const ExperimentConfig& cfg, const std::string& command, const json& extra) {
  json j = cfg.to_json();
  j["command"] = command;
  j["config_hash"] = cfg.hash();
  j["options"] = extra;
  io::write_file(cfg.output_dir / (command + ".config.json"), j.dump(2) + "\n");
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

fs::path default_checkpoint(const ExperimentConfig& cfg) { return cfg.output_dir / "checkpoint.bin"; }

// ---------------------------------------------------------------------------

void cmd_simulate(const Common& common) {
  const ExperimentConfig cfg = load(common);
  echo_config(cfg, "simulate", json::object());
  for (const auto& [name, spec, seed] :
       {std::tuple{"train", cfg.dataset, cfg.train_seed()},
        std::tuple{"test", cfg.test_dataset, cfg.test_seed()}}) {
    info(std::string("simulate: ") + name + " set, " + std::to_string(spec.frames) + " frames");
    const auto frames = sample_dataset(spec, seed);
    write_dataset(cfg.output_dir / name, spec, seed, frames);
  }
}

struct TrainOptions {
  int epochs = 0;
  bool grad_check = false;
};

GradCheckReport run_grad_check(const ExperimentConfig& cfg, const NgccModel<double>& model,
                               int* ties_out) {
  // First frame with events and a unique argmin at the current weights.
  GradCheckOptions opt;
  opt.seed = derive_seed(cfg.seed, 0x9c0ULL);
  for (std::uint64_t i = 0; i < 64; ++i) {
    LabeledFrame f = generate_frame(cfg.dataset, cfg.train_seed(), i);
    if (f.num_sources == 0) continue;
    f = prepare_training_frames({f}, cfg.model.tracks, cfg.train.all_subsets, cfg.train_seed())[0];
    int ties = 0;
    GradCheckReport r = model_grad_check(model, f, cfg.train.pit, opt, &ties);
    if (ties == 0) {
      if (ties_out) *ties_out = 0;
      return r;
    }
  }
  throw NumericError("gradcheck: no frame with a unique argmin assignment among the first 64");
}

json report_json(const GradCheckReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"name", l.name}, {"checked", l.checked}, {"max_rel_error", l.max_rel_error},
                      {"max_abs_analytic", l.max_abs_analytic}, {"refined", l.refined}});
  return json{{"passed", r.passed},
              {"max_rel_error", r.max_rel_error},
              {"tolerance", r.tolerance},
              {"failing_layer", r.failing_layer},
              {"layers", layers}};
}

void cmd_train(const Common& common, const TrainOptions& opt) {
  ExperimentConfig cfg = load(common);
  if (opt.epochs > 0) cfg.train.epochs = opt.epochs;
  echo_config(cfg, "train", {{"epochs", cfg.train.epochs}, {"grad_check", opt.grad_check}});

  const fs::path data_dir = cfg.output_dir / "train";
  if (!fs::exists(data_dir / "manifest.json"))
    throw ConfigError("train: no dataset at " + data_dir.string() + " (run simulate first)");
  LoadedDataset data = read_dataset(data_dir);
  const std::string fe = data.manifest.value("frontend_hash", "");
  if (fe != frontend_hash(cfg.dataset))
    throw IncompatibleError("train: dataset front end " + fe + " does not match the config");

  NgccModel<float> model(cfg.model);
  if (opt.grad_check) {
    NgccModel<double> m64(cfg.model);
    m64.assign_from(model);
    const GradCheckReport r = run_grad_check(cfg, m64, nullptr);
    write_json(cfg.output_dir / "gradcheck.json", report_json(r));
    if (!r.passed)
      throw NumericError("gradcheck failed in " + r.failing_layer +
                         ": max relative error " + std::to_string(r.max_rel_error));
    info("train: gradient check passed, max relative error " + std::to_string(r.max_rel_error));
  }

  const auto frames = prepare_training_frames(std::move(data.frames), cfg.model.tracks,
                                              cfg.train.all_subsets, cfg.train_seed());
  std::ofstream log(cfg.output_dir / "train_log.jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train_model(model, frames, cfg.train, cfg.train_seed(),
                                         [&](const BatchRecord& rec) {
                                           log << rec.to_json().dump() << '\n';
                                           if (verbosity() >= 2)
                                             std::cerr << "step " << rec.step << " loss "
                                                       << rec.loss << '\n';
                                         });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  CheckpointInfo ck;
  ck.frontend_hash = frontend_hash(cfg.dataset);
  ck.config_hash = cfg.hash();
  ck.seed = cfg.seed;
  ck.step = result.steps;
  ck.frames_seen = result.overall.frames_used;
  save_checkpoint(default_checkpoint(cfg), model, ck);
  write_json(cfg.output_dir / "train_summary.json",
             {{"steps", result.steps},
              {"epochs", cfg.train.epochs},
              {"frames_used", result.overall.frames_used},
              {"frames_discarded", result.overall.frames_discarded},
              {"mean_loss", result.overall.total},
              {"initial_running_loss", result.initial_running_loss},
              {"final_running_loss", result.final_running_loss},
              {"seconds", seconds}});
  info("train: " + std::to_string(result.steps) + " steps, loss " +
       std::to_string(result.initial_running_loss) + " -> " +
       std::to_string(result.final_running_loss) + ", " +
       std::to_string(result.overall.frames_discarded) + " frames discarded (P = 0)");
}

struct EvalOptions {
  std::string checkpoint;
  std::string dataset;
  long dump_posteriors = -1;
  bool force = false;
};

json doa_summary(const std::vector<LabeledFrame>& frames, const std::vector<TdoaPrediction>& model,
                 const std::vector<TdoaPrediction>& baseline, const ArrayGeometry& geometry,
                 double fs, double c) {
  const double near_field = 10.0 * geometry.aperture();
  double sum_model = 0, sum_base = 0;
  std::size_t n_model = 0, n_base = 0, excluded = 0, degenerate = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].num_sources != 1) continue;
    const Vec3& s = frames[f].source_positions[0];
    if (std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]) < near_field) {
      ++excluded;
      continue;
    }
    auto one = [&](const TdoaPrediction& pred, double& sum, std::size_t& n) {
      std::vector<double> tau;
      for (const auto& pair : pred) {
        if (pair.empty()) return;
        tau.push_back(pair.front().lag);
      }
      const DoaEstimate est = doa_least_squares(tau, geometry, fs, c);
      if (est.degenerate) {
        ++degenerate;
        return;
      }
      sum += angular_error_deg(est.direction, s);
      ++n;
    };
    one(model[f], sum_model, n_model);
    one(baseline[f], sum_base, n_base);
  }
  return json{{"single_source_frames", n_model},
              {"model_mean_error_deg", n_model ? sum_model / n_model : 0.0},
              {"baseline_mean_error_deg", n_base ? sum_base / n_base : 0.0},
              {"near_field_excluded", excluded},
              {"degenerate", degenerate}};
}

void cmd_eval(const Common& common, const EvalOptions& opt) {
  const ExperimentConfig cfg = load(common);
  echo_config(cfg, "eval", {{"checkpoint", opt.checkpoint}, {"dataset", opt.dataset},
                            {"dump_posteriors", opt.dump_posteriors}, {"force", opt.force}});
  const fs::path ck_path = opt.checkpoint.empty() ? default_checkpoint(cfg) : fs::path(opt.checkpoint);
  const fs::path data_dir = opt.dataset.empty() ? cfg.output_dir / "test" : fs::path(opt.dataset);
  if (!fs::exists(ck_path)) throw ConfigError("eval: checkpoint not found: " + ck_path.string());
  if (!fs::exists(data_dir / "manifest.json"))
    throw ConfigError("eval: no dataset at " + data_dir.string());

  CheckpointInfo ck;
  const NgccModel<float> model = load_checkpoint<float>(ck_path, &ck);
  const LoadedDataset data = read_dataset(data_dir);
  const std::string fe = data.manifest.value("frontend_hash", "");
  if (fe != ck.frontend_hash && !opt.force)
    throw IncompatibleError("eval: checkpoint front end " + ck.frontend_hash +
                            " does not match dataset " + fe + " (use --force to override)");
  const ModelConfig& mc = model.config();
  if (data.manifest.value("num_mics", 0) != mc.num_mics || data.manifest.value("tau_max", 0) != mc.tau_max ||
      data.manifest.value("window", std::size_t{0}) != static_cast<std::size_t>(mc.window))
    throw IncompatibleError("eval: dataset layout does not fit the checkpoint's model");

  const auto& frames = data.frames;
  const DatasetSpec spec = parse_dataset_spec(data.manifest.at("spec"));
  const auto posteriors = predict_posteriors(model, frames);

  const int tol = cfg.eval.tolerance;
  Scorer oracle(tol, true), threshold(tol), base(tol, true), base_oracle(tol);
  std::map<int, std::pair<Scorer, Scorer>> by_p;
  std::vector<TdoaPrediction> model_top1, base_top1;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const int P = frames[f].num_sources;
    const TdoaPrediction pm = decode_tracks(posteriors[f], P);
    const TdoaPrediction pb = gcc_predict(frames[f], mc.tau_max, cfg.eval.baseline_peaks);
    oracle.add(f, pm, frames[f].labels);
    threshold.add(f, decode_tracks(posteriors[f], std::nullopt, cfg.eval.threshold), frames[f].labels);
    base.add(f, pb, frames[f].labels);
    base_oracle.add(f, gcc_predict(frames[f], mc.tau_max, P), frames[f].labels);
    auto it = by_p.try_emplace(P, Scorer(tol), Scorer(tol)).first;
    it->second.first.add(f, pm, frames[f].labels);
    it->second.second.add(f, pb, frames[f].labels);
    model_top1.push_back(decode_tracks(posteriors[f], 1));
    base_top1.push_back(gcc_predict(frames[f], mc.tau_max, 1));
  }
  json polyphony = json::object();
  for (const auto& [P, s] : by_p)
    polyphony[std::to_string(P)] = {{"model", s.first.card().to_json()},
                                    {"baseline", s.second.card().to_json()}};

  const fs::path dir = cfg.output_dir / "eval";
  fs::create_directories(dir);
  json card{{"config_hash", cfg.hash()},
            {"checkpoint", {{"architecture_hash", ck.architecture_hash}, {"step", ck.step},
                            {"config_hash", ck.config_hash}}},
            {"dataset", {{"frames", frames.size()}, {"frontend_hash", fe},
                         {"seed", data.manifest.value("seed", std::uint64_t{0})}}},
            {"model_oracle_count", oracle.card().to_json()},
            {"model_threshold", threshold.card().to_json()},
            {"threshold", cfg.eval.threshold},
            {"baseline_top_k", base.card().to_json()},
            {"baseline_k", cfg.eval.baseline_peaks},
            {"baseline_oracle_count", base_oracle.card().to_json()},
            {"by_polyphony", polyphony},
            {"doa", doa_summary(frames, model_top1, base_top1, spec.geometry, spec.sample_rate,
                                spec.speed_of_sound)}};
  write_json(dir / "scorecard.json", card);
  {
    std::ofstream os(dir / "detail_model.csv");
    write_detail_csv(os, oracle.detail());
  }
  {
    std::ofstream os(dir / "detail_baseline.csv");
    write_detail_csv(os, base.detail());
  }
  const std::size_t dump = opt.dump_posteriors >= 0 ? static_cast<std::size_t>(opt.dump_posteriors)
                                                    : cfg.eval.dump_posteriors;
  if (dump > 0) {
    std::ofstream os(dir / "posteriors.csv");
    write_posterior_csv(os, posteriors, dump);
  }
  info("eval: model recall@" + std::to_string(tol) + " " +
       std::to_string(oracle.card().recall_at_1) + ", baseline (top-" +
       std::to_string(cfg.eval.baseline_peaks) + ") " + std::to_string(base.card().recall_at_1));
}

struct ExtractOptions {
  std::string checkpoint;
  std::string input;
  std::string output;
};

void cmd_extract(const Common& common, const ExtractOptions& opt) {
  const ExperimentConfig cfg = load(common);
  echo_config(cfg, "extract", {{"checkpoint", opt.checkpoint}, {"input", opt.input},
                               {"output", opt.output}});
  const fs::path ck_path = opt.checkpoint.empty() ? default_checkpoint(cfg) : fs::path(opt.checkpoint);
  if (!fs::exists(ck_path)) throw ConfigError("extract: checkpoint not found: " + ck_path.string());
  CheckpointInfo ck;
  const NgccModel<float> model = load_checkpoint<float>(ck_path, &ck);
  const int M = model.config().num_mics;

  std::string bytes;
  try {
    bytes = io::read_file(opt.input);
  } catch (const std::exception&) {
    throw ConfigError("extract.input: cannot read " + opt.input);
  }
  if (bytes.size() % (4 * static_cast<std::size_t>(M)) != 0)
    throw ConfigError("extract.input: size is not a whole number of " + std::to_string(M) +
                      "-channel float32 samples");
  const std::size_t samples = bytes.size() / (4 * static_cast<std::size_t>(M));
  MultiChannel signal(M, std::vector<double>(samples));
  std::istringstream is(bytes, std::ios::binary);
  for (int m = 0; m < M; ++m)
    for (auto& v : signal[m]) v = io::get_f32(is);

  const auto features = model.extract_features(signal);
  const fs::path out = opt.output.empty() ? cfg.output_dir / "features.bin" : fs::path(opt.output);
  std::ostringstream os(std::ios::binary);
  os.write("NGCCFEAT", 8);
  io::put_le<std::uint32_t>(os, 1);
  io::put_string(os, ck.config_hash);
  io::put_le<std::uint64_t>(os, features.size());
  const ModelConfig& mc = model.config();
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(mc.feature_channels));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(mc.pairs()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(mc.lags()));
  for (const auto& f : features)
    for (double v : f.values) io::put_f32(os, static_cast<float>(v));
  io::write_file(out, os.str());
  info("extract: " + std::to_string(features.size()) + " features written to " + out.string());
}

struct GradcheckOptions {
  std::string checkpoint;
};

void cmd_gradcheck(const Common& common, const GradcheckOptions& opt) {
  const ExperimentConfig cfg = load(common);
  echo_config(cfg, "gradcheck", {{"checkpoint", opt.checkpoint}});
  NgccModel<double> model(cfg.model);
  if (!opt.checkpoint.empty()) model = load_checkpoint<double>(opt.checkpoint);
  const GradCheckReport r = run_grad_check(cfg, model, nullptr);
  write_json(cfg.output_dir / "gradcheck.json", report_json(r));
  std::cout << report_json(r).dump(2) << '\n';
  if (!r.passed)
    throw NumericError("gradcheck failed in " + r.failing_layer + ": max relative error " +
                       std::to_string(r.max_rel_error));
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"NGCC-PHAT TDOA feature extractor"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "Experiment config (JSON)")->required();
    sub->add_option("-o,--out", common.out, "Override the output directory");
    sub->add_option("--threads", common.threads, "Worker threads (default: all cores)")
        ->check(CLI::NonNegativeNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Generate train and test datasets");
  add_common(sim);

  TrainOptions topt;
  auto* train = app.add_subcommand("train", "Train the model on the simulated train set");
  add_common(train);
  train->add_option("--epochs", topt.epochs, "Override train.epochs")->check(CLI::PositiveNumber);
  train->add_flag("--grad-check", topt.grad_check, "Run a gradient check before training");

  EvalOptions eopt;
  auto* eval = app.add_subcommand("eval", "Score the model and the GCC-PHAT baseline");
  add_common(eval);
  eval->add_option("--checkpoint", eopt.checkpoint, "Checkpoint (default: <out>/checkpoint.bin)");
  eval->add_option("--dataset", eopt.dataset, "Dataset directory (default: <out>/test)");
  eval->add_option("--dump-posteriors", eopt.dump_posteriors, "Frames to dump as CSV");
  eval->add_flag("--force", eopt.force, "Ignore front-end hash mismatches");

  ExtractOptions xopt;
  auto* extract = app.add_subcommand("extract", "Windowed TDOA features for a long recording");
  add_common(extract);
  extract->add_option("--checkpoint", xopt.checkpoint, "Checkpoint (default: <out>/checkpoint.bin)");
  extract->add_option("--input", xopt.input, "Planar little-endian float32 samples, one block per mic")
      ->required();
  extract->add_option("--output", xopt.output, "Feature file (default: <out>/features.bin)");

  GradcheckOptions gopt;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  add_common(grad);
  grad->add_option("--checkpoint", gopt.checkpoint, "Check at these weights instead of the init");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) cmd_simulate(common);
    else if (*train) cmd_train(common, topt);
    else if (*eval) cmd_eval(common, eopt);
    else if (*extract) cmd_extract(common, xopt);
    else if (*grad) cmd_gradcheck(common, gopt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IncompatibleError& e) {
    std::cerr << "incompatible: " << e.what() << '\n';
    return kExitIncompatible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}

}  // namespace ngcc
