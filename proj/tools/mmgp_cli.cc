// Copyright 2026 The MMGP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mmgp: dataset simulation, feature extraction, fitting, localization and
// evaluation from one experiment config file.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmgp/error.h"
#include "mmgp/experiment.h"

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  bool streaming = false;
  bool no_streaming = false;
  std::optional<std::string> output;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->required();
  cmd->add_option("--seed", f.seed, "Override the global seed");
  cmd->add_option("--method", f.method,
                  "mmgp | mean | kernel-product | srp-phat");
  cmd->add_flag("--streaming", f.streaming, "Absorb test samples sequentially");
  cmd->add_flag("--no-streaming", f.no_streaming, "Batch prediction");
  cmd->add_option("--output", f.output, "Output directory");
}

mmgp::ExperimentConfig Config(const CommonFlags& f) {
  mmgp::ExperimentConfig cfg = mmgp::LoadExperimentConfig(f.config);
  std::optional<bool> streaming;
  if (f.streaming) streaming = true;
  if (f.no_streaming) streaming = false;
  std::optional<fs::path> output;
  if (f.output) output = *f.output;
  mmgp::ApplyOverrides(cfg, f.seed, f.method, streaming, output);
  return cfg;
}

template <typename T>
T Or(const std::optional<T>& v, T fallback) {
  return v ? *v : std::move(fallback);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-manifold GP source localization"};
  app.require_subcommand(1);

  CommonFlags simulate_f, features_f, fit_f, localize_f, baseline_f, sweep_f,
      run_f;
  std::optional<std::string> dataset, model, estimates, manifest, metrics, out;
  int block_size = 5;
  int node = 0;
  double sweep_min = 0.0, sweep_max = 0.0;
  int sweep_count = 50;

  CLI::App* simulate = app.add_subcommand("simulate", "Render a dataset");
  AddCommon(simulate, simulate_f);

  CLI::App* features = app.add_subcommand("features", "Extract RTF features");
  AddCommon(features, features_f);
  features->add_option("--dataset", dataset, "Dataset directory");

  CLI::App* fit = app.add_subcommand("fit", "Fit the MMGP model");
  AddCommon(fit, fit_f);
  fit->add_option("--dataset", dataset, "Dataset directory");
  fit->add_option("--model", model, "Model file to write");

  CLI::App* localize = app.add_subcommand("localize", "Localize test records");
  AddCommon(localize, localize_f);
  localize->add_option("--dataset", dataset, "Dataset directory");
  localize->add_option("--model", model, "Model file");
  localize->add_option("--estimates", estimates, "Estimates CSV to write");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score an estimates file");
  evaluate->add_option("--estimates", estimates, "Estimates CSV")->required();
  evaluate->add_option("--manifest", manifest, "Evaluation manifest")->required();
  evaluate->add_option("--block-size", block_size, "Samples per error block");
  evaluate->add_option("--metrics", metrics, "Metrics CSV to write");

  CLI::App* baseline = app.add_subcommand("baseline", "Run a baseline method");
  AddCommon(baseline, baseline_f);
  baseline->add_option("--dataset", dataset, "Dataset directory");
  baseline->add_option("--estimates", estimates, "Estimates CSV to write");

  CLI::App* sweep = app.add_subcommand("sweep", "Grid sweep of one node's eps");
  AddCommon(sweep, sweep_f);
  sweep->add_option("--dataset", dataset, "Dataset directory");
  sweep->add_option("--node", node, "Node index (0-based)");
  sweep->add_option("--min", sweep_min, "Smallest eps")->required();
  sweep->add_option("--max", sweep_max, "Largest eps")->required();
  sweep->add_option("--count", sweep_count, "Log-spaced grid points");
  sweep->add_option("--out", out, "Sweep CSV to write");

  CLI::App* run = app.add_subcommand("run", "simulate, features, fit, localize, evaluate");
  AddCommon(run, run_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto cfg = Config(simulate_f);
      const auto m = mmgp::CmdSimulate(cfg);
      std::printf("dataset %s records=%zu\n", mmgp::DatasetDir(cfg).c_str(),
                  m.records.size());
    } else if (features->parsed()) {
      const auto cfg = Config(features_f);
      const fs::path dir = Or<std::string>(dataset, mmgp::DatasetDir(cfg));
      const auto m = mmgp::CmdFeatures(dir, cfg);
      std::printf("features dim=%d hash=%s\n", m.features->dim,
                  m.features->hash.c_str());
    } else if (fit->parsed()) {
      const auto cfg = Config(fit_f);
      const fs::path dir = Or<std::string>(dataset, mmgp::DatasetDir(cfg));
      const fs::path path = Or<std::string>(model, mmgp::ModelPath(cfg));
      const auto m = mmgp::CmdFit(dir, cfg, path);
      std::printf("model %s n_L=%d\n", path.c_str(), m.num_labelled());
    } else if (localize->parsed()) {
      const auto cfg = Config(localize_f);
      const fs::path dir = Or<std::string>(dataset, mmgp::DatasetDir(cfg));
      const fs::path path = Or<std::string>(model, mmgp::ModelPath(cfg));
      const fs::path csv =
          Or<std::string>(estimates, cfg.output / "estimates.csv");
      const auto rows = mmgp::CmdLocalize(path, dir, cfg, csv);
      std::printf("estimates %s rows=%zu\n", csv.c_str(), rows.size());
    } else if (evaluate->parsed()) {
      const fs::path est = *estimates;
      const fs::path csv = Or<std::string>(
          metrics, (est.parent_path() / "metrics.csv").string());
      const auto m = mmgp::CmdEvaluate(est, *manifest, block_size, csv);
      std::printf("rmse %.6f n=%zu metrics=%s\n", m.rmse, m.errors.size(),
                  csv.c_str());
    } else if (baseline->parsed()) {
      const auto cfg = Config(baseline_f);
      const fs::path dir = Or<std::string>(dataset, mmgp::DatasetDir(cfg));
      const fs::path csv = Or<std::string>(
          estimates,
          cfg.output / ("estimates_" + mmgp::MethodName(cfg.method) + ".csv"));
      const auto rows = mmgp::CmdBaseline(cfg.method, dir, cfg, csv);
      std::printf("estimates %s rows=%zu\n", csv.c_str(), rows.size());
    } else if (sweep->parsed()) {
      const auto cfg = Config(sweep_f);
      if (!(sweep_min > 0.0 && sweep_max >= sweep_min && sweep_count >= 1)) {
        throw mmgp::Error(mmgp::ErrorCode::kInvalidArgument,
                          "sweep needs 0 < min <= max and count >= 1");
      }
      std::vector<double> values(sweep_count);
      for (int k = 0; k < sweep_count; ++k) {
        const double t = sweep_count == 1 ? 0.0 : double(k) / (sweep_count - 1);
        values[k] = sweep_min * std::pow(sweep_max / sweep_min, t);
      }
      const fs::path dir = Or<std::string>(dataset, mmgp::DatasetDir(cfg));
      const fs::path csv = Or<std::string>(out, cfg.output / "sweep.csv");
      mmgp::CmdSweep(dir, cfg, node, values, csv);
      std::printf("sweep %s points=%d\n", csv.c_str(), sweep_count);
    } else if (run->parsed()) {
      const auto cfg = Config(run_f);
      const auto m = mmgp::CmdRun(cfg);
      std::printf("rmse %.6f n=%zu output=%s\n", m.rmse, m.errors.size(),
                  cfg.output.c_str());
    }
  } catch (const mmgp::Error& e) {
    std::fprintf(stderr, "error: code=%s message=\"%s\"\n",
                 std::string(mmgp::ErrorCodeName(e.code())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: code=internal message=\"%s\"\n", e.what());
    return 1;
  }
  return 0;
}
