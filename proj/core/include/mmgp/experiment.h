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

#ifndef MMGP_EXPERIMENT_H_
#define MMGP_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mmgp/acoustic_sim.h"
#include "mmgp/baselines.h"
#include "mmgp/dataset.h"
#include "mmgp/hyperopt.h"
#include "mmgp/kernels.h"
#include "mmgp/mmgp_model.h"
#include "mmgp/rtf_features.h"

namespace mmgp {

enum class Method { kMmgp, kMean, kKernelProduct, kSrpPhat };
Method ParseMethod(const std::string& name);
std::string MethodName(Method method);

// Search box for the SRP-PHAT baseline.
struct SrpGridConfig {
  Vec3 grid_min = Vec3::Zero();
  Vec3 grid_max = Vec3::Zero();
  double resolution = 0.1;
  int frame_size = 4096;
};

struct ExperimentConfig {
  SceneConfig scene;
  LabeledSpec labelled;
  UnlabeledSpec unlabelled;
  TestSpec test;
  SpectralConfig spectral;
  // Empty means learn by maximum likelihood.
  std::optional<Hyperparameters> hyperparameters;
  // Starting point for learning; eps defaults to the median heuristic.
  std::optional<Hyperparameters> initial_hyperparameters;
  OptimizerConfig optimizer;
  Method method = Method::kMmgp;
  bool streaming = true;
  // Locally mixes the streaming order (moves of < block_size places).
  std::optional<std::uint64_t> shuffle_seed;
  std::uint64_t seed = 0;
  // Estimated coordinates (0 = x, 1 = y, 2 = z).
  std::vector<int> coordinates = {0, 1};
  SrpGridConfig srp;
  int block_size = 5;
  std::filesystem::path output = "out";
  // Configuration document with CLI overrides applied.
  std::string document;
  // FNV-1a hash of the document, excluding the output directory.
  std::string hash;
};

ExperimentConfig ParseExperimentConfig(const std::string& json_text);
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);

// Applies CLI overrides and recomputes the hash.
void ApplyOverrides(ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                    std::optional<std::string> method,
                    std::optional<bool> streaming,
                    std::optional<std::filesystem::path> output);

// Greedy nearest-neighbour tour starting at the point with the smallest
// coordinate sum.
std::vector<Vec3> AdjacencyPath(const std::vector<Vec3>& points);

struct EstimateRow {
  std::string id;
  Eigen::VectorXd estimate;
  Eigen::VectorXd variance;
};

// CSV header: id,x,y[,z],var_x,var_y[,var_z],config_hash
void WriteEstimatesCsv(const std::filesystem::path& path,
                       const std::vector<EstimateRow>& rows,
                       const std::vector<int>& coordinates,
                       const std::string& config_hash);
std::vector<EstimateRow> ReadEstimatesCsv(const std::filesystem::path& path,
                                          std::vector<int>* coordinates);

struct Metrics {
  double rmse = 0.0;
  std::vector<std::string> ids;
  std::vector<double> errors;
  std::vector<double> block_means;
};

Metrics ComputeMetrics(const std::vector<EstimateRow>& estimates,
                       const std::vector<int>& coordinates,
                       const DatasetManifest& truth, int block_size);

// Fixed locations inside the output directory.
std::filesystem::path DatasetDir(const ExperimentConfig& cfg);
std::filesystem::path ModelPath(const ExperimentConfig& cfg);

DatasetManifest CmdSimulate(const ExperimentConfig& cfg);
DatasetManifest CmdFeatures(const std::filesystem::path& dataset_dir,
                            const ExperimentConfig& cfg);
MmgpModel CmdFit(const std::filesystem::path& dataset_dir,
                 const ExperimentConfig& cfg,
                 const std::filesystem::path& model_path);
std::vector<EstimateRow> CmdLocalize(const std::filesystem::path& model_path,
                                     const std::filesystem::path& dataset_dir,
                                     const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_csv);
Metrics CmdEvaluate(const std::filesystem::path& estimates_csv,
                    const std::filesystem::path& evaluation_manifest,
                    int block_size, const std::filesystem::path& out_csv);
std::vector<EstimateRow> CmdBaseline(Method method,
                                     const std::filesystem::path& dataset_dir,
                                     const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_csv);

struct SweepRow {
  double eps = 0.0;
  double log_likelihood = 0.0;
  double rmse = 0.0;
};

// Varies eps of `node` over `values` with the other parameters fixed and
// records likelihood and test RMSE of the batch predictor.
std::vector<SweepRow> CmdSweep(const std::filesystem::path& dataset_dir,
                               const ExperimentConfig& cfg, int node,
                               const std::vector<double>& values,
                               const std::filesystem::path& out_csv);

// simulate -> features -> fit -> localize/baseline -> evaluate.
Metrics CmdRun(const ExperimentConfig& cfg);

}  // namespace mmgp

#endif  // MMGP_EXPERIMENT_H_
