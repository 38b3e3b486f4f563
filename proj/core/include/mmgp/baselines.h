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

#ifndef MMGP_BASELINES_H_
#define MMGP_BASELINES_H_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mmgp/kernels.h"
#include "mmgp/mmgp_model.h"
#include "mmgp/types.h"

namespace mmgp {

// Averages M independent single-node manifold GP regressions.
class MeanOfNodes {
 public:
  static MeanOfNodes Fit(std::span<const AggregatedRtf> labelled,
                         std::span<const AggregatedRtf> unlabelled,
                         const Eigen::MatrixXd& positions,
                         const Hyperparameters& hp);

  // One set of hyperparameters per node, each with a single eps.
  static MeanOfNodes FitPerNode(std::span<const AggregatedRtf> labelled,
                                std::span<const AggregatedRtf> unlabelled,
                                const Eigen::MatrixXd& positions,
                                std::span<const Hyperparameters> node_hps);
  Eigen::VectorXd Predict(const AggregatedRtf& sample) const;
  const std::vector<MmgpModel>& node_models() const { return models_; }

 private:
  std::vector<MmgpModel> models_;
};

// GP regression with the entrywise product of the node kernels, i.e. a
// Gaussian kernel on the concatenated aRTF when all eps are equal.
class KernelProductGp {
 public:
  static KernelProductGp Fit(std::span<const AggregatedRtf> labelled,
                             const Eigen::MatrixXd& positions,
                             const Hyperparameters& hp);

  Prediction Predict(const AggregatedRtf& sample) const;
  // Product-kernel Gram between two sets.
  static Eigen::MatrixXd Gram(std::span<const AggregatedRtf> a,
                              std::span<const AggregatedRtf> b,
                              std::span<const double> eps);

 private:
  std::vector<AggregatedRtf> labelled_;
  std::vector<double> eps_;
  std::vector<Eigen::MatrixXd> gamma_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd label_means_;
};

Eigen::VectorXd MeanOfNodesEstimate(std::span<const AggregatedRtf> labelled,
                                    std::span<const AggregatedRtf> unlabelled,
                                    const Eigen::MatrixXd& positions,
                                    const Hyperparameters& hp,
                                    const AggregatedRtf& sample);
Eigen::VectorXd KernelProductEstimate(std::span<const AggregatedRtf> labelled,
                                      const Eigen::MatrixXd& positions,
                                      const Hyperparameters& hp,
                                      const AggregatedRtf& sample);

struct SrpConfig {
  // Axis-aligned search box; an axis with lo == hi contributes one point.
  Vec3 grid_min = Vec3::Zero();
  Vec3 grid_max = Vec3::Zero();
  double resolution = 0.1;
  double band_low_hz = 200.0;
  double band_high_hz = 2500.0;
  int frame_size = 4096;
  double sample_rate = 16000.0;
  double sound_speed = 343.0;
  std::vector<Vec3> mic_positions;

  void Validate() const;
};

// Candidate points in x-fastest order.
std::vector<Vec3> SrpGrid(const SrpConfig& cfg);

// Steered response power of every grid point, PHAT-weighted GCC summed over
// all microphone pairs.
Eigen::VectorXd SrpPhatMap(const MeasurementRecord& record,
                           const SrpConfig& cfg);

// Grid point of maximal steered power; ties go to the lowest index.
Vec3 SrpPhat(const MeasurementRecord& record, const SrpConfig& cfg);

}  // namespace mmgp

#endif  // MMGP_BASELINES_H_
