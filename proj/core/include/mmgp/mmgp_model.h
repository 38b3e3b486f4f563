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

#ifndef MMGP_MMGP_MODEL_H_
#define MMGP_MMGP_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mmgp/kernels.h"
#include "mmgp/types.h"

namespace mmgp {

struct Prediction {
  // Per coordinate, meters.
  Eigen::VectorXd estimate;
  // Posterior variance of the latent position per coordinate, m^2.
  Eigen::VectorXd variance;
  double prior_variance = 0.0;
};

// Inverse of (sigma + diag * I). Throws Error(kNumerical) with the smallest
// eigenvalue when the matrix is not positive definite.
Eigen::MatrixXd RegularizedInverse(const Eigen::MatrixXd& sigma, double diag);

// Jitter to use for `sigma`: hp.jitter if set, else 1e-8 * trace / n.
double ResolveJitter(const Hyperparameters& hp, const Eigen::MatrixXd& sigma);

// Multiple-manifold GP regressor. The first n_L entries of the training set
// are the labelled samples; later entries are unlabelled samples, including
// streamed test samples absorbed by UpdateRecursive.
//
// Predict is const and may run concurrently. UpdateRecursive and
// PredictRecursive mutate the model and need external serialization.
class MmgpModel {
 public:
  MmgpModel() = default;

  // `positions` is n_L x C (one column per estimated coordinate).
  static MmgpModel Fit(std::span<const AggregatedRtf> labelled,
                       std::span<const AggregatedRtf> unlabelled,
                       const Eigen::MatrixXd& positions,
                       const Hyperparameters& hp);

  Prediction Predict(const AggregatedRtf& sample) const;

  // Absorbs `sample` as an extra unlabelled sample: rank-1 update of the
  // labelled covariance and Woodbury update of its regularized inverse.
  void UpdateRecursive(const AggregatedRtf& sample);

  // UpdateRecursive followed by Predict on the updated model.
  Prediction PredictRecursive(const AggregatedRtf& sample);

  // Rebuilds every matrix from the current training set, re-conditioning
  // after many streaming updates. Keeps the resolved jitter.
  MmgpModel Refit() const;

  // max over noise groups of |Gamma (Sigma_L + (sigma2 + jitter) I) - I|_F.
  double InverseResidual() const;

  void Save(const std::filesystem::path& path) const;
  static MmgpModel Load(const std::filesystem::path& path);

  bool fitted() const { return num_labelled_ > 0; }
  int num_labelled() const { return num_labelled_; }
  int num_nodes() const { return num_nodes_; }
  int num_coordinates() const { return static_cast<int>(label_means_.size()); }
  std::uint64_t update_count() const { return update_count_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& sigma_l() const { return sigma_l_; }
  // One inverse per noise group (a single one when sigma2 is shared).
  const Eigen::MatrixXd& gamma(int group = 0) const { return gamma_[group]; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& label_means() const { return label_means_; }
  const Eigen::MatrixXd& centered_labels() const { return centered_labels_; }
  const std::vector<AggregatedRtf>& training_set() const { return training_; }

  // Hash of the configuration that produced the training features.
  const std::string& source_hash() const { return source_hash_; }
  void set_source_hash(std::string hash) { source_hash_ = std::move(hash); }

 private:
  int NoiseGroup(int coordinate) const {
    return gamma_.size() == 1 ? 0 : coordinate;
  }
  // Per-node kernel sums between `sample` and every training sample.
  Eigen::RowVectorXd KernelSums(const AggregatedRtf& sample) const;
  void RefreshWeights();

  int num_labelled_ = 0;
  int num_nodes_ = 0;
  Hyperparameters hp_;
  double jitter_ = 0.0;
  std::vector<AggregatedRtf> training_;
  Eigen::MatrixXd s_ld_;  // n_L x n_D
  Eigen::MatrixXd sigma_l_;
  std::vector<Eigen::MatrixXd> gamma_;
  Eigen::MatrixXd centered_labels_;
  Eigen::VectorXd label_means_;
  Eigen::MatrixXd weights_;
  std::uint64_t update_count_ = 0;
  std::string source_hash_;
};

}  // namespace mmgp

#endif  // MMGP_MMGP_MODEL_H_
