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

#ifndef MMGP_KERNELS_H_
#define MMGP_KERNELS_H_

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mmgp/types.h"

namespace mmgp {

struct Hyperparameters {
  // Per-node Gaussian kernel scale, in squared-RTF-distance units.
  std::vector<double> eps;
  // Label-noise variance in m^2: one shared value or one per coordinate.
  std::vector<double> sigma2 = {0.0};
  // Diagonal regularizer in m^2. Empty means 1e-8 * trace / n_L at fit time.
  std::optional<double> jitter;

  double NoiseVariance(int coordinate) const {
    return sigma2.size() == 1 ? sigma2.front() : sigma2.at(coordinate);
  }
  bool SharedNoise() const { return sigma2.size() == 1; }

  void Validate(int num_nodes) const;
};

// Checks all aRTFs share node count and bin grid. Returns {M, D}.
std::pair<int, Eigen::Index> CheckConsistent(
    std::span<const AggregatedRtf> samples);

double SquaredDistance(const RtfVector& a, const RtfVector& b);

// exp(-|a - b|^2 / eps) with the complex Euclidean norm.
double GaussianKernel(const RtfVector& a, const RtfVector& b, double eps);

// Per-node squared distances between two sample sets, |A| x |B| each.
struct SquaredDistances {
  std::vector<Eigen::MatrixXd> per_node;
};

SquaredDistances PairwiseSquaredDistances(std::span<const AggregatedRtf> a,
                                          std::span<const AggregatedRtf> b);

// Per-node Gram matrices K^m and their sum S.
struct GramStack {
  std::vector<Eigen::MatrixXd> per_node;
  Eigen::MatrixXd sum;
};

GramStack GramFromDistances(const SquaredDistances& d,
                            std::span<const double> eps);
GramStack BuildGramStack(std::span<const AggregatedRtf> a,
                         std::span<const AggregatedRtf> b,
                         std::span<const double> eps);

// Single-node manifold covariance: sum_i k_m(r, h_i) k_m(l, h_i).
double NodeManifoldKernel(const AggregatedRtf& r, const AggregatedRtf& l,
                          std::span<const AggregatedRtf> training, int node,
                          std::span<const double> eps);

// Cross-node covariance: sum_i k_q(r, h_i) k_w(l, h_i).
double CrossNodeKernel(const AggregatedRtf& r, const AggregatedRtf& l, int q,
                       int w, std::span<const AggregatedRtf> training,
                       std::span<const double> eps);

// Fused covariance between sets A and B given the training set D, computed
// as S_AD * S_BD^T / M^2. Symmetric PSD when A == B.
Eigen::MatrixXd MmgpCovariance(std::span<const AggregatedRtf> a,
                               std::span<const AggregatedRtf> b,
                               std::span<const AggregatedRtf> training,
                               std::span<const double> eps);

// Median of the pairwise squared distances within each node.
std::vector<double> MedianHeuristicEps(
    std::span<const AggregatedRtf> training);

// Copy of `sample` holding only node `node` (re-indexed as node 0).
AggregatedRtf RestrictToNode(const AggregatedRtf& sample, int node);

}  // namespace mmgp

#endif  // MMGP_KERNELS_H_
