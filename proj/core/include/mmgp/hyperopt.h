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

#ifndef MMGP_HYPEROPT_H_
#define MMGP_HYPEROPT_H_

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mmgp/kernels.h"
#include "mmgp/types.h"

namespace mmgp {

// Labelled-set covariance as a function of the kernel scales. Squared
// distances are computed once at construction.
class CovarianceFamily {
 public:
  virtual ~CovarianceFamily() = default;

  virtual int num_eps() const = 0;
  virtual int num_labelled() const = 0;
  virtual Eigen::MatrixXd Covariance(std::span<const double> eps) const = 0;
  // d Covariance / d eps[m].
  virtual Eigen::MatrixXd Derivative(std::span<const double> eps,
                                     int m) const = 0;
};

// Fused multiple-manifold covariance over the labelled samples with the
// training sums running over labelled and unlabelled samples.
class MmgpCovarianceFamily : public CovarianceFamily {
 public:
  MmgpCovarianceFamily(std::span<const AggregatedRtf> labelled,
                       std::span<const AggregatedRtf> unlabelled);

  int num_eps() const override { return num_nodes_; }
  int num_labelled() const override { return num_labelled_; }
  Eigen::MatrixXd Covariance(std::span<const double> eps) const override;
  Eigen::MatrixXd Derivative(std::span<const double> eps,
                             int m) const override;

 private:
  int num_nodes_;
  int num_labelled_;
  SquaredDistances dist_ld_;
};

// Entrywise product of the per-node Gaussian kernels on the labelled set.
class ProductKernelFamily : public CovarianceFamily {
 public:
  explicit ProductKernelFamily(std::span<const AggregatedRtf> labelled);

  int num_eps() const override { return num_nodes_; }
  int num_labelled() const override { return num_labelled_; }
  Eigen::MatrixXd Covariance(std::span<const double> eps) const override;
  Eigen::MatrixXd Derivative(std::span<const double> eps,
                             int m) const override;

 private:
  int num_nodes_;
  int num_labelled_;
  SquaredDistances dist_ll_;
};

// Sum over coordinates of the Gaussian log-likelihood of the centered labels.
// An unset jitter is resolved from the covariance as in MmgpModel::Fit.
double LogLikelihood(const Hyperparameters& hp, const CovarianceFamily& family,
                     const Eigen::MatrixXd& positions);

// dL / d eps_m. The jitter is held fixed.
double GradEps(const Hyperparameters& hp, int m,
               const CovarianceFamily& family,
               const Eigen::MatrixXd& positions);

// dL / d sigma2. With per-coordinate noise, `coordinate` selects which
// variance; -1 differentiates the shared one.
double GradSigma2(const Hyperparameters& hp, const CovarianceFamily& family,
                  const Eigen::MatrixXd& positions, int coordinate = -1);

struct OptimizerConfig {
  int max_iters = 200;
  double step = 0.1;
  double backtrack = 0.5;
  double grad_tol = 1e-4;
  // Relative log-likelihood change treated as converged.
  double value_tol = 1e-10;
  bool log_space = true;
  bool per_coordinate_sigma2 = false;
  bool learn_sigma2 = true;
  // Per-node mask; empty learns every eps.
  std::vector<bool> learn_eps;

  void Validate() const;
};

struct TraceRow {
  int iteration = 0;
  double log_likelihood = 0.0;
  std::vector<double> eps;
  std::vector<double> sigma2;
};

struct OptimizeResult {
  Hyperparameters hp;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string warning;
  // Accepted iterates only, so log_likelihood never decreases along it.
  std::vector<TraceRow> trace;
};

// Gradient ascent with backtracking line search, in log-space by default.
// Returns the best parameters seen; `converged` is false with a warning when
// the iteration budget runs out.
OptimizeResult Optimize(const CovarianceFamily& family,
                        const Eigen::MatrixXd& positions,
                        const Hyperparameters& initial,
                        const OptimizerConfig& cfg);

// CSV: iteration,log_likelihood,eps_1..eps_M,sigma2[_c]...,config_hash
void WriteTraceCsv(const std::filesystem::path& path,
                   const OptimizeResult& result,
                   const std::string& config_hash);

}  // namespace mmgp

#endif  // MMGP_HYPEROPT_H_
