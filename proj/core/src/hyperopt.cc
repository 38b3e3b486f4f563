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

#include "mmgp/hyperopt.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mmgp/error.h"
#include "mmgp/mmgp_model.h"

namespace mmgp {
namespace {

struct Evaluation {
  double log_likelihood = 0.0;
  std::vector<double> grad_eps;
  // One entry per noise group.
  std::vector<double> grad_sigma2;
};

Eigen::LLT<Eigen::MatrixXd> Factor(const Eigen::MatrixXd& sigma, double diag) {
  Eigen::MatrixXd a = sigma;
  a.diagonal().array() += diag;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    std::ostringstream os;
    os << "labelled covariance is not positive definite (smallest eigenvalue "
       << min_eig << ")";
    throw Error(ErrorCode::kNumerical, os.str());
  }
  return llt;
}

Eigen::MatrixXd Centered(const Eigen::MatrixXd& positions) {
  return positions.rowwise() - positions.colwise().mean();
}

Evaluation Evaluate(const Hyperparameters& hp, const CovarianceFamily& family,
                    const Eigen::MatrixXd& positions, bool gradients) {
  const int n = family.num_labelled();
  if (positions.rows() != n || positions.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "positions must have one row per labelled sample");
  }
  hp.Validate(family.num_eps());
  const auto num_coords = static_cast<int>(positions.cols());
  if (!hp.SharedNoise() && static_cast<int>(hp.sigma2.size()) != num_coords) {
    throw Error(ErrorCode::kInvalidArgument,
                "per-coordinate sigma2 needs one value per coordinate");
  }
  const Eigen::MatrixXd sigma = family.Covariance(hp.eps);
  const double jitter = ResolveJitter(hp, sigma);
  const Eigen::MatrixXd y = Centered(positions);
  const int groups = hp.SharedNoise() ? 1 : num_coords;

  Evaluation ev;
  ev.grad_sigma2.assign(groups, 0.0);
  // Per coordinate: W_c = alpha_c alpha_c^T - A_c^{-1}; gradients are
  // 0.5 * trace(W_c dSigma), summed over coordinates.
  Eigen::MatrixXd w_total = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  for (int g = 0; g < groups; ++g) {
    const Eigen::LLT<Eigen::MatrixXd> llt =
        Factor(sigma, hp.NoiseVariance(g) + jitter);
    const double log_det =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    Eigen::MatrixXd inv;
    if (gradients) inv = llt.solve(eye);
    for (int c = 0; c < num_coords; ++c) {
      if (groups > 1 && c != g) continue;
      const Eigen::VectorXd alpha = llt.solve(y.col(c));
      ev.log_likelihood += -0.5 * y.col(c).dot(alpha) - 0.5 * log_det -
                           0.5 * n * std::log(2.0 * std::numbers::pi);
      if (gradients) {
        Eigen::MatrixXd w = alpha * alpha.transpose() - inv;
        ev.grad_sigma2[g] += 0.5 * w.trace();
        w_total += w;
      }
    }
  }
  if (gradients) {
    ev.grad_eps.resize(family.num_eps());
    for (int m = 0; m < family.num_eps(); ++m) {
      ev.grad_eps[m] =
          0.5 * w_total.cwiseProduct(family.Derivative(hp.eps, m)).sum();
    }
  }
  return ev;
}

}  // namespace

MmgpCovarianceFamily::MmgpCovarianceFamily(
    std::span<const AggregatedRtf> labelled,
    std::span<const AggregatedRtf> unlabelled) {
  std::vector<AggregatedRtf> training(labelled.begin(), labelled.end());
  training.insert(training.end(), unlabelled.begin(), unlabelled.end());
  num_nodes_ = CheckConsistent(training).first;
  num_labelled_ = static_cast<int>(labelled.size());
  dist_ld_ = PairwiseSquaredDistances(labelled, training);
}

Eigen::MatrixXd MmgpCovarianceFamily::Covariance(
    std::span<const double> eps) const {
  const Eigen::MatrixXd s = GramFromDistances(dist_ld_, eps).sum;
  const double m2 = static_cast<double>(num_nodes_) * num_nodes_;
  return s * s.transpose() / m2;
}

Eigen::MatrixXd MmgpCovarianceFamily::Derivative(std::span<const double> eps,
                                                 int m) const {
  const GramStack g = GramFromDistances(dist_ld_, eps);
  // d k / d eps = (d^2 / eps^2) exp(-d^2 / eps), entrywise.
  const Eigen::MatrixXd dk =
      (dist_ld_.per_node[m].array() / (eps[m] * eps[m]) *
       g.per_node[m].array())
          .matrix();
  const double m2 = static_cast<double>(num_nodes_) * num_nodes_;
  const Eigen::MatrixXd half = dk * g.sum.transpose();
  return (half + half.transpose()) / m2;
}

ProductKernelFamily::ProductKernelFamily(
    std::span<const AggregatedRtf> labelled) {
  num_nodes_ = CheckConsistent(labelled).first;
  num_labelled_ = static_cast<int>(labelled.size());
  dist_ll_ = PairwiseSquaredDistances(labelled, labelled);
}

Eigen::MatrixXd ProductKernelFamily::Covariance(
    std::span<const double> eps) const {
  Eigen::ArrayXXd exponent = Eigen::ArrayXXd::Zero(num_labelled_, num_labelled_);
  for (int m = 0; m < num_nodes_; ++m) {
    exponent += dist_ll_.per_node[m].array() / eps[m];
  }
  return (-exponent).exp().matrix();
}

Eigen::MatrixXd ProductKernelFamily::Derivative(std::span<const double> eps,
                                                int m) const {
  return (Covariance(eps).array() * dist_ll_.per_node[m].array() /
          (eps[m] * eps[m]))
      .matrix();
}

double LogLikelihood(const Hyperparameters& hp, const CovarianceFamily& family,
                     const Eigen::MatrixXd& positions) {
  return Evaluate(hp, family, positions, false).log_likelihood;
}

double GradEps(const Hyperparameters& hp, int m,
               const CovarianceFamily& family,
               const Eigen::MatrixXd& positions) {
  if (m < 0 || m >= family.num_eps()) {
    throw Error(ErrorCode::kInvalidArgument, "node index out of range");
  }
  return Evaluate(hp, family, positions, true).grad_eps[m];
}

double GradSigma2(const Hyperparameters& hp, const CovarianceFamily& family,
                  const Eigen::MatrixXd& positions, int coordinate) {
  const Evaluation ev = Evaluate(hp, family, positions, true);
  if (coordinate < 0) {
    double total = 0.0;
    for (double g : ev.grad_sigma2) total += g;
    return total;
  }
  if (hp.SharedNoise()) {
    throw Error(ErrorCode::kInvalidArgument,
                "coordinate-specific gradient needs per-coordinate sigma2");
  }
  return ev.grad_sigma2.at(coordinate);
}

void OptimizerConfig::Validate() const {
  if (max_iters < 0 || !(step > 0.0) || !(grad_tol > 0.0) ||
      !(backtrack > 0.0 && backtrack < 1.0) || !(value_tol >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "optimizer needs positive step/tolerance and backtrack in (0,1)");
  }
}

OptimizeResult Optimize(const CovarianceFamily& family,
                        const Eigen::MatrixXd& positions,
                        const Hyperparameters& initial,
                        const OptimizerConfig& cfg) {
  cfg.Validate();
  const int num_eps = family.num_eps();
  const auto num_coords = static_cast<int>(positions.cols());
  Hyperparameters hp = initial;
  if (cfg.per_coordinate_sigma2 && hp.SharedNoise()) {
    hp.sigma2.assign(num_coords, hp.sigma2.front());
  }
  hp.Validate(num_eps);
  // Log-space needs a strictly positive noise level to move from.
  if (cfg.learn_sigma2) {
    for (double& s : hp.sigma2) s = std::max(s, 1e-6);
  }
  hp.jitter = ResolveJitter(hp, family.Covariance(hp.eps));

  // Active parameters: learnable eps first, then the noise levels.
  std::vector<int> eps_index;
  for (int m = 0; m < num_eps; ++m) {
    if (cfg.learn_eps.empty() || (m < static_cast<int>(cfg.learn_eps.size()) &&
                                  cfg.learn_eps[m])) {
      eps_index.push_back(m);
    }
  }
  const int num_sigma = cfg.learn_sigma2 ? static_cast<int>(hp.sigma2.size()) : 0;
  const int dim = static_cast<int>(eps_index.size()) + num_sigma;

  auto get = [&](const Hyperparameters& h) {
    Eigen::VectorXd p(dim);
    int i = 0;
    for (int m : eps_index) p[i++] = h.eps[m];
    for (int s = 0; s < num_sigma; ++s) p[i++] = h.sigma2[s];
    return p;
  };
  auto set = [&](Hyperparameters& h, const Eigen::VectorXd& p) {
    int i = 0;
    for (int m : eps_index) h.eps[m] = p[i++];
    for (int s = 0; s < num_sigma; ++s) h.sigma2[s] = p[i++];
  };
  auto gradient = [&](const Evaluation& ev) {
    Eigen::VectorXd g(dim);
    int i = 0;
    for (int m : eps_index) g[i++] = ev.grad_eps[m];
    for (int s = 0; s < num_sigma; ++s) g[i++] = ev.grad_sigma2[s];
    return g;
  };
  auto record = [&](OptimizeResult& r, int iteration, double value,
                    const Hyperparameters& h) {
    r.trace.push_back({iteration, value, h.eps, h.sigma2});
  };

  OptimizeResult result;
  Evaluation ev = Evaluate(hp, family, positions, true);
  record(result, 0, ev.log_likelihood, hp);
  double step = cfg.step;
  // Largest move per iteration, in log units or relative size.
  constexpr double kMaxMove = 2.0;

  int iter = 0;
  for (; iter < cfg.max_iters && dim > 0; ++iter) {
    const Eigen::VectorXd p = get(hp);
    const Eigen::VectorXd g_p = gradient(ev);
    const Eigen::VectorXd dir =
        cfg.log_space ? Eigen::VectorXd(g_p.cwiseProduct(p)) : g_p;
    if (dir.norm() <= cfg.grad_tol) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    Hyperparameters trial = hp;
    Evaluation trial_ev;
    while (step > 1e-14) {
      Eigen::VectorXd delta = step * dir;
      const double biggest = delta.cwiseAbs().maxCoeff();
      if (cfg.log_space) {
        if (biggest > kMaxMove) delta *= kMaxMove / biggest;
        set(trial, (p.array() * delta.array().exp()).matrix());
      } else {
        const double limit = kMaxMove * p.cwiseAbs().maxCoeff();
        if (biggest > limit) delta *= limit / biggest;
        const Eigen::VectorXd q = p + delta;
        if ((q.array() <= 0.0).any()) {
          step *= cfg.backtrack;
          continue;
        }
        set(trial, q);
      }
      try {
        trial_ev = Evaluate(trial, family, positions, true);
      } catch (const Error&) {
        step *= cfg.backtrack;
        continue;
      }
      if (trial_ev.log_likelihood > ev.log_likelihood) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      // No ascent direction resolvable at double precision.
      result.converged = true;
      break;
    }
    const double gain = trial_ev.log_likelihood - ev.log_likelihood;
    hp = trial;
    ev = std::move(trial_ev);
    record(result, iter + 1, ev.log_likelihood, hp);
    step *= 2.0;
    if (gain <= cfg.value_tol * (1.0 + std::abs(ev.log_likelihood))) {
      result.converged = true;
      ++iter;
      break;
    }
  }
  if (dim == 0) result.converged = true;
  result.iterations = iter;
  result.hp = hp;
  result.log_likelihood = ev.log_likelihood;
  if (!result.converged) {
    std::ostringstream os;
    os << "optimizer stopped after " << iter
       << " iterations without meeting the gradient tolerance";
    result.warning = os.str();
  }
  return result;
}

void WriteTraceCsv(const std::filesystem::path& path,
                   const OptimizeResult& result,
                   const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.precision(17);
  const std::size_t num_eps = result.hp.eps.size();
  const std::size_t num_sigma = result.hp.sigma2.size();
  out << "iteration,log_likelihood";
  for (std::size_t m = 0; m < num_eps; ++m) out << ",eps_" << m + 1;
  if (num_sigma == 1) {
    out << ",sigma2";
  } else {
    for (std::size_t c = 0; c < num_sigma; ++c) out << ",sigma2_" << c + 1;
  }
  out << ",config_hash\n";
  for (const TraceRow& row : result.trace) {
    out << row.iteration << ',' << row.log_likelihood;
    for (double e : row.eps) out << ',' << e;
    // Rows recorded before per-coordinate expansion carry one value.
    for (std::size_t c = 0; c < num_sigma; ++c) {
      out << ',' << row.sigma2[std::min(c, row.sigma2.size() - 1)];
    }
    out << ',' << config_hash << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace mmgp
