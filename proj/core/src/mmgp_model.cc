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

#include "mmgp/mmgp_model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mmgp/error.h"

namespace mmgp {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are written in host byte order");

constexpr char kMagic[4] = {'M', 'M', 'G', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
  void Bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void U64(std::uint64_t v) { Bytes(&v, sizeof v); }
  void F64(double v) { Bytes(&v, sizeof v); }
  void Matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) F64(m(i, j));
    }
  }
  void Finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIo, "write failed: " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  void Bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorCode::kIo, "truncated model " + path_.string());
  }
  std::uint64_t U64() {
    std::uint64_t v;
    Bytes(&v, sizeof v);
    return v;
  }
  // Counts are bounded so a corrupt header cannot trigger huge allocations.
  Eigen::Index Count(std::uint64_t limit = 1u << 24) {
    const std::uint64_t v = U64();
    if (v > limit) throw Error(ErrorCode::kIo, "corrupt model " + path_.string());
    return static_cast<Eigen::Index>(v);
  }
  double F64() {
    double v;
    Bytes(&v, sizeof v);
    return v;
  }
  Eigen::MatrixXd Matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = F64();
    }
    return m;
  }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

Eigen::MatrixXd RegularizedInverse(const Eigen::MatrixXd& sigma, double diag) {
  const Eigen::Index n = sigma.rows();
  Eigen::MatrixXd a = sigma;
  a.diagonal().array() += diag;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  // Also reject matrices that are singular to working precision.
  if (llt.info() != Eigen::Success ||
      !(llt.rcond() > std::numeric_limits<double>::epsilon())) {
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    std::ostringstream os;
    os << "regularized covariance is not positive definite (smallest "
          "eigenvalue "
       << min_eig << ")";
    throw Error(ErrorCode::kNumerical, os.str());
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

double ResolveJitter(const Hyperparameters& hp, const Eigen::MatrixXd& sigma) {
  if (hp.jitter) return *hp.jitter;
  if (sigma.rows() == 0) return 0.0;
  return 1e-8 * sigma.trace() / static_cast<double>(sigma.rows());
}

MmgpModel MmgpModel::Fit(std::span<const AggregatedRtf> labelled,
                         std::span<const AggregatedRtf> unlabelled,
                         const Eigen::MatrixXd& positions,
                         const Hyperparameters& hp) {
  if (labelled.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one labelled sample");
  }
  if (positions.rows() != static_cast<Eigen::Index>(labelled.size()) ||
      positions.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "positions must have one row per labelled sample");
  }
  if (!positions.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite labelled position");
  }
  MmgpModel model;
  model.training_.assign(labelled.begin(), labelled.end());
  model.training_.insert(model.training_.end(), unlabelled.begin(),
                         unlabelled.end());
  model.num_nodes_ = CheckConsistent(model.training_).first;
  hp.Validate(model.num_nodes_);
  const auto num_coords = static_cast<int>(positions.cols());
  if (!hp.SharedNoise() && static_cast<int>(hp.sigma2.size()) != num_coords) {
    throw Error(ErrorCode::kInvalidArgument,
                "per-coordinate sigma2 needs one value per coordinate");
  }
  model.num_labelled_ = static_cast<int>(labelled.size());
  model.hp_ = hp;

  model.s_ld_ = BuildGramStack(labelled, model.training_, hp.eps).sum;
  const double m2 = static_cast<double>(model.num_nodes_) * model.num_nodes_;
  model.sigma_l_ = Eigen::MatrixXd::Zero(model.num_labelled_, model.num_labelled_);
  model.sigma_l_.selfadjointView<Eigen::Lower>().rankUpdate(model.s_ld_, 1.0 / m2);
  model.sigma_l_ = model.sigma_l_.selfadjointView<Eigen::Lower>();
  model.jitter_ = ResolveJitter(hp, model.sigma_l_);
  model.hp_.jitter = model.jitter_;

  model.label_means_ = positions.colwise().mean().transpose();
  model.centered_labels_ =
      positions.rowwise() - model.label_means_.transpose();
  const int groups = hp.SharedNoise() ? 1 : num_coords;
  for (int g = 0; g < groups; ++g) {
    model.gamma_.push_back(
        RegularizedInverse(model.sigma_l_, hp.NoiseVariance(g) + model.jitter_));
  }
  model.RefreshWeights();
  return model;
}

void MmgpModel::RefreshWeights() {
  weights_.resize(num_labelled_, num_coordinates());
  for (int c = 0; c < num_coordinates(); ++c) {
    weights_.col(c) = gamma_[NoiseGroup(c)] * centered_labels_.col(c);
  }
}

Eigen::RowVectorXd MmgpModel::KernelSums(const AggregatedRtf& sample) const {
  if (sample.num_nodes() != num_nodes_) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample node count differs from the model");
  }
  const auto n = static_cast<Eigen::Index>(training_.size());
  Eigen::RowVectorXd sums = Eigen::RowVectorXd::Zero(n);
  for (int m = 0; m < num_nodes_; ++m) {
    const Eigen::VectorXcd& h = sample.per_node[m].values;
    if (h.size() != training_.front().per_node[m].size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sample RTF length differs from the model");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      sums[i] += std::exp(-(h - training_[i].per_node[m].values).squaredNorm() /
                          hp_.eps[m]);
    }
  }
  return sums;
}

Prediction MmgpModel::Predict(const AggregatedRtf& sample) const {
  if (!fitted()) throw Error(ErrorCode::kInvalidArgument, "model is not fitted");
  const Eigen::RowVectorXd s_t = KernelSums(sample);
  const double m2 = static_cast<double>(num_nodes_) * num_nodes_;
  const Eigen::VectorXd cross = s_ld_ * s_t.transpose() / m2;

  Prediction p;
  p.prior_variance = s_t.squaredNorm() / m2;
  p.estimate = weights_.transpose() * cross + label_means_;
  p.variance.resize(num_coordinates());
  for (int c = 0; c < num_coordinates(); ++c) {
    const double reduction = cross.dot(gamma_[NoiseGroup(c)] * cross);
    p.variance[c] = std::clamp(p.prior_variance - reduction, 0.0,
                               p.prior_variance);
  }
  return p;
}

void MmgpModel::UpdateRecursive(const AggregatedRtf& sample) {
  if (!fitted()) throw Error(ErrorCode::kInvalidArgument, "model is not fitted");
  const Eigen::RowVectorXd sums = KernelSums(sample);
  const Eigen::VectorXd k = sums.head(num_labelled_).transpose();
  const double m2 = static_cast<double>(num_nodes_) * num_nodes_;

  sigma_l_.noalias() += k * k.transpose() / m2;
  for (Eigen::MatrixXd& gamma : gamma_) {
    const Eigen::VectorXd gk = gamma * k;
    gamma.noalias() -= gk * gk.transpose() / (m2 + k.dot(gk));
  }
  s_ld_.conservativeResize(Eigen::NoChange, s_ld_.cols() + 1);
  s_ld_.col(s_ld_.cols() - 1) = k;
  training_.push_back(sample);
  ++update_count_;
  RefreshWeights();
}

Prediction MmgpModel::PredictRecursive(const AggregatedRtf& sample) {
  UpdateRecursive(sample);
  return Predict(sample);
}

MmgpModel MmgpModel::Refit() const {
  if (!fitted()) throw Error(ErrorCode::kInvalidArgument, "model is not fitted");
  const Eigen::MatrixXd positions =
      centered_labels_.rowwise() + label_means_.transpose();
  std::span<const AggregatedRtf> all(training_);
  MmgpModel refit = Fit(all.first(num_labelled_), all.subspan(num_labelled_),
                        positions, hp_);
  refit.update_count_ = update_count_;
  refit.source_hash_ = source_hash_;
  return refit;
}

double MmgpModel::InverseResidual() const {
  double worst = 0.0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(num_labelled_, num_labelled_);
  for (std::size_t g = 0; g < gamma_.size(); ++g) {
    Eigen::MatrixXd a = sigma_l_;
    a.diagonal().array() += hp_.NoiseVariance(static_cast<int>(g)) + jitter_;
    worst = std::max(worst, (gamma_[g] * a - eye).norm());
  }
  return worst;
}

void MmgpModel::Save(const std::filesystem::path& path) const {
  if (!fitted()) throw Error(ErrorCode::kInvalidArgument, "model is not fitted");
  Writer w(path);
  w.Bytes(kMagic, 4);
  w.Bytes(&kFormatVersion, sizeof kFormatVersion);
  const auto n_l = static_cast<std::uint64_t>(num_labelled_);
  w.U64(n_l);
  w.U64(static_cast<std::uint64_t>(num_coordinates()));
  w.U64(static_cast<std::uint64_t>(num_nodes_));
  for (double e : hp_.eps) w.F64(e);
  w.U64(hp_.sigma2.size());
  for (double s : hp_.sigma2) w.F64(s);
  w.F64(jitter_);
  w.Matrix(sigma_l_);
  w.U64(gamma_.size());
  for (const Eigen::MatrixXd& g : gamma_) w.Matrix(g);
  w.Matrix(centered_labels_);
  for (Eigen::Index c = 0; c < label_means_.size(); ++c) w.F64(label_means_[c]);
  w.U64(update_count_);

  // Training features so the model can predict without the dataset.
  w.U64(source_hash_.size());
  w.Bytes(source_hash_.data(), source_hash_.size());
  const Eigen::Index dim = training_.front().per_node.front().size();
  w.U64(training_.size());
  w.U64(static_cast<std::uint64_t>(dim));
  const Eigen::VectorXd& freqs = training_.front().per_node.front().bin_frequencies;
  for (Eigen::Index k = 0; k < dim; ++k) {
    w.F64(k < freqs.size() ? freqs[k] : 0.0);
  }
  for (const AggregatedRtf& s : training_) {
    for (const RtfVector& v : s.per_node) {
      for (Eigen::Index k = 0; k < dim; ++k) {
        w.F64(v.values[k].real());
        w.F64(v.values[k].imag());
      }
    }
  }
  w.Finish(path);
}

MmgpModel MmgpModel::Load(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.Bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::kIo, "not an MMGP model file: " + path.string());
  }
  std::uint32_t version;
  r.Bytes(&version, sizeof version);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kIo, "unsupported model version " +
                                    std::to_string(version));
  }
  MmgpModel model;
  const Eigen::Index n_l = r.Count();
  const Eigen::Index num_coords = r.Count(3);
  const Eigen::Index num_nodes = r.Count(1024);
  model.num_labelled_ = static_cast<int>(n_l);
  model.num_nodes_ = static_cast<int>(num_nodes);
  model.hp_.eps.resize(num_nodes);
  for (double& e : model.hp_.eps) e = r.F64();
  model.hp_.sigma2.resize(r.Count(3));
  for (double& s : model.hp_.sigma2) s = r.F64();
  model.jitter_ = r.F64();
  model.hp_.jitter = model.jitter_;
  model.sigma_l_ = r.Matrix(n_l, n_l);
  const Eigen::Index groups = r.Count(3);
  for (Eigen::Index g = 0; g < groups; ++g) model.gamma_.push_back(r.Matrix(n_l, n_l));
  model.centered_labels_ = r.Matrix(n_l, num_coords);
  model.label_means_.resize(num_coords);
  for (Eigen::Index c = 0; c < num_coords; ++c) model.label_means_[c] = r.F64();
  model.update_count_ = r.U64();

  model.source_hash_.resize(r.Count(4096));
  r.Bytes(model.source_hash_.data(), model.source_hash_.size());
  const Eigen::Index n_d = r.Count();
  const Eigen::Index dim = r.Count();
  Eigen::VectorXd freqs(dim);
  for (Eigen::Index k = 0; k < dim; ++k) freqs[k] = r.F64();
  model.training_.resize(n_d);
  for (AggregatedRtf& s : model.training_) {
    s.per_node.resize(num_nodes);
    for (Eigen::Index m = 0; m < num_nodes; ++m) {
      RtfVector& v = s.per_node[m];
      v.node_index = static_cast<int>(m);
      v.bin_frequencies = freqs;
      v.values.resize(dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double re = r.F64();
        v.values[k] = {re, r.F64()};
      }
    }
  }
  if (n_d < n_l || groups < 1 || !model.hp_.eps.size()) {
    throw Error(ErrorCode::kIo, "inconsistent model file " + path.string());
  }
  std::span<const AggregatedRtf> all(model.training_);
  model.s_ld_ = BuildGramStack(all.first(n_l), all, model.hp_.eps).sum;
  model.RefreshWeights();
  return model;
}

}  // namespace mmgp
