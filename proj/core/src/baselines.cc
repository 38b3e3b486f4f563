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

#include "mmgp/baselines.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fft.h"
#include "mmgp/error.h"

namespace mmgp {
namespace {

std::vector<AggregatedRtf> NodeView(std::span<const AggregatedRtf> samples,
                                    int node) {
  std::vector<AggregatedRtf> out;
  out.reserve(samples.size());
  for (const AggregatedRtf& s : samples) out.push_back(RestrictToNode(s, node));
  return out;
}

int AxisCount(double lo, double hi, double res) {
  return static_cast<int>(std::floor((hi - lo) / res + 1e-9)) + 1;
}

}  // namespace

MeanOfNodes MeanOfNodes::Fit(std::span<const AggregatedRtf> labelled,
                             std::span<const AggregatedRtf> unlabelled,
                             const Eigen::MatrixXd& positions,
                             const Hyperparameters& hp) {
  const int num_nodes = CheckConsistent(labelled).first;
  hp.Validate(num_nodes);
  MeanOfNodes out;
  for (int m = 0; m < num_nodes; ++m) {
    Hyperparameters node_hp = hp;
    node_hp.eps = {hp.eps[m]};
    out.models_.push_back(MmgpModel::Fit(NodeView(labelled, m),
                                         NodeView(unlabelled, m), positions,
                                         node_hp));
  }
  return out;
}

MeanOfNodes MeanOfNodes::FitPerNode(
    std::span<const AggregatedRtf> labelled,
    std::span<const AggregatedRtf> unlabelled, const Eigen::MatrixXd& positions,
    std::span<const Hyperparameters> node_hps) {
  const int num_nodes = CheckConsistent(labelled).first;
  if (static_cast<int>(node_hps.size()) != num_nodes) {
    throw Error(ErrorCode::kInvalidArgument,
                "need one hyperparameter set per node");
  }
  MeanOfNodes out;
  for (int m = 0; m < num_nodes; ++m) {
    out.models_.push_back(MmgpModel::Fit(NodeView(labelled, m),
                                         NodeView(unlabelled, m), positions,
                                         node_hps[m]));
  }
  return out;
}

Eigen::VectorXd MeanOfNodes::Predict(const AggregatedRtf& sample) const {
  if (models_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "model is not fitted");
  }
  if (sample.num_nodes() != static_cast<int>(models_.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample node count differs from the model");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(models_.front().num_coordinates());
  for (std::size_t m = 0; m < models_.size(); ++m) {
    sum += models_[m].Predict(RestrictToNode(sample, static_cast<int>(m))).estimate;
  }
  return sum / static_cast<double>(models_.size());
}

Eigen::MatrixXd KernelProductGp::Gram(std::span<const AggregatedRtf> a,
                                      std::span<const AggregatedRtf> b,
                                      std::span<const double> eps) {
  const SquaredDistances d = PairwiseSquaredDistances(a, b);
  if (eps.size() != d.per_node.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one kernel scale per node needed");
  }
  Eigen::ArrayXXd exponent = Eigen::ArrayXXd::Zero(
      static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t m = 0; m < eps.size(); ++m) {
    exponent += d.per_node[m].array() / eps[m];
  }
  return (-exponent).exp().matrix();
}

KernelProductGp KernelProductGp::Fit(std::span<const AggregatedRtf> labelled,
                                     const Eigen::MatrixXd& positions,
                                     const Hyperparameters& hp) {
  const int num_nodes = CheckConsistent(labelled).first;
  hp.Validate(num_nodes);
  if (positions.rows() != static_cast<Eigen::Index>(labelled.size()) ||
      positions.cols() < 1 || !positions.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "positions must have one finite row per labelled sample");
  }
  const auto num_coords = static_cast<int>(positions.cols());
  if (!hp.SharedNoise() && static_cast<int>(hp.sigma2.size()) != num_coords) {
    throw Error(ErrorCode::kInvalidArgument,
                "per-coordinate sigma2 needs one value per coordinate");
  }
  KernelProductGp gp;
  gp.labelled_.assign(labelled.begin(), labelled.end());
  gp.eps_ = hp.eps;
  const Eigen::MatrixXd sigma = Gram(labelled, labelled, hp.eps);
  const double jitter = ResolveJitter(hp, sigma);
  gp.label_means_ = positions.colwise().mean().transpose();
  const Eigen::MatrixXd centered =
      positions.rowwise() - gp.label_means_.transpose();
  const int groups = hp.SharedNoise() ? 1 : num_coords;
  for (int g = 0; g < groups; ++g) {
    gp.gamma_.push_back(RegularizedInverse(sigma, hp.NoiseVariance(g) + jitter));
  }
  gp.weights_.resize(centered.rows(), num_coords);
  for (int c = 0; c < num_coords; ++c) {
    gp.weights_.col(c) = gp.gamma_[groups == 1 ? 0 : c] * centered.col(c);
  }
  return gp;
}

Prediction KernelProductGp::Predict(const AggregatedRtf& sample) const {
  if (labelled_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "model is not fitted");
  }
  const Eigen::VectorXd k =
      Gram(labelled_, std::span<const AggregatedRtf>(&sample, 1), eps_).col(0);
  Prediction p;
  p.prior_variance = 1.0;
  p.estimate = weights_.transpose() * k + label_means_;
  p.variance.resize(weights_.cols());
  for (Eigen::Index c = 0; c < weights_.cols(); ++c) {
    const Eigen::MatrixXd& gamma = gamma_[gamma_.size() == 1 ? 0 : c];
    p.variance[c] = std::clamp(1.0 - k.dot(gamma * k), 0.0, 1.0);
  }
  return p;
}

Eigen::VectorXd MeanOfNodesEstimate(std::span<const AggregatedRtf> labelled,
                                    std::span<const AggregatedRtf> unlabelled,
                                    const Eigen::MatrixXd& positions,
                                    const Hyperparameters& hp,
                                    const AggregatedRtf& sample) {
  return MeanOfNodes::Fit(labelled, unlabelled, positions, hp).Predict(sample);
}

Eigen::VectorXd KernelProductEstimate(std::span<const AggregatedRtf> labelled,
                                      const Eigen::MatrixXd& positions,
                                      const Hyperparameters& hp,
                                      const AggregatedRtf& sample) {
  return KernelProductGp::Fit(labelled, positions, hp).Predict(sample).estimate;
}

void SrpConfig::Validate() const {
  if (!(resolution > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "SRP grid resolution must be > 0");
  }
  if (((grid_max - grid_min).array() < 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "SRP grid max below min");
  }
  if (mic_positions.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "SRP-PHAT needs >= 2 microphones");
  }
  if (frame_size < 16 || !(sample_rate > 0.0) || !(sound_speed > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid SRP frame or rates");
  }
  if (!(band_low_hz >= 0.0 && band_low_hz < band_high_hz &&
        band_high_hz <= sample_rate / 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid SRP band");
  }
}

std::vector<Vec3> SrpGrid(const SrpConfig& cfg) {
  cfg.Validate();
  std::array<int, 3> counts;
  for (int a = 0; a < 3; ++a) {
    counts[a] = AxisCount(cfg.grid_min[a], cfg.grid_max[a], cfg.resolution);
  }
  std::vector<Vec3> grid;
  grid.reserve(static_cast<std::size_t>(counts[0]) * counts[1] * counts[2]);
  for (int k = 0; k < counts[2]; ++k) {
    for (int j = 0; j < counts[1]; ++j) {
      for (int i = 0; i < counts[0]; ++i) {
        grid.push_back(cfg.grid_min +
                       cfg.resolution * Vec3(i, j, k));
      }
    }
  }
  return grid;
}

Eigen::VectorXd SrpPhatMap(const MeasurementRecord& record,
                           const SrpConfig& cfg) {
  const std::vector<Vec3> grid = SrpGrid(cfg);
  const std::size_t num_mics = cfg.mic_positions.size();
  if (record.channels.size() != num_mics) {
    throw Error(ErrorCode::kInvalidArgument,
                "record channel count differs from the microphone list");
  }
  bool silent = true;
  for (const auto& ch : record.channels) {
    if (std::any_of(ch.begin(), ch.end(), [](double v) { return v != 0.0; })) {
      silent = false;
      break;
    }
  }
  if (silent) throw Error(ErrorCode::kInvalidArgument, "record is silent");

  const int n = cfg.frame_size;
  const int hop = n / 2;
  internal::RealFft fft(n);
  const int bins = fft.num_bins();
  const int k_lo = static_cast<int>(std::ceil(cfg.band_low_hz * n / cfg.sample_rate));
  const int k_hi = std::min(
      bins - 1, static_cast<int>(std::floor(cfg.band_high_hz * n / cfg.sample_rate)));
  std::vector<double> window(n);
  for (int i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }

  const std::size_t len = record.num_samples();
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + n <= len; s += hop) starts.push_back(s);
  if (starts.empty()) starts.push_back(0);

  const std::size_t num_pairs = num_mics * (num_mics - 1) / 2;
  std::vector<std::vector<std::complex<double>>> cross(
      num_pairs, std::vector<std::complex<double>>(bins));
  std::vector<std::vector<std::complex<double>>> spectra(num_mics);
  std::vector<double> frame(n);
  for (std::size_t s : starts) {
    for (std::size_t c = 0; c < num_mics; ++c) {
      const auto& ch = record.channels[c];
      for (int i = 0; i < n; ++i) {
        frame[i] = s + i < len ? ch[s + i] * window[i] : 0.0;
      }
      fft.Forward(frame, spectra[c]);
    }
    std::size_t p = 0;
    for (std::size_t a = 0; a < num_mics; ++a) {
      for (std::size_t b = a + 1; b < num_mics; ++b, ++p) {
        for (int k = k_lo; k <= k_hi; ++k) {
          const std::complex<double> v = std::conj(spectra[a][k]) * spectra[b][k];
          const double mag = std::abs(v);
          if (mag > 0.0) cross[p][k] += v / mag;
        }
      }
    }
  }

  // Time-domain GCC per pair; lag l lives at index l mod n.
  std::vector<std::vector<double>> gcc(num_pairs);
  for (std::size_t p = 0; p < num_pairs; ++p) {
    fft.Inverse(cross[p], gcc[p]);
  }
  const double samples_per_meter = cfg.sample_rate / cfg.sound_speed;
  Eigen::VectorXd power = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    std::size_t p = 0;
    for (std::size_t a = 0; a < num_mics; ++a) {
      const double da = (grid[g] - cfg.mic_positions[a]).norm();
      for (std::size_t b = a + 1; b < num_mics; ++b, ++p) {
        const double lag =
            ((grid[g] - cfg.mic_positions[b]).norm() - da) * samples_per_meter;
        const double fl = std::floor(lag);
        const double frac = lag - fl;
        const auto i0 = static_cast<long>(fl);
        auto at = [&](long i) { return gcc[p][((i % n) + n) % n]; };
        total += (1.0 - frac) * at(i0) + frac * at(i0 + 1);
      }
    }
    power[static_cast<Eigen::Index>(g)] = total;
  }
  return power;
}

Vec3 SrpPhat(const MeasurementRecord& record, const SrpConfig& cfg) {
  const Eigen::VectorXd power = SrpPhatMap(record, cfg);
  const std::vector<Vec3> grid = SrpGrid(cfg);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < power.size(); ++i) {
    if (power[i] > power[best]) best = i;
  }
  return grid[best];
}

}  // namespace mmgp
