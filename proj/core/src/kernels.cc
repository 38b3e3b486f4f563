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

#include "mmgp/kernels.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmgp/error.h"

namespace mmgp {
namespace {

void CheckEps(std::span<const double> eps, int num_nodes) {
  if (static_cast<int>(eps.size()) != num_nodes) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected " + std::to_string(num_nodes) + " kernel scales, got " +
                    std::to_string(eps.size()));
  }
  for (double e : eps) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw Error(ErrorCode::kInvalidArgument, "kernel scale must be > 0");
    }
  }
}

void CheckCompatible(std::span<const AggregatedRtf> a,
                     std::span<const AggregatedRtf> b) {
  if (a.empty() || b.empty()) return;
  const auto [ma, da] = CheckConsistent(a);
  const auto [mb, db] = CheckConsistent(b);
  if (ma != mb || da != db) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample sets differ in node count or RTF length");
  }
}

int NodeCount(std::span<const AggregatedRtf> a,
              std::span<const AggregatedRtf> b) {
  if (!a.empty()) return a.front().num_nodes();
  if (!b.empty()) return b.front().num_nodes();
  return 0;
}

}  // namespace

void Hyperparameters::Validate(int num_nodes) const {
  CheckEps(eps, num_nodes);
  if (sigma2.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sigma2 must not be empty");
  }
  for (double s : sigma2) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorCode::kInvalidArgument, "sigma2 must be >= 0");
    }
  }
  if (jitter && !(*jitter >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "jitter must be >= 0");
  }
}

std::pair<int, Eigen::Index> CheckConsistent(
    std::span<const AggregatedRtf> samples) {
  if (samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty sample set");
  }
  const int m = samples.front().num_nodes();
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "aRTF without nodes");
  const Eigen::Index d = samples.front().per_node.front().size();
  for (const AggregatedRtf& s : samples) {
    if (s.num_nodes() != m) {
      throw Error(ErrorCode::kInvalidArgument, "inconsistent node count");
    }
    for (const RtfVector& v : s.per_node) {
      if (v.size() != d) {
        throw Error(ErrorCode::kInvalidArgument, "inconsistent RTF length");
      }
    }
  }
  return {m, d};
}

double SquaredDistance(const RtfVector& a, const RtfVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidArgument, "RTF vectors differ in length");
  }
  return (a.values - b.values).squaredNorm();
}

double GaussianKernel(const RtfVector& a, const RtfVector& b, double eps) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "kernel scale must be > 0");
  }
  return std::exp(-SquaredDistance(a, b) / eps);
}

SquaredDistances PairwiseSquaredDistances(std::span<const AggregatedRtf> a,
                                          std::span<const AggregatedRtf> b) {
  CheckCompatible(a, b);
  const int m_count = NodeCount(a, b);
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  const bool same = a.data() == b.data() && a.size() == b.size();
  SquaredDistances out;
  out.per_node.assign(m_count, Eigen::MatrixXd::Zero(na, nb));
  for (int m = 0; m < m_count; ++m) {
    Eigen::MatrixXd& d = out.per_node[m];
    for (Eigen::Index i = 0; i < na; ++i) {
      const Eigen::VectorXcd& ai = a[i].per_node[m].values;
      for (Eigen::Index j = same ? i + 1 : 0; j < nb; ++j) {
        d(i, j) = (ai - b[j].per_node[m].values).squaredNorm();
        if (same) d(j, i) = d(i, j);
      }
    }
  }
  return out;
}

GramStack GramFromDistances(const SquaredDistances& d,
                            std::span<const double> eps) {
  const int m_count = static_cast<int>(d.per_node.size());
  CheckEps(eps, m_count);
  GramStack g;
  g.per_node.reserve(m_count);
  for (int m = 0; m < m_count; ++m) {
    g.per_node.push_back((-d.per_node[m].array() / eps[m]).exp().matrix());
    if (m == 0) {
      g.sum = g.per_node.back();
    } else {
      g.sum += g.per_node.back();
    }
  }
  return g;
}

GramStack BuildGramStack(std::span<const AggregatedRtf> a,
                         std::span<const AggregatedRtf> b,
                         std::span<const double> eps) {
  return GramFromDistances(PairwiseSquaredDistances(a, b), eps);
}

double NodeManifoldKernel(const AggregatedRtf& r, const AggregatedRtf& l,
                          std::span<const AggregatedRtf> training, int node,
                          std::span<const double> eps) {
  return CrossNodeKernel(r, l, node, node, training, eps);
}

double CrossNodeKernel(const AggregatedRtf& r, const AggregatedRtf& l, int q,
                       int w, std::span<const AggregatedRtf> training,
                       std::span<const double> eps) {
  if (training.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  const int m_count = training.front().num_nodes();
  CheckEps(eps, m_count);
  if (q < 0 || q >= m_count || w < 0 || w >= m_count ||
      r.num_nodes() != m_count || l.num_nodes() != m_count) {
    throw Error(ErrorCode::kInvalidArgument, "node index out of range");
  }
  double sum = 0.0;
  for (const AggregatedRtf& h : training) {
    sum += GaussianKernel(r.per_node[q], h.per_node[q], eps[q]) *
           GaussianKernel(l.per_node[w], h.per_node[w], eps[w]);
  }
  return sum;
}

Eigen::MatrixXd MmgpCovariance(std::span<const AggregatedRtf> a,
                               std::span<const AggregatedRtf> b,
                               std::span<const AggregatedRtf> training,
                               std::span<const double> eps) {
  if (training.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  const int m_count = training.front().num_nodes();
  const Eigen::MatrixXd s_ad = BuildGramStack(a, training, eps).sum;
  const double inv_m2 = 1.0 / (static_cast<double>(m_count) * m_count);
  if (a.data() == b.data() && a.size() == b.size()) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s_ad.rows(), s_ad.rows());
    out.selfadjointView<Eigen::Lower>().rankUpdate(s_ad, inv_m2);
    return out.selfadjointView<Eigen::Lower>();
  }
  const Eigen::MatrixXd s_bd = BuildGramStack(b, training, eps).sum;
  return inv_m2 * s_ad * s_bd.transpose();
}

std::vector<double> MedianHeuristicEps(
    std::span<const AggregatedRtf> training) {
  const auto [m_count, dim] = CheckConsistent(training);
  (void)dim;
  const SquaredDistances d = PairwiseSquaredDistances(training, training);
  std::vector<double> eps(m_count, 1.0);
  const auto n = static_cast<Eigen::Index>(training.size());
  for (int m = 0; m < m_count; ++m) {
    std::vector<double> values;
    values.reserve(n * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        values.push_back(d.per_node[m](i, j));
      }
    }
    if (values.empty()) continue;
    const auto mid = values.begin() + values.size() / 2;
    std::nth_element(values.begin(), mid, values.end());
    double median = *mid;
    if (values.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(values.begin(), mid));
    }
    if (median > 0.0 && std::isfinite(median)) eps[m] = median;
  }
  return eps;
}

AggregatedRtf RestrictToNode(const AggregatedRtf& sample, int node) {
  if (node < 0 || node >= sample.num_nodes()) {
    throw Error(ErrorCode::kInvalidArgument, "node index out of range");
  }
  AggregatedRtf out;
  out.per_node.push_back(sample.per_node[node]);
  out.per_node.front().node_index = 0;
  out.position = sample.position;
  return out;
}

}  // namespace mmgp
