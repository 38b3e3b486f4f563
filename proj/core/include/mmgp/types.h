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

#ifndef MMGP_TYPES_H_
#define MMGP_TYPES_H_

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace mmgp {

using Vec3 = Eigen::Vector3d;

// Band-restricted relative transfer function of one microphone pair.
// Node indices are zero-based.
struct RtfVector {
  Eigen::VectorXcd values;
  int node_index = 0;
  Eigen::VectorXd bin_frequencies;

  Eigen::Index size() const { return values.size(); }
};

// One source event seen by all M nodes, ordered by node index.
struct AggregatedRtf {
  std::vector<RtfVector> per_node;
  std::optional<Vec3> position;

  int num_nodes() const { return static_cast<int>(per_node.size()); }
};

// Time-domain microphone signals of one source event. Channel 2m is the
// reference microphone of node m and channel 2m+1 its partner.
struct MeasurementRecord {
  std::vector<std::vector<double>> channels;
  std::optional<Vec3> position;

  int num_nodes() const { return static_cast<int>(channels.size() / 2); }
  std::size_t num_samples() const {
    return channels.empty() ? 0 : channels.front().size();
  }
};

}  // namespace mmgp

#endif  // MMGP_TYPES_H_
