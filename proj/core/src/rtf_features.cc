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

#include "mmgp/rtf_features.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fft.h"
#include "mmgp/error.h"

namespace mmgp {
namespace {

// Denominator floor relative to the mean auto-spectrum.
constexpr double kRtfRegularization = 1e-10;

std::vector<double> HannWindow(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

// Welch averages of conj(X) X and conj(X) Y in one pass over the frames.
struct WelchPair {
  Eigen::VectorXcd xx;
  Eigen::VectorXcd xy;
};

WelchPair WelchSpectra(std::span<const double> x, std::span<const double> y,
                       const SpectralConfig& cfg, double sample_rate,
                       bool need_auto) {
  cfg.Validate(sample_rate);
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cross-spectrum inputs differ in length");
  }
  const int win = cfg.WindowSamples(sample_rate);
  const int hop = cfg.HopSamples(sample_rate);
  if (x.size() < static_cast<std::size_t>(win)) {
    std::ostringstream os;
    os << "signal of " << x.size() << " samples is shorter than one "
       << win << "-sample window";
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  const std::vector<double> window = HannWindow(win);
  double window_energy = 0.0;
  for (double v : window) window_energy += v * v;

  internal::RealFft fft(cfg.fft_size);
  const int bins = fft.num_bins();
  WelchPair out{Eigen::VectorXcd::Zero(bins), Eigen::VectorXcd::Zero(bins)};
  std::vector<double> fx(win), fy(win);
  std::vector<std::complex<double>> sx, sy;
  const bool same = x.data() == y.data();
  std::size_t frames = 0;
  for (std::size_t start = 0; start + win <= x.size(); start += hop) {
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < win; ++i) {
      mx += x[start + i];
      my += y[start + i];
    }
    mx /= win;
    my /= win;
    for (int i = 0; i < win; ++i) {
      fx[i] = (x[start + i] - mx) * window[i];
      fy[i] = (y[start + i] - my) * window[i];
    }
    fft.Forward(fx, sx);
    if (!same) fft.Forward(fy, sy);
    const auto& ry = same ? sx : sy;
    for (int k = 0; k < bins; ++k) {
      const std::complex<double> cx = std::conj(sx[k]);
      out.xy[k] += cx * ry[k];
      if (need_auto) out.xx[k] += cx * sx[k];
    }
    ++frames;
  }
  const double scale =
      1.0 / (static_cast<double>(frames) * sample_rate * window_energy);
  out.xy *= scale;
  out.xx *= scale;
  return out;
}

}  // namespace

int SpectralConfig::WindowSamples(double sample_rate) const {
  return static_cast<int>(std::lround(window_length_s * sample_rate));
}

int SpectralConfig::HopSamples(double sample_rate) const {
  return std::max(1, static_cast<int>(std::lround(
                         WindowSamples(sample_rate) * (1.0 - overlap_fraction))));
}

void SpectralConfig::Validate(double sample_rate) const {
  if (!(sample_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sample rate must be positive");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "overlap must lie in [0, 1)");
  }
  const int win = WindowSamples(sample_rate);
  if (win < 2) throw Error(ErrorCode::kInvalidArgument, "window too short");
  if (fft_size < win) {
    throw Error(ErrorCode::kInvalidArgument,
                "fft_size is smaller than the window");
  }
  if (!(band_low_hz >= 0.0 && band_low_hz < band_high_hz &&
        band_high_hz <= sample_rate / 2.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "band must satisfy 0 <= low < high <= fs/2");
  }
}

std::vector<int> BandBins(const SpectralConfig& cfg, double sample_rate) {
  cfg.Validate(sample_rate);
  const double df = sample_rate / cfg.fft_size;
  std::vector<int> bins;
  for (int k = 0; k <= cfg.fft_size / 2; ++k) {
    const double f = k * df;
    if (f >= cfg.band_low_hz - 1e-9 && f <= cfg.band_high_hz + 1e-9) {
      bins.push_back(k);
    }
  }
  return bins;
}

Eigen::VectorXcd WelchCrossSpectrum(std::span<const double> x,
                                    std::span<const double> y,
                                    const SpectralConfig& cfg,
                                    double sample_rate) {
  return WelchSpectra(x, y, cfg, sample_rate, false).xy;
}

RtfVector EstimateRtf(const MeasurementRecord& record, int node,
                      const SpectralConfig& cfg, double sample_rate) {
  if (node < 0 || node >= record.num_nodes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "record has no node " + std::to_string(node));
  }
  const std::vector<double>& ref = record.channels[2 * node];
  const std::vector<double>& other = record.channels[2 * node + 1];
  if (std::all_of(ref.begin(), ref.end(), [](double v) { return v == 0.0; })) {
    throw Error(ErrorCode::kInvalidArgument,
                "reference channel of node " + std::to_string(node) +
                    " is all zeros");
  }
  const WelchPair s = WelchSpectra(ref, other, cfg, sample_rate, true);
  const double floor = kRtfRegularization * s.xx.real().mean();
  const std::vector<int> bins = BandBins(cfg, sample_rate);

  RtfVector rtf;
  rtf.node_index = node;
  rtf.values.resize(static_cast<Eigen::Index>(bins.size()));
  rtf.bin_frequencies.resize(static_cast<Eigen::Index>(bins.size()));
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const int k = bins[i];
    rtf.values[i] = s.xy[k] / (s.xx[k].real() + floor);
    rtf.bin_frequencies[i] = k * sample_rate / cfg.fft_size;
  }
  if (!rtf.values.allFinite()) {
    throw Error(ErrorCode::kNumerical, "non-finite RTF estimate");
  }
  return rtf;
}

AggregatedRtf AssembleArtf(std::vector<RtfVector> per_node,
                           std::optional<Vec3> position) {
  if (per_node.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "aRTF needs at least one node");
  }
  std::sort(per_node.begin(), per_node.end(),
            [](const RtfVector& a, const RtfVector& b) {
              return a.node_index < b.node_index;
            });
  for (std::size_t m = 0; m < per_node.size(); ++m) {
    if (per_node[m].node_index != static_cast<int>(m)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "node indices must be 0..M-1 without gaps or duplicates");
    }
    if (per_node[m].size() != per_node[0].size() ||
        per_node[m].bin_frequencies != per_node[0].bin_frequencies) {
      throw Error(ErrorCode::kInvalidArgument,
                  "nodes use different frequency grids");
    }
  }
  return AggregatedRtf{std::move(per_node), position};
}

AggregatedRtf ExtractFeatures(const MeasurementRecord& record,
                              const SpectralConfig& cfg, double sample_rate) {
  std::vector<RtfVector> nodes;
  for (int m = 0; m < record.num_nodes(); ++m) {
    nodes.push_back(EstimateRtf(record, m, cfg, sample_rate));
  }
  return AssembleArtf(std::move(nodes), record.position);
}

}  // namespace mmgp
