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

#ifndef MMGP_RTF_FEATURES_H_
#define MMGP_RTF_FEATURES_H_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mmgp/types.h"

namespace mmgp {

struct SpectralConfig {
  double window_length_s = 0.128;
  double overlap_fraction = 0.75;
  int fft_size = 2048;
  double band_low_hz = 200.0;
  double band_high_hz = 2500.0;

  int WindowSamples(double sample_rate) const;
  int HopSamples(double sample_rate) const;
  void Validate(double sample_rate) const;
};

// Indices k of the half-spectrum with band_low <= k * fs / fft_size <=
// band_high.
std::vector<int> BandBins(const SpectralConfig& cfg, double sample_rate);

// Welch estimate of E[conj(X) * Y] on the half-spectrum (fft_size/2 + 1
// bins), Hann-windowed with per-window mean removal. Scaled as a two-sided
// density: white noise of variance v gives v / fs on every bin.
Eigen::VectorXcd WelchCrossSpectrum(std::span<const double> x,
                                    std::span<const double> y,
                                    const SpectralConfig& cfg,
                                    double sample_rate);

// Biased RTF estimate S_{y1 y2} / S_{y1 y1} of node `node` on the band bins.
RtfVector EstimateRtf(const MeasurementRecord& record, int node,
                      const SpectralConfig& cfg, double sample_rate);

// Orders per-node RTFs by node index and checks they share a bin grid.
AggregatedRtf AssembleArtf(std::vector<RtfVector> per_node,
                           std::optional<Vec3> position = std::nullopt);

// EstimateRtf for every node of `record`, then AssembleArtf.
AggregatedRtf ExtractFeatures(const MeasurementRecord& record,
                              const SpectralConfig& cfg, double sample_rate);

}  // namespace mmgp

#endif  // MMGP_RTF_FEATURES_H_
