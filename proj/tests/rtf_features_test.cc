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

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mmgp/acoustic_sim.h"
#include "mmgp/error.h"
#include "mmgp/rtf_features.h"
#include "test_support.h"

namespace mmgp {
namespace {

constexpr double kFs = 16000.0;

// Welch average written out with a direct DFT on the selected bins.
std::complex<double> NaiveWelch(const std::vector<double>& x,
                                const std::vector<double>& y, int k,
                                const SpectralConfig& cfg) {
  const int win = static_cast<int>(std::lround(cfg.window_length_s * kFs));
  const int hop = static_cast<int>(std::lround(win * (1.0 - cfg.overlap_fraction)));
  std::vector<double> w(win);
  double energy = 0.0;
  for (int i = 0; i < win; ++i) {
    w[i] = std::pow(std::sin(std::numbers::pi * i / win), 2);
    energy += w[i] * w[i];
  }
  std::complex<double> acc = 0.0;
  int frames = 0;
  for (std::size_t s = 0; s + win <= x.size(); s += hop) {
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < win; ++i) {
      mx += x[s + i] / win;
      my += y[s + i] / win;
    }
    std::complex<double> xk = 0.0, yk = 0.0;
    for (int i = 0; i < win; ++i) {
      const std::complex<double> e =
          std::polar(1.0, -2.0 * std::numbers::pi * k * i / cfg.fft_size);
      xk += (x[s + i] - mx) * w[i] * e;
      yk += (y[s + i] - my) * w[i] * e;
    }
    acc += std::conj(xk) * yk;
    ++frames;
  }
  return acc / (frames * kFs * energy);
}

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mmgp::Error";
  return ErrorCode::kIo;
}

MeasurementRecord TwoChannel(std::vector<double> a, std::vector<double> b) {
  MeasurementRecord r;
  r.channels = {std::move(a), std::move(b)};
  return r;
}

TEST(BandBins, CountMatchesInclusiveBandFormula) {
  const SpectralConfig cfg;
  const std::vector<int> bins = BandBins(cfg, kFs);
  int count = 0;
  for (int k = 0; k <= 1024; ++k) {
    const double f = k * kFs / 2048;
    if (f >= 200.0 && f <= 2500.0) ++count;
  }
  EXPECT_EQ(static_cast<int>(bins.size()), count);
  EXPECT_EQ(count, 295);
  EXPECT_EQ(bins.front(), 26);
  EXPECT_EQ(bins.back(), 320);
}

TEST(SpectralConfig, ValidationRejectsBadSettings) {
  SpectralConfig c;
  c.overlap_fraction = 1.0;
  EXPECT_EQ(CodeOf([&] { c.Validate(kFs); }), ErrorCode::kInvalidArgument);
  c = SpectralConfig{};
  c.fft_size = 1024;  // window is 2048 samples
  EXPECT_EQ(CodeOf([&] { c.Validate(kFs); }), ErrorCode::kInvalidArgument);
  c = SpectralConfig{};
  c.band_high_hz = 9000.0;
  EXPECT_EQ(CodeOf([&] { c.Validate(kFs); }), ErrorCode::kInvalidArgument);
  c = SpectralConfig{};
  c.band_low_hz = 3000.0;
  EXPECT_EQ(CodeOf([&] { c.Validate(kFs); }), ErrorCode::kInvalidArgument);
}

TEST(Welch, MatchesDirectPeriodogramAverage) {
  const std::vector<double> x = WhiteNoise(6000, 1);
  std::vector<double> y = WhiteNoise(6000, 2);
  for (std::size_t i = 3; i < y.size(); ++i) y[i] += 0.7 * x[i - 3];
  const SpectralConfig cfg;
  const Eigen::VectorXcd s = WelchCrossSpectrum(x, y, cfg, kFs);
  ASSERT_EQ(s.size(), 1025);
  for (int k : {0, 1, 26, 100, 320, 777, 1024}) {
    const std::complex<double> want = NaiveWelch(x, y, k, cfg);
    EXPECT_LE(std::abs(s[k] - want), 1e-10 * std::abs(want) + 1e-18) << k;
  }
}

TEST(Welch, WhiteNoiseAutoSpectrumIsFlatAtDensity) {
  const double var = 2.5;
  std::vector<double> x = WhiteNoise(160000, 3);
  for (double& v : x) v *= std::sqrt(var);
  const Eigen::VectorXcd s = WelchCrossSpectrum(x, x, SpectralConfig{}, kFs);
  double mean = 0.0;
  for (int k = 1; k < 1024; ++k) {
    EXPECT_EQ(s[k].imag(), 0.0);
    EXPECT_GE(s[k].real(), 0.0);
    mean += s[k].real();
  }
  mean /= 1023;
  EXPECT_NEAR(mean, var / kFs, 0.05 * var / kFs);
}

TEST(Welch, DelayGivesLinearPhase) {
  const int tau = 5;
  const std::vector<double> x = WhiteNoise(64000, 4);
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = tau; i < x.size(); ++i) y[i] = x[i - tau];
  const Eigen::VectorXcd s = WelchCrossSpectrum(x, y, SpectralConfig{}, kFs);
  for (int k = 30; k < 300; k += 7) {
    const double f = k * kFs / 2048;
    const double want = -2.0 * std::numbers::pi * f * tau / kFs;
    EXPECT_NEAR(std::remainder(std::arg(s[k]) - want, 2 * std::numbers::pi), 0.0,
                0.05)
        << k;
  }
}

TEST(Welch, HermitianSymmetryAndZeros) {
  const std::vector<double> x = WhiteNoise(5000, 5), y = WhiteNoise(5000, 6);
  const Eigen::VectorXcd a = WelchCrossSpectrum(x, y, SpectralConfig{}, kFs);
  const Eigen::VectorXcd b = WelchCrossSpectrum(y, x, SpectralConfig{}, kFs);
  EXPECT_LE((a - b.conjugate()).cwiseAbs().maxCoeff(), 1e-15 * a.cwiseAbs().maxCoeff());
  const std::vector<double> z(5000, 0.0);
  EXPECT_EQ(WelchCrossSpectrum(z, z, SpectralConfig{}, kFs).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Welch, ShortOrMismatchedInputsFail) {
  const std::vector<double> a(2047, 1.0), b(3000, 1.0), c(3001, 1.0);
  EXPECT_EQ(CodeOf([&] { WelchCrossSpectrum(a, a, SpectralConfig{}, kFs); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { WelchCrossSpectrum(b, c, SpectralConfig{}, kFs); }),
            ErrorCode::kInvalidArgument);
}

TEST(EstimateRtf, IdenticalChannelsGiveUnity) {
  const std::vector<double> x = SpeechSurrogate(16000, kFs, 7);
  const RtfVector h = EstimateRtf(TwoChannel(x, x), 0, SpectralConfig{}, kFs);
  ASSERT_EQ(h.size(), 295);
  for (Eigen::Index d = 0; d < h.size(); ++d) {
    EXPECT_LE(std::abs(h.values[d] - 1.0), 1e-3);
  }
  EXPECT_EQ(h.bin_frequencies[0], 26 * kFs / 2048);
}

TEST(EstimateRtf, EightSampleDelay) {
  const std::vector<double> x = WhiteNoise(80000, 8);
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 8; i < x.size(); ++i) y[i] = x[i - 8];
  const SpectralConfig cfg;
  const RtfVector h = EstimateRtf(TwoChannel(x, y), 0, cfg, kFs);
  const std::vector<int> bins = BandBins(cfg, kFs);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const std::complex<double> want =
        std::polar(1.0, -2.0 * std::numbers::pi * bins[i] * 8 / 2048);
    EXPECT_LE(std::abs(h.values[i] - want), 2e-2) << bins[i];
  }
}

TEST(EstimateRtf, InvariantToGlobalGain) {
  const std::vector<double> x = WhiteNoise(20000, 9);
  std::vector<double> y = WhiteNoise(20000, 10);
  for (std::size_t i = 2; i < y.size(); ++i) y[i] = 0.3 * y[i] + x[i - 2];
  const RtfVector a = EstimateRtf(TwoChannel(x, y), 0, SpectralConfig{}, kFs);
  for (double c : {-3.0, 1e-3, 250.0}) {
    std::vector<double> xs = x, ys = y;
    for (double& v : xs) v *= c;
    for (double& v : ys) v *= c;
    const RtfVector b = EstimateRtf(TwoChannel(xs, ys), 0, SpectralConfig{}, kFs);
    EXPECT_LE((a.values - b.values).cwiseAbs().maxCoeff(),
              1e-12 * a.values.cwiseAbs().maxCoeff())
        << c;
  }
}

TEST(EstimateRtf, ZeroReferenceAndBadNodeFail) {
  const std::vector<double> z(4000, 0.0), x = WhiteNoise(4000, 1);
  EXPECT_EQ(CodeOf([&] { EstimateRtf(TwoChannel(z, x), 0, SpectralConfig{}, kFs); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { EstimateRtf(TwoChannel(x, x), 1, SpectralConfig{}, kFs); }),
            ErrorCode::kInvalidArgument);
}

RtfVector Rtf(int node, int dim, double value) {
  RtfVector v;
  v.node_index = node;
  v.values = Eigen::VectorXcd::Constant(dim, value);
  v.bin_frequencies = Eigen::VectorXd::LinSpaced(dim, 100.0, 200.0);
  return v;
}

TEST(AssembleArtf, SingleNodeAndOrdering) {
  const AggregatedRtf one = AssembleArtf({Rtf(0, 4, 1.0)});
  ASSERT_EQ(one.num_nodes(), 1);
  EXPECT_EQ(one.per_node[0].values, Rtf(0, 4, 1.0).values);
  const AggregatedRtf a =
      AssembleArtf({Rtf(2, 4, 3.0), Rtf(0, 4, 1.0), Rtf(1, 4, 2.0)}, Vec3(1, 2, 3));
  for (int m = 0; m < 3; ++m) {
    EXPECT_EQ(a.per_node[m].node_index, m);
    EXPECT_EQ(a.per_node[m].values[0], std::complex<double>(m + 1.0));
  }
  EXPECT_EQ(*a.position, Vec3(1, 2, 3));
}

TEST(AssembleArtf, InconsistentInputsFail) {
  EXPECT_EQ(CodeOf([] { AssembleArtf({Rtf(0, 4, 1.0), Rtf(1, 5, 1.0)}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { AssembleArtf({Rtf(0, 4, 1.0), Rtf(2, 4, 1.0)}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { AssembleArtf({Rtf(0, 4, 1.0), Rtf(0, 4, 1.0)}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { AssembleArtf({}); }), ErrorCode::kInvalidArgument);
}

TEST(ExtractFeatures, OneVectorPerNode) {
  SceneConfig scene;
  scene.room_dims = Vec3(4, 5, 3);
  scene.t60 = 0.2;
  scene.nodes = {{Vec3(1, 1, 1), Vec3(1.2, 1, 1)}, {Vec3(3, 4, 1), Vec3(3, 4.2, 1)}};
  const std::vector<double> s = WhiteNoise(8000, 2);
  MeasurementRecord rec = RenderMeasurement(scene, Vec3(2, 2.5, 1.5), s, 3);
  const AggregatedRtf a = ExtractFeatures(rec, SpectralConfig{}, kFs);
  ASSERT_EQ(a.num_nodes(), 2);
  EXPECT_EQ(a.per_node[1].size(), 295);
  EXPECT_EQ(*a.position, Vec3(2, 2.5, 1.5));
  const RtfVector direct = EstimateRtf(rec, 1, SpectralConfig{}, kFs);
  EXPECT_EQ(a.per_node[1].values, direct.values);
}

}  // namespace
}  // namespace mmgp
