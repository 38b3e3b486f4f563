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

#ifndef MMGP_ACOUSTIC_SIM_H_
#define MMGP_ACOUSTIC_SIM_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmgp/types.h"

namespace mmgp {

struct DatasetManifest;

// Shoebox room with M two-microphone nodes. Positions are in meters with the
// room spanning [0, room_dims] on every axis.
struct SceneConfig {
  Vec3 room_dims = Vec3(6.0, 6.2, 4.0);
  std::vector<std::array<Vec3, 2>> nodes;
  double t60 = 0.0;
  // +infinity disables sensor noise.
  double snr_db = std::numeric_limits<double>::infinity();
  double sample_rate = 16000.0;
  double sound_speed = 343.0;
  // Empty selects the order at which image paths fall below -60 dB.
  std::optional<int> max_reflection_order;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  std::vector<Vec3> microphones() const;

  // Throws Error(kGeometry / kInvalidArgument) when an invariant is broken.
  void Validate() const;
};

// Uniform wall absorption from Sabine's formula. Zero for an anechoic scene.
// Throws when t60 is too short for the geometry (absorption >= 1).
double SabineAbsorption(const Vec3& room_dims, double t60, double sound_speed);

// Number of taps of every impulse response rendered for `scene`.
std::size_t RirLength(const SceneConfig& scene);

// Image-method room impulse response from `source` to `mic`. Path delays
// are rounded to the nearest sample.
std::vector<double> SimulateRir(const SceneConfig& scene, const Vec3& source,
                                const Vec3& mic);

enum class SignalKind { kWhiteNoise, kSpeechSurrogate, kExternalFile };

SignalKind ParseSignalKind(const std::string& name);
std::string SignalKindName(SignalKind kind);

// Unit-variance white Gaussian noise.
std::vector<double> WhiteNoise(std::size_t num_samples, std::uint64_t seed);

// Band-limited, slowly modulated noise occupying roughly the 0.2-2.5 kHz
// range of speech, normalized to unit power.
std::vector<double> SpeechSurrogate(std::size_t num_samples,
                                    double sample_rate, std::uint64_t seed);

// Mono audio from a `.f64` blob or a 16-bit PCM WAV file.
std::vector<double> LoadAudio(const std::filesystem::path& path);

// Source positions and signal recipe for one of the labelled, unlabelled or
// test sets. Record i uses seed `seed + i`.
struct SetSpec {
  std::vector<Vec3> positions;
  SignalKind signal = SignalKind::kWhiteNoise;
  std::string audio_path;
  double duration_s = 1.0;
  std::uint64_t seed = 0;

  void Validate() const;
};
using LabeledSpec = SetSpec;
using UnlabeledSpec = SetSpec;
using TestSpec = SetSpec;

// Row-major grid starting at `origin` in the xy-plane.
std::vector<Vec3> GridPositions(const Vec3& origin, double spacing, int nx,
                                int ny);
std::vector<Vec3> RandomPositions(const Vec3& lo, const Vec3& hi, int count,
                                  std::uint64_t seed);

std::vector<double> MakeSourceSignal(const SetSpec& spec, double sample_rate,
                                     std::uint64_t seed);

// Convolves `signal` with every microphone's impulse response and adds white
// sensor noise at the scene's per-channel SNR. Output length is
// signal.size() + RirLength(scene) - 1.
MeasurementRecord RenderMeasurement(const SceneConfig& scene,
                                    const Vec3& source,
                                    std::span<const double> signal,
                                    std::uint64_t seed);

// Renders all three sets and writes a dataset directory (manifest.json plus
// signals/*.f64). `config_hash` is stamped into the manifest.
DatasetManifest GenerateDataset(const SceneConfig& scene,
                                const LabeledSpec& labelled,
                                const UnlabeledSpec& unlabelled,
                                const TestSpec& test,
                                const std::filesystem::path& out_dir,
                                const std::string& config_hash);

}  // namespace mmgp

#endif  // MMGP_ACOUSTIC_SIM_H_
