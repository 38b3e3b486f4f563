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

// Source signals for the simulator.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mmgp/acoustic_sim.h"
#include "mmgp/dataset.h"
#include "mmgp/error.h"

namespace mmgp {
namespace {

void NormalizePower(std::vector<double>& x) {
  double power = 0.0;
  for (double v : x) power += v * v;
  power /= static_cast<double>(x.size());
  if (power <= 0.0) return;
  const double g = 1.0 / std::sqrt(power);
  for (double& v : x) v *= g;
}

template <typename T>
T ReadLe(const std::vector<char>& buf, std::size_t pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

std::vector<double> LoadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::kIo, "not a RIFF/WAVE file: " + path.string());
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto len = ReadLe<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size()) break;
    if (id == "fmt " && len >= 16) {
      format = ReadLe<std::uint16_t>(buf, body);
      channels = ReadLe<std::uint16_t>(buf, body + 2);
      bits = ReadLe<std::uint16_t>(buf, body + 14);
    } else if (id == "data") {
      if (format != 1 || bits != 16 || channels == 0) {
        throw Error(ErrorCode::kIo,
                    "only 16-bit PCM WAV is supported: " + path.string());
      }
      const std::size_t frames = len / (2u * channels);
      std::vector<double> out(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        out[i] = ReadLe<std::int16_t>(buf, body + 2 * i * channels) / 32768.0;
      }
      return out;
    }
    pos = body + len + (len & 1u);
  }
  throw Error(ErrorCode::kIo, "WAV file has no data chunk: " + path.string());
}

}  // namespace

SignalKind ParseSignalKind(const std::string& name) {
  if (name == "wgn" || name == "white_noise") return SignalKind::kWhiteNoise;
  if (name == "speech" || name == "speech_surrogate") {
    return SignalKind::kSpeechSurrogate;
  }
  if (name == "file") return SignalKind::kExternalFile;
  throw Error(ErrorCode::kInvalidArgument, "unknown signal kind: " + name);
}

std::string SignalKindName(SignalKind kind) {
  switch (kind) {
    case SignalKind::kWhiteNoise:
      return "wgn";
    case SignalKind::kSpeechSurrogate:
      return "speech";
    case SignalKind::kExternalFile:
      return "file";
  }
  return "?";
}

std::vector<double> WhiteNoise(std::size_t num_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(num_samples);
  for (double& v : x) v = normal(rng);
  return x;
}

std::vector<double> SpeechSurrogate(std::size_t num_samples,
                                    double sample_rate, std::uint64_t seed) {
  std::vector<double> x = WhiteNoise(num_samples, seed);

  // Second-order Butterworth low-pass at the top of the speech band; the
  // flat noise floor below it covers the low end.
  constexpr double kCutoffHz = 2500.0;
  const double w0 = 2.0 * std::numbers::pi * kCutoffHz / sample_rate;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double a0 = 1.0 + alpha;
  const double b1 = (1.0 - std::cos(w0)) / a0, b0 = 0.5 * b1, b2 = b0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }

  // Slow 4 Hz envelope: random knot levels joined by raised-cosine ramps.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> level(0.1, 1.0);
  const std::size_t knot = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(sample_rate / 4.0)));
  double from = level(rng), to = level(rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t phase = i % knot;
    if (i > 0 && phase == 0) {
      from = to;
      to = level(rng);
    }
    const double t = static_cast<double>(phase) / static_cast<double>(knot);
    const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * t);
    x[i] *= from + (to - from) * w;
  }
  NormalizePower(x);
  return x;
}

std::vector<double> LoadAudio(const std::filesystem::path& path) {
  if (path.extension() == ".wav") return LoadWav(path);
  return ReadF64Blob(path);
}

std::vector<double> MakeSourceSignal(const SetSpec& spec, double sample_rate,
                                     std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(
      std::llround(spec.duration_s * sample_rate));
  switch (spec.signal) {
    case SignalKind::kWhiteNoise:
      return WhiteNoise(n, seed);
    case SignalKind::kSpeechSurrogate:
      return SpeechSurrogate(n, sample_rate, seed);
    case SignalKind::kExternalFile: {
      std::vector<double> audio = LoadAudio(spec.audio_path);
      if (audio.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "empty audio file: " + spec.audio_path);
      }
      if (audio.size() > n) audio.resize(n);
      return audio;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "bad signal kind");
}

}  // namespace mmgp
