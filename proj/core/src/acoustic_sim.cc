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

#include "mmgp/acoustic_sim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fft.h"
#include "mmgp/dataset.h"
#include "mmgp/error.h"
#include "parallel.h"

namespace mmgp {
namespace {

// Reverberant responses are rendered to this multiple of t60 so the
// Schroeder decay reaches -60 dB before truncation.
constexpr double kTailFactor = 1.5;

bool StrictlyInside(const Vec3& p, const Vec3& dims) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dims[i])) return false;
  }
  return true;
}

std::string Format(const Vec3& p) {
  std::ostringstream os;
  os << "(" << p.x() << ", " << p.y() << ", " << p.z() << ")";
  return os.str();
}

void CheckInside(const Vec3& p, const Vec3& dims, const char* what) {
  if (!StrictlyInside(p, dims)) {
    throw Error(ErrorCode::kGeometry,
                std::string(what) + " " + Format(p) + " is outside the room");
  }
}

int AutoReflectionOrder(double beta) {
  if (beta <= 0.0) return 0;
  if (beta >= 1.0) return 1000;
  return static_cast<int>(std::ceil(std::log(1e-3) / std::log(beta)));
}

}  // namespace

std::vector<Vec3> SceneConfig::microphones() const {
  std::vector<Vec3> mics;
  mics.reserve(2 * nodes.size());
  for (const auto& node : nodes) {
    mics.push_back(node[0]);
    mics.push_back(node[1]);
  }
  return mics;
}

void SceneConfig::Validate() const {
  if ((room_dims.array() <= 0.0).any()) {
    throw Error(ErrorCode::kGeometry, "room dimensions must be positive");
  }
  if (nodes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scene needs at least one node");
  }
  if (!(t60 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "t60 < 0");
  if (!(sample_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sample_rate must be positive");
  }
  if (!(sound_speed > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sound_speed must be positive");
  }
  if (std::isnan(snr_db)) throw Error(ErrorCode::kInvalidArgument, "snr NaN");
  if (max_reflection_order && *max_reflection_order < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative reflection order");
  }
  for (const Vec3& mic : microphones()) CheckInside(mic, room_dims, "mic");
  SabineAbsorption(room_dims, t60, sound_speed);
}

double SabineAbsorption(const Vec3& room_dims, double t60,
                        double sound_speed) {
  if (t60 == 0.0) return 1.0;
  const double volume = room_dims.prod();
  const double surface =
      2.0 * (room_dims.x() * room_dims.y() + room_dims.x() * room_dims.z() +
             room_dims.y() * room_dims.z());
  const double alpha =
      24.0 * std::numbers::ln10 * volume / (sound_speed * surface * t60);
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream os;
    os << "t60=" << t60 << " s is infeasible for room " << Format(room_dims)
       << ": Sabine absorption " << alpha << " not in (0, 1)";
    throw Error(ErrorCode::kGeometry, os.str());
  }
  return alpha;
}

std::size_t RirLength(const SceneConfig& scene) {
  const double diag = scene.room_dims.norm();
  const auto direct = static_cast<std::size_t>(
      std::ceil(diag * scene.sample_rate / scene.sound_speed)) + 2;
  const auto tail = static_cast<std::size_t>(
      std::ceil(kTailFactor * scene.t60 * scene.sample_rate));
  return std::max(direct, tail);
}

std::vector<double> SimulateRir(const SceneConfig& scene, const Vec3& source,
                                const Vec3& mic) {
  CheckInside(source, scene.room_dims, "source");
  CheckInside(mic, scene.room_dims, "mic");
  if ((source - mic).norm() < 1e-9) {
    throw Error(ErrorCode::kGeometry,
                "source coincides with microphone " + Format(mic));
  }
  const double alpha =
      SabineAbsorption(scene.room_dims, scene.t60, scene.sound_speed);
  const double beta = std::sqrt(1.0 - alpha);
  const int max_order =
      scene.max_reflection_order.value_or(AutoReflectionOrder(beta));

  const std::size_t length = RirLength(scene);
  std::vector<double> rir(length, 0.0);
  const double samples_per_meter = scene.sample_rate / scene.sound_speed;
  const double max_dist = static_cast<double>(length) / samples_per_meter;
  const Vec3& room = scene.room_dims;

  std::array<int, 3> n_max;
  for (int a = 0; a < 3; ++a) {
    n_max[a] = std::min(max_order,
                        static_cast<int>(std::ceil(max_dist / (2 * room[a]))) + 1);
  }
  // Powers of beta for every reflection count we may reach.
  std::vector<double> beta_pow(3 * (2 * *std::max_element(n_max.begin(),
                                                          n_max.end()) + 2));
  for (std::size_t k = 0; k < beta_pow.size(); ++k) {
    beta_pow[k] = std::pow(beta, static_cast<double>(k));
  }

  for (int mx = -n_max[0]; mx <= n_max[0]; ++mx) {
    for (int qx = 0; qx <= 1; ++qx) {
      const double dx = (1 - 2 * qx) * source.x() + 2 * mx * room.x() - mic.x();
      const int ox = std::abs(mx - qx) + std::abs(mx);
      if (ox > max_order || std::abs(dx) > max_dist) continue;
      for (int my = -n_max[1]; my <= n_max[1]; ++my) {
        for (int qy = 0; qy <= 1; ++qy) {
          const double dy =
              (1 - 2 * qy) * source.y() + 2 * my * room.y() - mic.y();
          const int oy = ox + std::abs(my - qy) + std::abs(my);
          if (oy > max_order) continue;
          const double dxy2 = dx * dx + dy * dy;
          if (dxy2 > max_dist * max_dist) continue;
          for (int mz = -n_max[2]; mz <= n_max[2]; ++mz) {
            for (int qz = 0; qz <= 1; ++qz) {
              const double dz =
                  (1 - 2 * qz) * source.z() + 2 * mz * room.z() - mic.z();
              const int order = oy + std::abs(mz - qz) + std::abs(mz);
              if (order > max_order) continue;
              const double dist = std::sqrt(dxy2 + dz * dz);
              const auto tap = static_cast<std::size_t>(
                  std::llround(dist * samples_per_meter));
              if (tap >= length) continue;
              rir[tap] += beta_pow[order] / (4.0 * std::numbers::pi * dist);
            }
          }
        }
      }
    }
  }
  return rir;
}

void SetSpec::Validate() const {
  if (!(duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "signal duration must be > 0");
  }
  if (signal == SignalKind::kExternalFile && audio_path.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "external signal needs a path");
  }
}

std::vector<Vec3> GridPositions(const Vec3& origin, double spacing, int nx,
                                int ny) {
  if (nx < 1 || ny < 1 || !(spacing > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid grid");
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      out.push_back(origin + Vec3(i * spacing, j * spacing, 0.0));
    }
  }
  return out;
}

std::vector<Vec3> RandomPositions(const Vec3& lo, const Vec3& hi, int count,
                                  std::uint64_t seed) {
  if (count < 0 || ((hi - lo).array() < 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "invalid random region");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> out(count);
  for (Vec3& p : out) {
    for (int a = 0; a < 3; ++a) p[a] = lo[a] + (hi[a] - lo[a]) * unit(rng);
  }
  return out;
}

MeasurementRecord RenderMeasurement(const SceneConfig& scene,
                                    const Vec3& source,
                                    std::span<const double> signal,
                                    std::uint64_t seed) {
  if (signal.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "source signal is empty");
  }
  const std::vector<Vec3> mics = scene.microphones();
  MeasurementRecord record;
  record.position = source;
  record.channels.resize(mics.size());
  const bool add_noise = std::isfinite(scene.snr_db);
  internal::ParallelFor(mics.size(), [&](std::size_t c) {
    const std::vector<double> rir = SimulateRir(scene, source, mics[c]);
    std::vector<double> y = internal::FftConvolve(rir, signal);
    if (add_noise) {
      // Power over the active support of the clean channel.
      std::size_t first = 0, last = y.size();
      while (first < y.size() && y[first] == 0.0) ++first;
      while (last > first && y[last - 1] == 0.0) --last;
      double power = 0.0;
      for (std::size_t i = first; i < last; ++i) power += y[i] * y[i];
      if (last > first) power /= static_cast<double>(last - first);
      const double sigma = std::sqrt(power * std::pow(10.0, -scene.snr_db / 10));
      // seed_seq keeps 32 bits per entry.
      std::seed_seq seq{static_cast<std::uint32_t>(seed),
                        static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(c), 0x6e6f6973u};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, sigma);
      for (double& v : y) v += normal(rng);
    }
    record.channels[c] = std::move(y);
  });
  return record;
}

DatasetManifest GenerateDataset(const SceneConfig& scene,
                                const LabeledSpec& labelled,
                                const UnlabeledSpec& unlabelled,
                                const TestSpec& test,
                                const std::filesystem::path& out_dir,
                                const std::string& config_hash) {
  scene.Validate();
  struct Job {
    const SetSpec* spec;
    Role role;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (auto [spec, role] : {std::pair{&labelled, Role::kLabelled},
                            std::pair{&unlabelled, Role::kUnlabelled},
                            std::pair{&test, Role::kTest}}) {
    if (!spec->positions.empty()) spec->Validate();
    for (std::size_t i = 0; i < spec->positions.size(); ++i) {
      CheckInside(spec->positions[i], scene.room_dims, "source");
      jobs.push_back({spec, role, i});
    }
  }

  std::filesystem::create_directories(out_dir / "signals");
  DatasetManifest manifest;
  manifest.config_hash = config_hash;
  manifest.scene = scene;
  manifest.records.resize(jobs.size());

  // Records are rendered one after another; each record already spreads its
  // channels over the worker pool.
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const char prefix = job.role == Role::kLabelled     ? 'L'
                        : job.role == Role::kUnlabelled ? 'U'
                                                        : 'T';
    char id[16];
    std::snprintf(id, sizeof(id), "%c%04zu", prefix, job.index);
    const std::uint64_t seed = job.spec->seed + job.index;
    const Vec3& pos = job.spec->positions[job.index];
    const std::vector<double> signal =
        MakeSourceSignal(*job.spec, scene.sample_rate, seed);
    const MeasurementRecord record = RenderMeasurement(
        scene, pos, signal, seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    RecordEntry& entry = manifest.records[j];
    entry.id = id;
    entry.role = job.role;
    entry.position = pos;
    entry.signal_file = std::string("signals/") + id + ".f64";
    WriteRecordSignals(out_dir / entry.signal_file, record);
  }

  // The evaluation manifest keeps every true position; the working manifest
  // keeps labelled positions only.
  WriteManifest(out_dir / kEvaluationManifestName, manifest);
  DatasetManifest visible = manifest;
  for (RecordEntry& e : visible.records) {
    if (e.role != Role::kLabelled) e.position.reset();
  }
  WriteManifest(out_dir / kManifestName, visible);
  return visible;
}

}  // namespace mmgp
