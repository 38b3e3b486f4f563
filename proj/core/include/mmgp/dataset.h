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

#ifndef MMGP_DATASET_H_
#define MMGP_DATASET_H_

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmgp/acoustic_sim.h"
#include "mmgp/rtf_features.h"
#include "mmgp/types.h"

namespace mmgp {

// Binary blobs: 16-byte little-endian header {magic "MGBL", version,
// dtype code, element count} followed by the payload.
inline constexpr std::uint32_t kBlobVersion = 1;
enum class BlobType : std::uint32_t { kFloat64 = 1, kComplex64 = 2 };

void WriteF64Blob(const std::filesystem::path& path,
                  std::span<const double> values);
std::vector<double> ReadF64Blob(const std::filesystem::path& path);

// complex64: interleaved float32 real/imag pairs.
void WriteC64Blob(const std::filesystem::path& path,
                  std::span<const std::complex<double>> values);
std::vector<std::complex<double>> ReadC64Blob(
    const std::filesystem::path& path);

enum class Role { kLabelled, kUnlabelled, kTest };
std::string RoleName(Role role);
Role ParseRole(const std::string& name);

struct RecordEntry {
  std::string id;
  Role role = Role::kLabelled;
  std::optional<Vec3> position;
  std::string signal_file;   // relative to the dataset directory
  std::string feature_file;  // empty until features are extracted
};

struct FeatureInfo {
  SpectralConfig spectral;
  int num_nodes = 0;
  int dim = 0;
  std::vector<double> bin_frequencies;
  std::string hash;
};

// manifest.json of a dataset directory. The evaluation manifest
// (evaluation.json) is the same document with test positions filled in.
struct DatasetManifest {
  int version = 1;
  std::string config_hash;
  SceneConfig scene;
  std::vector<RecordEntry> records;
  std::optional<FeatureInfo> features;

  std::vector<const RecordEntry*> WithRole(Role role) const;
  void Validate() const;
};

inline constexpr char kManifestName[] = "manifest.json";
inline constexpr char kEvaluationManifestName[] = "evaluation.json";

void WriteManifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest);
DatasetManifest ReadManifest(const std::filesystem::path& path);

// Channel-major signal blob of one record.
void WriteRecordSignals(const std::filesystem::path& path,
                        const MeasurementRecord& record);
MeasurementRecord ReadRecordSignals(const std::filesystem::path& path,
                                    int num_channels);

// Node-major feature blob (M * D complex values).
void WriteRecordFeatures(const std::filesystem::path& path,
                         const AggregatedRtf& features);
AggregatedRtf ReadRecordFeatures(const std::filesystem::path& path,
                                 const FeatureInfo& info);

// Loads the feature blobs of every record with `role`, in manifest order.
std::vector<AggregatedRtf> LoadFeatures(const std::filesystem::path& dir,
                                        const DatasetManifest& manifest,
                                        Role role);

// FNV-1a 64 of `text`, as 16 lowercase hex digits.
std::string HashHex(std::string_view text);

}  // namespace mmgp

#endif  // MMGP_DATASET_H_
