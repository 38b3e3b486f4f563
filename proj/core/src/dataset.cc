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

#include "mmgp/dataset.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

#include "json_io.h"
#include "mmgp/error.h"

namespace mmgp {
namespace {

static_assert(std::endian::native == std::endian::little,
              "blobs are written in host byte order");

using internal::json;

constexpr char kBlobMagic[4] = {'M', 'G', 'B', 'L'};

struct BlobHeader {
  char magic[4];
  std::uint32_t version;
  std::uint32_t dtype;
  std::uint32_t count;
};
static_assert(sizeof(BlobHeader) == 16);

void WriteBlob(const std::filesystem::path& path, BlobType type,
               std::size_t count, const void* data, std::size_t bytes) {
  if (count > 0xffffffffu) {
    throw Error(ErrorCode::kInvalidArgument, "blob too large: " + path.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  BlobHeader h;
  std::memcpy(h.magic, kBlobMagic, 4);
  h.version = kBlobVersion;
  h.dtype = static_cast<std::uint32_t>(type);
  h.count = static_cast<std::uint32_t>(count);
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<char> ReadBlob(const std::filesystem::path& path, BlobType type,
                           std::size_t element_size, std::size_t* count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  BlobHeader h;
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!in || std::memcmp(h.magic, kBlobMagic, 4) != 0) {
    throw Error(ErrorCode::kIo, "not a blob file: " + path.string());
  }
  if (h.version != kBlobVersion || h.dtype != static_cast<std::uint32_t>(type)) {
    throw Error(ErrorCode::kIo, "unexpected blob version/type: " + path.string());
  }
  std::vector<char> data(static_cast<std::size_t>(h.count) * element_size);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (!in) throw Error(ErrorCode::kIo, "truncated blob: " + path.string());
  *count = h.count;
  return data;
}

json FeatureInfoToJson(const FeatureInfo& f) {
  return {{"spectral", internal::SpectralToJson(f.spectral)},
          {"num_nodes", f.num_nodes},
          {"dim", f.dim},
          {"bin_frequencies", f.bin_frequencies},
          {"hash", f.hash}};
}

FeatureInfo FeatureInfoFromJson(const json& j) {
  FeatureInfo f;
  f.spectral = internal::SpectralFromJson(j.at("spectral"));
  f.num_nodes = j.at("num_nodes").get<int>();
  f.dim = j.at("dim").get<int>();
  f.bin_frequencies = j.at("bin_frequencies").get<std::vector<double>>();
  f.hash = j.value("hash", std::string());
  return f;
}

}  // namespace

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kGeometry:
      return "geometry";
    case ErrorCode::kNumerical:
      return "numerical";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kHashMismatch:
      return "hash_mismatch";
  }
  return "unknown";
}

void WriteF64Blob(const std::filesystem::path& path,
                  std::span<const double> values) {
  WriteBlob(path, BlobType::kFloat64, values.size(), values.data(),
            values.size_bytes());
}

std::vector<double> ReadF64Blob(const std::filesystem::path& path) {
  std::size_t count = 0;
  const std::vector<char> raw = ReadBlob(path, BlobType::kFloat64, 8, &count);
  std::vector<double> out(count);
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void WriteC64Blob(const std::filesystem::path& path,
                  std::span<const std::complex<double>> values) {
  std::vector<float> packed(2 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    packed[2 * i] = static_cast<float>(values[i].real());
    packed[2 * i + 1] = static_cast<float>(values[i].imag());
  }
  WriteBlob(path, BlobType::kComplex64, values.size(), packed.data(),
            packed.size() * sizeof(float));
}

std::vector<std::complex<double>> ReadC64Blob(
    const std::filesystem::path& path) {
  std::size_t count = 0;
  const std::vector<char> raw = ReadBlob(path, BlobType::kComplex64, 8, &count);
  std::vector<float> packed(2 * count);
  std::memcpy(packed.data(), raw.data(), raw.size());
  std::vector<std::complex<double>> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = {packed[2 * i], packed[2 * i + 1]};
  }
  return out;
}

std::string RoleName(Role role) {
  switch (role) {
    case Role::kLabelled:
      return "labelled";
    case Role::kUnlabelled:
      return "unlabelled";
    case Role::kTest:
      return "test";
  }
  return "?";
}

Role ParseRole(const std::string& name) {
  if (name == "labelled") return Role::kLabelled;
  if (name == "unlabelled") return Role::kUnlabelled;
  if (name == "test") return Role::kTest;
  throw Error(ErrorCode::kInvalidArgument, "unknown record role: " + name);
}

std::vector<const RecordEntry*> DatasetManifest::WithRole(Role role) const {
  std::vector<const RecordEntry*> out;
  for (const RecordEntry& r : records) {
    if (r.role == role) out.push_back(&r);
  }
  return out;
}

void DatasetManifest::Validate() const {
  std::set<std::string> ids;
  for (const RecordEntry& r : records) {
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate record id " + r.id);
    }
    if (r.role == Role::kLabelled && !r.position) {
      throw Error(ErrorCode::kInvalidArgument,
                  "labelled record " + r.id + " has no position");
    }
  }
}

void WriteManifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest) {
  manifest.Validate();
  json records = json::array();
  for (const RecordEntry& r : manifest.records) {
    json e = {{"id", r.id},
              {"role", RoleName(r.role)},
              {"signal_file", r.signal_file}};
    if (r.position) e["position"] = internal::FromVec3(*r.position);
    if (!r.feature_file.empty()) e["feature_file"] = r.feature_file;
    records.push_back(std::move(e));
  }
  json j = {{"format_version", manifest.version},
            {"config_hash", manifest.config_hash},
            {"scene", internal::SceneToJson(manifest.scene)},
            {"num_channels", 2 * manifest.scene.num_nodes()},
            {"records", records}};
  if (manifest.features) j["features"] = FeatureInfoToJson(*manifest.features);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

DatasetManifest ReadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed manifest " + path.string() + ": " +
                                    e.what());
  }
  try {
    DatasetManifest m;
    m.version = j.at("format_version").get<int>();
    if (m.version != 1) {
      throw Error(ErrorCode::kIo, "unsupported manifest version");
    }
    m.config_hash = j.value("config_hash", std::string());
    m.scene = internal::SceneFromJson(j.at("scene"));
    for (const json& e : j.at("records")) {
      RecordEntry r;
      r.id = e.at("id").get<std::string>();
      r.role = ParseRole(e.at("role").get<std::string>());
      r.signal_file = e.value("signal_file", std::string());
      r.feature_file = e.value("feature_file", std::string());
      if (e.contains("position")) r.position = internal::ToVec3(e["position"]);
      m.records.push_back(std::move(r));
    }
    if (j.contains("features")) m.features = FeatureInfoFromJson(j["features"]);
    m.Validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed manifest " + path.string() + ": " +
                                    e.what());
  }
}

void WriteRecordSignals(const std::filesystem::path& path,
                        const MeasurementRecord& record) {
  const std::size_t n = record.num_samples();
  std::vector<double> flat;
  flat.reserve(n * record.channels.size());
  for (const auto& ch : record.channels) {
    if (ch.size() != n) {
      throw Error(ErrorCode::kInvalidArgument, "channels differ in length");
    }
    flat.insert(flat.end(), ch.begin(), ch.end());
  }
  WriteF64Blob(path, flat);
}

MeasurementRecord ReadRecordSignals(const std::filesystem::path& path,
                                    int num_channels) {
  const std::vector<double> flat = ReadF64Blob(path);
  if (num_channels < 1 || flat.size() % num_channels != 0) {
    throw Error(ErrorCode::kIo, "signal blob does not split into " +
                                    std::to_string(num_channels) + " channels");
  }
  const std::size_t n = flat.size() / num_channels;
  MeasurementRecord record;
  for (int c = 0; c < num_channels; ++c) {
    record.channels.emplace_back(flat.begin() + c * n, flat.begin() + (c + 1) * n);
  }
  return record;
}

void WriteRecordFeatures(const std::filesystem::path& path,
                         const AggregatedRtf& features) {
  std::vector<std::complex<double>> flat;
  for (const RtfVector& v : features.per_node) {
    flat.insert(flat.end(), v.values.data(), v.values.data() + v.values.size());
  }
  WriteC64Blob(path, flat);
}

AggregatedRtf ReadRecordFeatures(const std::filesystem::path& path,
                                 const FeatureInfo& info) {
  const std::vector<std::complex<double>> flat = ReadC64Blob(path);
  if (flat.size() != static_cast<std::size_t>(info.num_nodes) * info.dim) {
    throw Error(ErrorCode::kIo, "feature blob size mismatch: " + path.string());
  }
  const Eigen::Map<const Eigen::VectorXd> freqs(info.bin_frequencies.data(),
                                                info.dim);
  std::vector<RtfVector> nodes(info.num_nodes);
  for (int m = 0; m < info.num_nodes; ++m) {
    nodes[m].node_index = m;
    nodes[m].values = Eigen::Map<const Eigen::VectorXcd>(
        flat.data() + static_cast<std::size_t>(m) * info.dim, info.dim);
    nodes[m].bin_frequencies = freqs;
  }
  return AssembleArtf(std::move(nodes));
}

std::vector<AggregatedRtf> LoadFeatures(const std::filesystem::path& dir,
                                        const DatasetManifest& manifest,
                                        Role role) {
  if (!manifest.features) {
    throw Error(ErrorCode::kInvalidArgument,
                "dataset has no features; run the features command first");
  }
  std::vector<AggregatedRtf> out;
  for (const RecordEntry* r : manifest.WithRole(role)) {
    if (r->feature_file.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "record " + r->id + " has no feature file");
    }
    AggregatedRtf a = ReadRecordFeatures(dir / r->feature_file, *manifest.features);
    a.position = r->position;
    out.push_back(std::move(a));
  }
  return out;
}

std::string HashHex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mmgp
