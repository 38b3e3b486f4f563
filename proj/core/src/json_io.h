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

#ifndef MMGP_SRC_JSON_IO_H_
#define MMGP_SRC_JSON_IO_H_

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "mmgp/acoustic_sim.h"
#include "mmgp/error.h"
#include "mmgp/rtf_features.h"

namespace mmgp::internal {

using nlohmann::json;

inline Vec3 ToVec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected a 3-vector, got " + j.dump());
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json FromVec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json SceneToJson(const SceneConfig& s) {
  json nodes = json::array();
  for (const auto& n : s.nodes) nodes.push_back({FromVec3(n[0]), FromVec3(n[1])});
  json j = {{"room_dims", FromVec3(s.room_dims)},
            {"nodes", nodes},
            {"t60", s.t60},
            {"sample_rate", s.sample_rate},
            {"sound_speed", s.sound_speed}};
  j["snr_db"] = std::isfinite(s.snr_db) ? json(s.snr_db) : json(nullptr);
  j["max_reflection_order"] = s.max_reflection_order
                                  ? json(*s.max_reflection_order)
                                  : json("auto");
  return j;
}

inline SceneConfig SceneFromJson(const json& j) {
  SceneConfig s;
  s.room_dims = ToVec3(j.at("room_dims"));
  for (const json& n : j.at("nodes")) {
    if (!n.is_array() || n.size() != 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "each node needs exactly two microphones");
    }
    s.nodes.push_back({ToVec3(n[0]), ToVec3(n[1])});
  }
  s.t60 = j.value("t60", 0.0);
  const json snr = j.value("snr_db", json(nullptr));
  s.snr_db = snr.is_null() ? std::numeric_limits<double>::infinity()
                           : snr.get<double>();
  s.sample_rate = j.value("sample_rate", 16000.0);
  s.sound_speed = j.value("sound_speed", 343.0);
  const json order = j.value("max_reflection_order", json("auto"));
  if (order.is_number_integer()) s.max_reflection_order = order.get<int>();
  return s;
}

inline json SpectralToJson(const SpectralConfig& c) {
  return {{"window_length_s", c.window_length_s},
          {"overlap_fraction", c.overlap_fraction},
          {"fft_size", c.fft_size},
          {"band_low_hz", c.band_low_hz},
          {"band_high_hz", c.band_high_hz},
          {"window", "hann"}};
}

inline SpectralConfig SpectralFromJson(const json& j) {
  SpectralConfig c;
  c.window_length_s = j.value("window_length_s", c.window_length_s);
  c.overlap_fraction = j.value("overlap_fraction", c.overlap_fraction);
  c.fft_size = j.value("fft_size", c.fft_size);
  c.band_low_hz = j.value("band_low_hz", c.band_low_hz);
  c.band_high_hz = j.value("band_high_hz", c.band_high_hz);
  if (j.value("window", std::string("hann")) != "hann") {
    throw Error(ErrorCode::kInvalidArgument, "only the Hann window is supported");
  }
  return c;
}

}  // namespace mmgp::internal

#endif  // MMGP_SRC_JSON_IO_H_
