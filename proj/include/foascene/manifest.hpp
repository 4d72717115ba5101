// Copyright 2026 The foascene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FOASCENE_MANIFEST_HPP_
#define FOASCENE_MANIFEST_HPP_

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "foascene/scene_model.hpp"

namespace foascene {

// Insertion-ordered JSON keeps dumps deterministic and human-scannable.
using Json = nlohmann::ordered_json;

inline Json vec3_to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("expected [x, y, z] array");
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json source_to_json(const SourceMeta& s) {
  Json j;
  j["label"] = s.label;
  if (s.language) j["language"] = language_code(*s.language);
  j["onset_s"] = s.onset_s;
  j["offset_s"] = s.offset_s;
  j["zone"] = zone_name(s.zone);
  j["distance_m"] = s.distance_m;
  j["loudness_dba"] = s.loudness_dba;
  j["c50_db"] = s.c50_db;
  return j;
}

inline SourceMeta source_from_json(const Json& j) {
  SourceMeta s;
  s.label = j.at("label").get<std::string>();
  if (j.contains("language") && !j["language"].is_null()) {
    auto lang = language_from_code(j["language"].get<std::string>());
    if (!lang) throw Error("unknown language code: " + j["language"].dump());
    s.language = *lang;
  }
  s.onset_s = j.at("onset_s").get<double>();
  s.offset_s = j.at("offset_s").get<double>();
  auto zone = zone_from_name(j.at("zone").get<std::string>());
  if (!zone) throw Error("unknown zone name: " + j["zone"].dump());
  s.zone = *zone;
  s.distance_m = j.at("distance_m").get<double>();
  s.loudness_dba = j.at("loudness_dba").get<double>();
  s.c50_db = j.at("c50_db").get<double>();
  return s;
}

inline Json scene_to_json(const SceneMeta& scene) {
  Json j;
  j["room_volume_m3"] = scene.room_volume_m3;
  j["rt60_s"] = scene.rt60_s;
  j["n_src"] = scene.n_src;
  j["noise_label"] = scene.noise_label;
  j["noise_loudness_db"] = scene.noise_loudness_db;
  j["sources"] = Json::array();
  for (const auto& s : scene.sources) j["sources"].push_back(source_to_json(s));
  return j;
}

inline SceneMeta scene_from_json(const Json& j) {
  SceneMeta scene;
  scene.room_volume_m3 = j.at("room_volume_m3").get<double>();
  scene.rt60_s = j.at("rt60_s").get<double>();
  scene.n_src = j.at("n_src").get<int>();
  scene.noise_label = j.at("noise_label").get<std::string>();
  scene.noise_loudness_db = j.at("noise_loudness_db").get<double>();
  for (const auto& js : j.at("sources")) scene.sources.push_back(source_from_json(js));
  return scene;
}

inline Json room_to_json(const RoomSpec& room) {
  Json j;
  j["lx"] = room.lx;
  j["ly"] = room.ly;
  j["lz"] = room.lz;
  j["mic_position"] = vec3_to_json(room.mic_position);
  j["wall_absorption"] = room.wall_absorption;
  j["candidate_source_positions"] = Json::array();
  for (const auto& p : room.candidate_source_positions)
    j["candidate_source_positions"].push_back(vec3_to_json(p));
  return j;
}

inline RoomSpec room_from_json(const Json& j) {
  RoomSpec room;
  room.lx = j.at("lx").get<double>();
  room.ly = j.at("ly").get<double>();
  room.lz = j.at("lz").get<double>();
  room.mic_position = vec3_from_json(j.at("mic_position"));
  auto absorptions = j.at("wall_absorption");
  if (absorptions.size() != 6) throw Error("wall_absorption needs 6 entries");
  for (std::size_t i = 0; i < 6; ++i)
    room.wall_absorption[i] = absorptions[i].get<double>();
  for (const auto& jp : j.at("candidate_source_positions"))
    room.candidate_source_positions.push_back(vec3_from_json(jp));
  return room;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace foascene

#endif  // FOASCENE_MANIFEST_HPP_
