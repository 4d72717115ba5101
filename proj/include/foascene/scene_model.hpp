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

#ifndef FOASCENE_SCENE_MODEL_HPP_
#define FOASCENE_SCENE_MODEL_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "foascene/common.hpp"

namespace foascene {

inline constexpr int kMaxSources = 5;
inline constexpr int kNumZones = 26;

// Elevation bands. Polar caps carry no azimuth octant.
enum class Band { kAbove, kUpper, kHorizontal, kLower, kBelow };

// Azimuth octants, counterclockwise from front (+x). Each spans 45 degrees
// centered on its named direction.
enum class Octant {
  kFront,
  kFrontLeft,
  kLeft,
  kBackLeft,
  kBack,
  kBackRight,
  kRight,
  kFrontRight
};

struct DirectionZone {
  Band band = Band::kHorizontal;
  std::optional<Octant> octant = Octant::kFront;

  friend bool operator==(const DirectionZone&, const DirectionZone&) = default;
};

inline bool zone_is_polar(const DirectionZone& z) {
  return z.band == Band::kAbove || z.band == Band::kBelow;
}

/// Maps a direction to its zone. Band thresholds: |el| <= 22.5 horizontal,
/// 22.5 < |el| < 67.5 upper/lower, |el| >= 67.5 above/below. Octant
/// boundaries sit at odd multiples of 22.5 degrees azimuth and are half-open
/// toward increasing azimuth.
inline DirectionZone quantize_direction(double azimuth_deg,
                                        double elevation_deg) {
  DirectionZone z;
  if (elevation_deg >= 67.5) {
    z.band = Band::kAbove;
    z.octant.reset();
    return z;
  }
  if (elevation_deg <= -67.5) {
    z.band = Band::kBelow;
    z.octant.reset();
    return z;
  }
  if (elevation_deg > 22.5) {
    z.band = Band::kUpper;
  } else if (elevation_deg < -22.5) {
    z.band = Band::kLower;
  } else {
    z.band = Band::kHorizontal;
  }
  double a = wrap_azimuth_deg(azimuth_deg) + 22.5;
  if (a < 0.0) a += 360.0;
  int k = static_cast<int>(std::floor(a / 45.0));
  if (k > 7) k = 0;  // az exactly 337.5 after shift wraps to front
  z.octant = static_cast<Octant>(k);
  return z;
}

inline DirectionZone quantize_direction(const Vec3& unit_dir) {
  AzEl ae = angles_from_direction(unit_dir);
  return quantize_direction(ae.azimuth_deg, ae.elevation_deg);
}

/// Center direction of a zone: octant center azimuth and band center
/// elevation; poles map straight up/down.
inline Vec3 zone_center(const DirectionZone& z) {
  if (z.band == Band::kAbove) return Vec3{0.0, 0.0, 1.0};
  if (z.band == Band::kBelow) return Vec3{0.0, 0.0, -1.0};
  double az = 45.0 * static_cast<double>(static_cast<int>(*z.octant));
  if (az > 180.0) az -= 360.0;
  double el = z.band == Band::kUpper ? 45.0 : z.band == Band::kLower ? -45.0 : 0.0;
  return direction_from_angles(az, el);
}

/// Great-circle angle between zone centers, degrees in [0, 180].
inline double zone_angle_error(const DirectionZone& a, const DirectionZone& b) {
  return angle_between_deg(zone_center(a), zone_center(b));
}

inline const std::array<DirectionZone, kNumZones>& all_zones() {
  static const std::array<DirectionZone, kNumZones> zones = [] {
    std::array<DirectionZone, kNumZones> out{};
    out[0] = DirectionZone{Band::kAbove, std::nullopt};
    out[1] = DirectionZone{Band::kBelow, std::nullopt};
    int i = 2;
    for (Band b : {Band::kUpper, Band::kHorizontal, Band::kLower}) {
      for (int o = 0; o < 8; ++o) {
        out[i++] = DirectionZone{b, static_cast<Octant>(o)};
      }
    }
    return out;
  }();
  return zones;
}

inline int zone_index(const DirectionZone& z) {
  if (z.band == Band::kAbove) return 0;
  if (z.band == Band::kBelow) return 1;
  int band_row = z.band == Band::kUpper ? 0 : z.band == Band::kHorizontal ? 1 : 2;
  return 2 + band_row * 8 + static_cast<int>(*z.octant);
}

inline const char* octant_name(Octant o) {
  switch (o) {
    case Octant::kFront: return "front";
    case Octant::kFrontLeft: return "front-left";
    case Octant::kLeft: return "left";
    case Octant::kBackLeft: return "back-left";
    case Octant::kBack: return "back";
    case Octant::kBackRight: return "back-right";
    case Octant::kRight: return "right";
    case Octant::kFrontRight: return "front-right";
  }
  return "front";
}

inline std::string zone_name(const DirectionZone& z) {
  switch (z.band) {
    case Band::kAbove: return "above";
    case Band::kBelow: return "below";
    case Band::kUpper: return std::string("upper ") + octant_name(*z.octant);
    case Band::kHorizontal:
      return std::string("horizontal ") + octant_name(*z.octant);
    case Band::kLower: return std::string("lower ") + octant_name(*z.octant);
  }
  return "horizontal front";
}

/// Case-insensitive lookup against the 26 canonical labels. Interior
/// whitespace is collapsed; en dashes in names are not accepted (labels use
/// ASCII hyphens only).
inline std::optional<DirectionZone> zone_from_name(const std::string& name) {
  std::string key;
  bool in_space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = !key.empty();
      continue;
    }
    if (in_space) key.push_back(' ');
    in_space = false;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (const auto& z : all_zones()) {
    if (key == zone_name(z)) return z;
  }
  return std::nullopt;
}

// Scalar quantization grids.
enum class ScalarKind { kDistance, kTime, kRt60, kLoudness, kC50, kRoomVolume };

/// Rounds half-up onto the grid for the kind. Result doubles are canonical
/// decimals: the quantized value compares bit-equal to strtod of its decimal
/// rendering, so text round trips are exact. Room volume clamps to the 100
/// minimum grid point.
inline double quantize_scalar(double value, ScalarKind kind) {
  if (!std::isfinite(value)) throw Error("quantize_scalar: non-finite input");
  switch (kind) {
    case ScalarKind::kDistance:
    case ScalarKind::kTime:
    case ScalarKind::kRt60: {
      double ticks = std::floor(value * 10.0 + 0.5);
      return ticks / 10.0;
    }
    case ScalarKind::kLoudness:
    case ScalarKind::kC50:
      return std::floor(value + 0.5);
    case ScalarKind::kRoomVolume: {
      double ticks = std::floor(value / 100.0 + 0.5);
      if (ticks < 1.0) ticks = 1.0;
      return ticks * 100.0;
    }
  }
  throw Error("quantize_scalar: bad kind");
}

// Speech languages carried in source metadata.
enum class Language { kEn, kZh, kDe, kFr, kIt, kJa, kEs, kPt };

inline const char* language_code(Language l) {
  switch (l) {
    case Language::kEn: return "en";
    case Language::kZh: return "zh";
    case Language::kDe: return "de";
    case Language::kFr: return "fr";
    case Language::kIt: return "it";
    case Language::kJa: return "ja";
    case Language::kEs: return "es";
    case Language::kPt: return "pt";
  }
  return "en";
}

inline std::optional<Language> language_from_code(std::string code) {
  for (char& c : code)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  static constexpr std::array<Language, 8> all = {
      Language::kEn, Language::kZh, Language::kDe, Language::kFr,
      Language::kIt, Language::kJa, Language::kEs, Language::kPt};
  for (Language l : all)
    if (code == language_code(l)) return l;
  return std::nullopt;
}

struct SourceMeta {
  std::string label;
  std::optional<Language> language;
  double onset_s = 0.0;
  double offset_s = 0.0;
  DirectionZone zone;
  double distance_m = 0.0;
  double loudness_dba = 0.0;
  double c50_db = 0.0;

  friend bool operator==(const SourceMeta&, const SourceMeta&) = default;
};

struct SceneMeta {
  double room_volume_m3 = 0.0;
  double rt60_s = 0.0;
  int n_src = 0;
  std::string noise_label;
  double noise_loudness_db = 0.0;
  std::vector<SourceMeta> sources;

  friend bool operator==(const SceneMeta&, const SceneMeta&) = default;
};

/// Canonical serialization order: loudness descending, ties by onset then
/// label ascending. The remaining fields extend this to a total order on
/// distinct tuples so storage order is reproducible from any shuffle.
inline bool canonical_source_less(const SourceMeta& a, const SourceMeta& b) {
  if (a.loudness_dba != b.loudness_dba) return a.loudness_dba > b.loudness_dba;
  if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
  if (a.label != b.label) return a.label < b.label;
  if (a.offset_s != b.offset_s) return a.offset_s < b.offset_s;
  if (zone_index(a.zone) != zone_index(b.zone))
    return zone_index(a.zone) < zone_index(b.zone);
  if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
  return a.c50_db < b.c50_db;
}

inline void canonicalize(SceneMeta& scene) {
  std::stable_sort(scene.sources.begin(), scene.sources.end(),
                   canonical_source_less);
  scene.n_src = static_cast<int>(scene.sources.size());
}

inline void validate_source(const SourceMeta& s, double clip_duration_s) {
  if (s.label.empty()) throw Error("source label empty");
  if (s.label.find(';') != std::string::npos ||
      s.label.find(':') != std::string::npos) {
    throw Error("source label contains reserved punctuation: " + s.label);
  }
  if (!(s.onset_s >= 0.0 && s.onset_s < s.offset_s))
    throw Error("source times out of order: " + s.label);
  if (s.offset_s > clip_duration_s + 1e-9)
    throw Error("source offset beyond clip end: " + s.label);
  if (!(s.distance_m > 0.0)) throw Error("source distance not positive");
}

inline void validate_scene(const SceneMeta& scene, double clip_duration_s) {
  if (scene.n_src != static_cast<int>(scene.sources.size()))
    throw Error("n_src does not match source count");
  if (scene.room_volume_m3 < 100.0) throw Error("room volume below grid minimum");
  if (scene.rt60_s < 0.0) throw Error("negative rt60");
  for (const auto& s : scene.sources) validate_source(s, clip_duration_s);
  for (std::size_t i = 1; i < scene.sources.size(); ++i) {
    if (scene.sources[i - 1].loudness_dba < scene.sources[i].loudness_dba)
      throw Error("sources not in decreasing loudness order");
  }
}

struct RoomSpec {
  double lx = 0.0, ly = 0.0, lz = 0.0;
  Vec3 mic_position;
  // One absorption coefficient per surface: -x, +x, -y, +y, -z, +z.
  std::array<double, 6> wall_absorption = {0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  std::vector<Vec3> candidate_source_positions;

  double volume_m3() const { return lx * ly * lz; }
  double surface_m2() const { return 2.0 * (lx * ly + lx * lz + ly * lz); }

  bool contains(const Vec3& p, double margin = 0.0) const {
    return p.x >= margin && p.x <= lx - margin && p.y >= margin &&
           p.y <= ly - margin && p.z >= margin && p.z <= lz - margin;
  }
};

/// Sabine reverberation time for a uniformly absorbing room.
inline double sabine_rt60(const RoomSpec& room) {
  double absorbing_area = 0.0;
  const double sx = room.ly * room.lz, sy = room.lx * room.lz,
               sz = room.lx * room.ly;
  const std::array<double, 6> areas = {sx, sx, sy, sy, sz, sz};
  for (int i = 0; i < 6; ++i) absorbing_area += areas[i] * room.wall_absorption[i];
  if (absorbing_area <= 0.0) throw Error("sabine_rt60: no absorption");
  return 0.161 * room.volume_m3() / absorbing_area;
}

}  // namespace foascene

#endif  // FOASCENE_SCENE_MODEL_HPP_
