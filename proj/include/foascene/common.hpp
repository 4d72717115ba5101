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

#ifndef FOASCENE_COMMON_HPP_
#define FOASCENE_COMMON_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace foascene {

inline constexpr double kSpeedOfSound = 343.0;  // m/s
inline constexpr double kPi = std::numbers::pi;

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an azimuth into [-180, 180).
inline double wrap_azimuth_deg(double az) {
  double a = std::fmod(az + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  bool operator==(const Vec3&) const = default;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  if (n == 0.0) throw Error("cannot normalize zero vector");
  return v * (1.0 / n);
}

/// Great-circle angle between two directions, in degrees.
inline double angle_between_deg(const Vec3& a, const Vec3& b) {
  double c = dot(normalized(a), normalized(b));
  return rad_to_deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

/// Frame convention: +x front, +y left, +z up. Azimuth counterclockwise
/// from front, elevation up from the horizontal plane.
inline Vec3 direction_from_angles(double azimuth_deg, double elevation_deg) {
  double az = deg_to_rad(azimuth_deg);
  double el = deg_to_rad(elevation_deg);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
          std::sin(el)};
}

struct AzEl {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

inline AzEl angles_from_direction(const Vec3& v) {
  Vec3 u = normalized(v);
  double el = rad_to_deg(std::asin(std::clamp(u.z, -1.0, 1.0)));
  double az = (std::abs(u.x) < 1e-300 && std::abs(u.y) < 1e-300)
                  ? 0.0
                  : rad_to_deg(std::atan2(u.y, u.x));
  return {wrap_azimuth_deg(az), el};
}

}  // namespace foascene

#endif  // FOASCENE_COMMON_HPP_
