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

#ifndef FOASCENE_RIR_SIM_HPP_
#define FOASCENE_RIR_SIM_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "foascene/common.hpp"
#include "foascene/rng.hpp"
#include "foascene/scene_model.hpp"

namespace foascene {
namespace rir {

struct InsufficientDecay : Error {
  using Error::Error;
};

struct FoaRir {
  int sample_rate_hz = 16000;
  std::vector<double> w, x, y, z;
  Vec3 source_position;
  Vec3 mic_position;
  double rt60_s = 0.0;
  double c50_db = 0.0;
  double direct_path_delay_s = 0.0;
};

namespace detail {

constexpr int kSincTaps = 8;

// Hann-windowed sinc spanning [-4, 4] around the fractional delay. An
// integral delay reduces to a single unit tap.
inline void add_fractional_impulse(std::vector<double>& buf,
                                   double delay_samples, double gain) {
  int base = static_cast<int>(std::floor(delay_samples)) - kSincTaps / 2 + 1;
  for (int k = 0; k < kSincTaps; ++k) {
    int t = base + k;
    if (t < 0 || t >= static_cast<int>(buf.size())) continue;
    double u = static_cast<double>(t) - delay_samples;
    double sinc = u == 0.0 ? 1.0 : std::sin(kPi * u) / (kPi * u);
    double window = 0.5 * (1.0 + std::cos(kPi * u / (kSincTaps / 2)));
    buf[static_cast<std::size_t>(t)] += gain * sinc * window;
  }
}

// Per-dimension image bookkeeping: coordinate and accumulated reflection
// amplitude for index n and parity q.
struct AxisImages {
  std::vector<std::array<double, 2>> coord;  // [n + n_max][q]
  std::vector<std::array<double, 2>> coeff;
  int n_max = 0;
};

// Sabine RT60 with unabsorbing rooms mapping to +infinity instead of an
// error, for response sizing and reflection calibration.
inline double sabine_or_infinity(const RoomSpec& room) {
  const double sx = room.ly * room.lz, sy = room.lx * room.lz,
               sz = room.lx * room.ly;
  const std::array<double, 6> areas = {sx, sx, sy, sy, sz, sz};
  double absorbing_area = 0.0;
  for (int i = 0; i < 6; ++i)
    absorbing_area += areas[i] * room.wall_absorption[i];
  if (absorbing_area <= 0.0) return std::numeric_limits<double>::infinity();
  return 0.161 * room.volume_m3() / absorbing_area;
}

// Amplitude reflection coefficients per wall. With plain normal-incidence
// values sqrt(1 - alpha), image families running parallel to one axis shed
// energy at c*(a_lo + a_hi)/(2*L) nepers/s, slower than the diffuse-field
// rate in every shoebox, so they dominate the late decay and push the fitted
// RT60 far above the Sabine value the absorption implies. Each axis pair is
// instead assigned the loss that makes its axis-parallel families decay at
// kDecayCalibration times the Sabine rate, split across the pair in
// proportion to wall absorption and capped by the normal-incidence
// coefficient so fully absorbing walls stay exact. The factor sits below 1
// because oblique families lose energy up to sqrt(3) times faster than
// axis-parallel ones and steepen the -5..-25 dB fit window; the value
// centers the Schroeder estimate on Sabine across the sampled room
// distribution.
constexpr double kDecayCalibration = 0.77;

inline std::array<double, 6> wall_reflections(const RoomSpec& room) {
  std::array<double, 6> beta{};
  const double dims[3] = {room.lx, room.ly, room.lz};
  const double rate =
      kDecayCalibration * std::log(1e6) / sabine_or_infinity(room);
  for (int ax = 0; ax < 3; ++ax) {
    const double alo = room.wall_absorption[static_cast<std::size_t>(2 * ax)];
    const double ahi =
        room.wall_absorption[static_cast<std::size_t>(2 * ax + 1)];
    const double pair = alo + ahi;
    const double budget = 2.0 * dims[ax] * rate / kSpeedOfSound;
    for (int side = 0; side < 2; ++side) {
      const double alpha = side == 0 ? alo : ahi;
      const double physical = std::sqrt(std::max(0.0, 1.0 - alpha));
      double value = physical;
      if (pair > 0.0)
        value = std::min(physical, std::exp(-0.5 * budget * alpha / pair));
      beta[static_cast<std::size_t>(2 * ax + side)] = value;
    }
  }
  return beta;
}

// Grows the index range outward until no image on this axis can still pass
// the gain cutoff: the full-path gain of an image is at most its axis
// coefficient over its axis distance, so once both parities fall below
// gain_min on consecutive indices past the distance minimum the range is
// complete. reach caps the axis distance outright.
inline AxisImages axis_images(double source, double mic, double length,
                              double beta_lo, double beta_hi, double reach,
                              double gain_min) {
  auto survives = [&](int n) {
    for (int q = 0; q < 2; ++q) {
      double coord = (1 - 2 * q) * source + 2.0 * n * length;
      double dist = std::abs(coord - mic);
      if (dist > reach) continue;
      double coeff =
          std::pow(beta_lo, std::abs(n - q)) * std::pow(beta_hi, std::abs(n));
      if (coeff / std::max(dist, 0.1) >= gain_min) return true;
    }
    return false;
  };
  int n_max = 1;
  int dead_run = 0;
  while (dead_run < 2) {
    ++n_max;
    if (survives(n_max) || survives(-n_max))
      dead_run = 0;
    else
      ++dead_run;
    if (2.0 * n_max * length > reach + 2.0 * length) break;
  }
  AxisImages ax;
  ax.n_max = n_max;
  ax.coord.resize(static_cast<std::size_t>(2 * ax.n_max + 1));
  ax.coeff.resize(ax.coord.size());
  for (int n = -ax.n_max; n <= ax.n_max; ++n) {
    std::size_t i = static_cast<std::size_t>(n + ax.n_max);
    for (int q = 0; q < 2; ++q) {
      ax.coord[i][static_cast<std::size_t>(q)] =
          (1 - 2 * q) * source + 2.0 * n * length;
      ax.coeff[i][static_cast<std::size_t>(q)] =
          std::pow(beta_lo, std::abs(n - q)) * std::pow(beta_hi, std::abs(n));
    }
  }
  return ax;
}

// Enumerates every image whose gain clears gain_min within reach, invoking
// fn(distance, gain, ux, uy, uz). Partial squared-distance sums prune whole
// subtrees before the inner loops run.
template <typename Fn>
inline void for_each_image(const AxisImages& ix, const AxisImages& iy,
                           const AxisImages& iz, const Vec3& mic, double reach,
                           double gain_min, Fn&& fn) {
  const double reach2 = reach * reach;
  for (std::size_t a = 0; a < ix.coord.size(); ++a) {
    for (int qx = 0; qx < 2; ++qx) {
      double cx = ix.coeff[a][static_cast<std::size_t>(qx)];
      if (cx == 0.0) continue;
      double dx = ix.coord[a][static_cast<std::size_t>(qx)] - mic.x;
      double dx2 = dx * dx;
      if (dx2 > reach2) continue;
      for (std::size_t b = 0; b < iy.coord.size(); ++b) {
        for (int qy = 0; qy < 2; ++qy) {
          double cyv = cx * iy.coeff[b][static_cast<std::size_t>(qy)];
          if (cyv == 0.0) continue;
          double dy = iy.coord[b][static_cast<std::size_t>(qy)] - mic.y;
          double dxy2 = dx2 + dy * dy;
          if (dxy2 > reach2) continue;
          for (std::size_t c = 0; c < iz.coord.size(); ++c) {
            for (int qz = 0; qz < 2; ++qz) {
              double g0 = cyv * iz.coeff[c][static_cast<std::size_t>(qz)];
              if (g0 == 0.0) continue;
              double dz = iz.coord[c][static_cast<std::size_t>(qz)] - mic.z;
              double d2 = dxy2 + dz * dz;
              if (d2 > reach2) continue;
              double d = std::sqrt(d2);
              double gain = g0 / std::max(d, 0.1);
              if (gain < gain_min) continue;
              double ux = 0.0, uy = 0.0, uz = 0.0;
              if (d > 1e-9) {
                ux = dx / d;
                uy = dy / d;
                uz = dz / d;
              }
              fn(d, gain, ux, uy, uz);
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Shoebox image-source simulation in first-order Ambisonics. Each image at
/// distance d adds gain (prod of wall reflection coefficients)/d at delay
/// d/c through a windowed sinc. Encoding: W gets 1/sqrt(2), X,Y,Z get the
/// unit direction components (swap this one function for SN3D). The response
/// is truncated where Sabine's decay law puts the residual reverberant
/// energy 60 dB below the direct arrival, slightly past one RT60 after the
/// direct delay; max_tail_s bounds that length. Individual images more than
/// 100 dB below the direct arrival are pruned as numerical noise.
inline FoaRir simulate_rir(const RoomSpec& room, const Vec3& source_pos,
                           int sample_rate_hz = 16000,
                           double max_tail_s = 4.0) {
  if (room.lx < 0.5 || room.ly < 0.5 || room.lz < 0.5)
    throw Error("simulate_rir: degenerate room");
  if (!room.contains(source_pos)) throw Error("simulate_rir: source outside room");
  if (!room.contains(room.mic_position))
    throw Error("simulate_rir: mic outside room");
  const Vec3 direct = source_pos - room.mic_position;
  const double direct_dist = norm(direct);
  if (direct_dist < 0.2)
    throw Error("simulate_rir: source closer than 0.2 m to mic");

  const double fs = static_cast<double>(sample_rate_hz);
  const double direct_delay_s = direct_dist / kSpeedOfSound;
  const double gain_min = 1e-5 / direct_dist;
  const double tail_s =
      std::min(detail::sabine_or_infinity(room) * 1.15, max_tail_s);
  const double reach = kSpeedOfSound * (direct_delay_s + tail_s + 0.02);

  const std::array<double, 6> beta = detail::wall_reflections(room);
  const Vec3 mic = room.mic_position;
  detail::AxisImages ix = detail::axis_images(source_pos.x, mic.x, room.lx,
                                              beta[0], beta[1], reach, gain_min);
  detail::AxisImages iy = detail::axis_images(source_pos.y, mic.y, room.ly,
                                              beta[2], beta[3], reach, gain_min);
  detail::AxisImages iz = detail::axis_images(source_pos.z, mic.z, room.lz,
                                              beta[4], beta[5], reach, gain_min);

  double max_dist = direct_dist;
  detail::for_each_image(ix, iy, iz, mic, reach, gain_min,
                         [&](double d, double, double, double, double) {
                           max_dist = std::max(max_dist, d);
                         });

  const double len_s =
      std::max(max_dist / kSpeedOfSound, direct_delay_s + 0.055) + 0.002;
  const std::size_t len =
      static_cast<std::size_t>(std::ceil(len_s * fs)) + detail::kSincTaps;

  FoaRir out;
  out.sample_rate_hz = sample_rate_hz;
  out.source_position = source_pos;
  out.mic_position = mic;
  out.direct_path_delay_s = direct_delay_s;
  out.w.assign(len, 0.0);
  out.x.assign(len, 0.0);
  out.y.assign(len, 0.0);
  out.z.assign(len, 0.0);

  const double inv_root2 = 1.0 / std::sqrt(2.0);
  detail::for_each_image(
      ix, iy, iz, mic, reach, gain_min,
      [&](double d, double gain, double ux, double uy, double uz) {
        double delay = d / kSpeedOfSound * fs;
        detail::add_fractional_impulse(out.w, delay, gain * inv_root2);
        if (ux != 0.0) detail::add_fractional_impulse(out.x, delay, gain * ux);
        if (uy != 0.0) detail::add_fractional_impulse(out.y, delay, gain * uy);
        if (uz != 0.0) detail::add_fractional_impulse(out.z, delay, gain * uz);
      });
  return out;
}

/// Schroeder backward integration in dB relative to total energy.
inline std::vector<double> schroeder_curve_db(const std::vector<double>& rir) {
  std::vector<double> curve(rir.size(), -300.0);
  double acc = 0.0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    curve[i] = acc;
  }
  if (acc <= 0.0) return curve;
  for (double& v : curve)
    v = 10.0 * std::log10(std::max(v / acc, 1e-30));
  return curve;
}

/// RT60 from the Schroeder decay: a least-squares line through the curve
/// between -5 and -25 dB, extrapolated to 60 dB (RT60 = 3 x T20). The curve
/// is taken on the response after the direct arrival: with the microphone
/// close to the source the direct peak holds most of the energy, and keeping
/// it in the integration would measure the direct-to-reverberant ratio
/// instead of the reverberant decay.
inline double estimate_rt60(const std::vector<double>& rir_omni,
                            int sample_rate_hz) {
  std::size_t peak = 0;
  double peak_e = 0.0;
  for (std::size_t i = 0; i < rir_omni.size(); ++i) {
    double e = rir_omni[i] * rir_omni[i];
    if (e > peak_e) {
      peak_e = e;
      peak = i;
    }
  }
  std::size_t start =
      peak + static_cast<std::size_t>(std::ceil(0.0025 * sample_rate_hz));
  if (start >= rir_omni.size())
    throw InsufficientDecay("estimate_rt60: no tail past the direct arrival");
  std::vector<double> tail(rir_omni.begin() + static_cast<std::ptrdiff_t>(start),
                           rir_omni.end());
  std::vector<double> curve = schroeder_curve_db(tail);
  std::size_t i5 = curve.size(), i25 = curve.size();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (i5 == curve.size() && curve[i] <= -5.0) i5 = i;
    if (curve[i] <= -25.0) {
      i25 = i;
      break;
    }
  }
  if (i5 >= curve.size() || i25 >= curve.size() || i25 <= i5 + 1)
    throw InsufficientDecay("estimate_rt60: decay never reaches -25 dB");

  double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = i5; i <= i25; ++i) {
    double t = static_cast<double>(i) / sample_rate_hz;
    n += 1.0;
    sx += t;
    sy += curve[i];
    sxx += t * t;
    sxy += t * curve[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw InsufficientDecay("estimate_rt60: flat decay window");
  double slope = (n * sxy - sx * sy) / denom;
  if (slope >= -1e-9)
    throw InsufficientDecay("estimate_rt60: nonnegative decay slope");
  return -60.0 / slope;
}

constexpr double kC50CapDb = 40.0;

/// Clarity index: early (first 50 ms after the direct arrival) to late
/// energy ratio in dB, capped at +40 when the tail carries no energy.
inline double compute_c50(const std::vector<double>& rir_omni,
                          int sample_rate_hz, double direct_arrival_s) {
  std::size_t t0 = static_cast<std::size_t>(
      std::max(0.0, std::round(direct_arrival_s * sample_rate_hz)));
  std::size_t split = t0 + static_cast<std::size_t>(sample_rate_hz / 20);
  if (split >= rir_omni.size())
    throw Error("compute_c50: response shorter than 50 ms past the direct");
  double early = 0.0, late = 0.0;
  for (std::size_t i = t0; i <= split; ++i) early += rir_omni[i] * rir_omni[i];
  for (std::size_t i = split + 1; i < rir_omni.size(); ++i)
    late += rir_omni[i] * rir_omni[i];
  if (late <= 0.0 || early / late > 1e4) return kC50CapDb;
  return std::min(kC50CapDb, 10.0 * std::log10(early / late));
}

/// Fibonacci-sphere directions: near-uniform coverage for any count.
inline std::vector<Vec3> fibonacci_directions(int count) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double zc = 1.0 - 2.0 * (i + 0.5) / count;
    double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
    double az = golden * i;
    dirs.push_back({r * std::cos(az), r * std::sin(az), zc});
  }
  return dirs;
}

constexpr int kCandidatePositions = 64;

/// Random shoebox per the dataset recipe: floor 4x4 m to 25x25 m, height
/// 3 m to 6 m, uniform frequency-independent absorption, mic at least
/// 0.5 m from every wall, and 64 candidate source positions cast along
/// Fibonacci-sphere directions, each at least 0.5 m from mic and walls.
/// The mic is kept a full meter off the walls so every direction has room
/// for a candidate.
inline RoomSpec sample_room(std::uint64_t seed, double alpha_lo = 0.1,
                            double alpha_hi = 0.6) {
  Rng rng(seed);
  RoomSpec room;
  room.lx = rng.uniform(4.0, 25.0);
  room.ly = rng.uniform(4.0, 25.0);
  room.lz = rng.uniform(3.0, 6.0);
  double alpha = rng.uniform(alpha_lo, alpha_hi);
  room.wall_absorption = {alpha, alpha, alpha, alpha, alpha, alpha};
  room.mic_position = {rng.uniform(1.0, room.lx - 1.0),
                       rng.uniform(1.0, room.ly - 1.0),
                       rng.uniform(1.0, room.lz - 1.0)};

  const double margin = 0.5;
  for (const Vec3& dir : fibonacci_directions(kCandidatePositions)) {
    // Largest step that keeps the candidate `margin` inside the room.
    double t_max = 1e300;
    auto limit = [&](double d, double pos, double lo, double hi) {
      if (d > 1e-12) t_max = std::min(t_max, (hi - pos) / d);
      if (d < -1e-12) t_max = std::min(t_max, (lo - pos) / d);
    };
    limit(dir.x, room.mic_position.x, margin, room.lx - margin);
    limit(dir.y, room.mic_position.y, margin, room.ly - margin);
    limit(dir.z, room.mic_position.z, margin, room.lz - margin);
    double t = rng.uniform(margin, std::max(margin, t_max));
    room.candidate_source_positions.push_back(room.mic_position + dir * t);
  }
  return room;
}

/// Convenience wrapper filling the derived acoustic fields.
inline FoaRir simulate_rir_with_stats(const RoomSpec& room,
                                      const Vec3& source_pos,
                                      int sample_rate_hz = 16000) {
  FoaRir r = simulate_rir(room, source_pos, sample_rate_hz);
  try {
    r.rt60_s = estimate_rt60(r.w, sample_rate_hz);
  } catch (const InsufficientDecay&) {
    r.rt60_s = 0.0;
  }
  r.c50_db = compute_c50(r.w, sample_rate_hz, r.direct_path_delay_s);
  return r;
}

}  // namespace rir
}  // namespace foascene

#endif  // FOASCENE_RIR_SIM_HPP_
