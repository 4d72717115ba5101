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

#ifndef FOASCENE_SCENE_SYNTH_HPP_
#define FOASCENE_SCENE_SYNTH_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "foascene/common.hpp"
#include "foascene/fft.hpp"
#include "foascene/manifest.hpp"
#include "foascene/rir_sim.hpp"
#include "foascene/rng.hpp"
#include "foascene/scene_model.hpp"
#include "foascene/wav_io.hpp"

namespace foascene {
namespace synth {

struct EmptyPool : Error {
  using Error::Error;
};

struct ClippingError : Error {
  using Error::Error;
};

// One pool file. Entries flagged multi_source carry several overlapping
// events and are only eligible as diffuse background material.
struct SourceEntry {
  std::string audio_path;
  std::string label;
  bool is_speech = false;
  std::optional<Language> language;
  std::optional<std::string> transcription;
  bool multi_source = false;

  friend bool operator==(const SourceEntry&, const SourceEntry&) = default;
};

struct SourcePool {
  std::vector<SourceEntry> entries;

  std::vector<std::size_t> foreground_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (!entries[i].multi_source) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> background_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].multi_source) out.push_back(i);
    return out;
  }
};

// Independent low and high shelving filters; gains in dB, corners in Hz.
struct ShelfEq {
  double low_gain_db = 0.0;
  double low_corner_hz = 200.0;
  double high_gain_db = 0.0;
  double high_corner_hz = 2000.0;

  friend bool operator==(const ShelfEq&, const ShelfEq&) = default;
};

// gain_db is the target of the rendered stem above the background level in
// A-weighted dBFS, so it doubles as the planned signal-to-noise ratio. The
// renderer scales each stem onto its target after convolution and EQ.
struct PlannedSource {
  SourceEntry entry;
  int position_index = 0;
  double onset_s = 0.0;
  double gain_db = 0.0;
  ShelfEq eq;

  friend bool operator==(const PlannedSource&, const PlannedSource&) = default;
};

struct PlannedBackground {
  SourceEntry entry;
  double level_db = -40.0;

  friend bool operator==(const PlannedBackground&,
                         const PlannedBackground&) = default;
};

struct MixturePlan {
  RoomSpec room;
  std::vector<PlannedSource> sources;
  PlannedBackground background;
  double clip_len_s = 10.0;
  std::uint64_t rng_seed = 0;
};

struct SynthConfig {
  int sample_rate_hz = 16000;
  int max_sources = 4;
  double clip_len_s = 10.0;
  // Per-source level above background, drawn uniformly.
  double snr_db_lo = 0.0;
  double snr_db_hi = 30.0;
  // Background A-weighted level in dBFS, drawn uniformly.
  double background_level_db_lo = -45.0;
  double background_level_db_hi = -35.0;
  double eq_gain_limit_db = 6.0;
  double eq_corner_lo_hz = 100.0;
  double eq_corner_hi_hz = 4000.0;
  // Every source onset leaves at least this much clip after it.
  double min_source_window_s = 1.0;
};

inline Json entry_to_json(const SourceEntry& e) {
  Json j;
  j["audio_path"] = e.audio_path;
  j["label"] = e.label;
  j["is_speech"] = e.is_speech;
  if (e.language) j["language"] = language_code(*e.language);
  if (e.transcription) j["transcription"] = *e.transcription;
  j["multi_source"] = e.multi_source;
  return j;
}

inline SourceEntry entry_from_json(const Json& j) {
  SourceEntry e;
  e.audio_path = j.at("audio_path").get<std::string>();
  e.label = j.at("label").get<std::string>();
  e.is_speech = j.at("is_speech").get<bool>();
  if (j.contains("language") && !j["language"].is_null()) {
    auto lang = language_from_code(j["language"].get<std::string>());
    if (!lang) throw Error("unknown language code: " + j["language"].dump());
    e.language = *lang;
  }
  if (j.contains("transcription") && !j["transcription"].is_null())
    e.transcription = j["transcription"].get<std::string>();
  e.multi_source = j.at("multi_source").get<bool>();
  return e;
}

inline Json pool_to_json(const SourcePool& pool) {
  Json j;
  j["entries"] = Json::array();
  for (const auto& e : pool.entries) j["entries"].push_back(entry_to_json(e));
  return j;
}

inline SourcePool pool_from_json(const Json& j) {
  SourcePool pool;
  for (const auto& je : j.at("entries"))
    pool.entries.push_back(entry_from_json(je));
  return pool;
}

inline Json plan_to_json(const MixturePlan& plan) {
  Json j;
  j["room"] = room_to_json(plan.room);
  j["sources"] = Json::array();
  for (const auto& s : plan.sources) {
    Json js;
    js["entry"] = entry_to_json(s.entry);
    js["position_index"] = s.position_index;
    js["onset_s"] = s.onset_s;
    js["gain_db"] = s.gain_db;
    Json jeq;
    jeq["low_gain_db"] = s.eq.low_gain_db;
    jeq["low_corner_hz"] = s.eq.low_corner_hz;
    jeq["high_gain_db"] = s.eq.high_gain_db;
    jeq["high_corner_hz"] = s.eq.high_corner_hz;
    js["eq"] = jeq;
    j["sources"].push_back(js);
  }
  Json jb;
  jb["entry"] = entry_to_json(plan.background.entry);
  jb["level_db"] = plan.background.level_db;
  j["background"] = jb;
  j["clip_len_s"] = plan.clip_len_s;
  j["rng_seed"] = plan.rng_seed;
  return j;
}

inline MixturePlan plan_from_json(const Json& j) {
  MixturePlan plan;
  plan.room = room_from_json(j.at("room"));
  for (const auto& js : j.at("sources")) {
    PlannedSource s;
    s.entry = entry_from_json(js.at("entry"));
    s.position_index = js.at("position_index").get<int>();
    s.onset_s = js.at("onset_s").get<double>();
    s.gain_db = js.at("gain_db").get<double>();
    const Json& jeq = js.at("eq");
    s.eq.low_gain_db = jeq.at("low_gain_db").get<double>();
    s.eq.low_corner_hz = jeq.at("low_corner_hz").get<double>();
    s.eq.high_gain_db = jeq.at("high_gain_db").get<double>();
    s.eq.high_corner_hz = jeq.at("high_corner_hz").get<double>();
    plan.sources.push_back(std::move(s));
  }
  plan.background.entry = entry_from_json(j.at("background").at("entry"));
  plan.background.level_db = j.at("background").at("level_db").get<double>();
  plan.clip_len_s = j.at("clip_len_s").get<double>();
  plan.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return plan;
}

namespace detail {

struct FirstOrder {
  double b0 = 0.0, b1 = 0.0, a1 = 0.0;
  double z = 0.0;

  double step(double x) {
    double y = b0 * x + z;
    z = b1 * x - a1 * y;
    return y;
  }

  std::complex<double> response(double w) const {
    const std::complex<double> zi = std::polar(1.0, -w);
    return (b0 + b1 * zi) / (1.0 + a1 * zi);
  }
};

// IEC 61672 A-weighting: four zeros at DC against real poles at 20.6 Hz
// (double), 107.7 Hz, 737.9 Hz, and 12194 Hz (double), realized as six
// bilinear-transformed first-order sections. The cascade is renormalized to
// exactly unit magnitude at 1 kHz, which absorbs the bilinear frequency
// warping at the reference point.
struct AWeighting {
  std::array<FirstOrder, 6> sections;
  double gain = 1.0;

  explicit AWeighting(int sample_rate_hz) {
    const double k = 2.0 * static_cast<double>(sample_rate_hz);
    const double w1 = 2.0 * kPi * 20.598997;
    const double w2 = 2.0 * kPi * 107.65265;
    const double w3 = 2.0 * kPi * 737.86223;
    const double w4 = 2.0 * kPi * 12194.217;
    auto highpass = [&](double w) {  // s / (s + w)
      FirstOrder f;
      f.b0 = k / (k + w);
      f.b1 = -f.b0;
      f.a1 = (w - k) / (k + w);
      return f;
    };
    auto lowpass = [&](double w) {  // w / (s + w)
      FirstOrder f;
      f.b0 = w / (k + w);
      f.b1 = f.b0;
      f.a1 = (w - k) / (k + w);
      return f;
    };
    sections = {highpass(w1), highpass(w1), highpass(w2),
                highpass(w3), lowpass(w4),  lowpass(w4)};
    const double w_ref = 2.0 * kPi * 1000.0 / sample_rate_hz;
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= s.response(w_ref);
    gain = 1.0 / std::abs(h);
  }

  double step(double x) {
    for (auto& s : sections) x = s.step(x);
    return gain * x;
  }
};

struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
  double z1 = 0.0, z2 = 0.0;

  double step(double x) {
    double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

// Audio EQ cookbook shelves with shelf slope 1.
inline Biquad make_shelf(double gain_db, double corner_hz, int sample_rate_hz,
                         bool high) {
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2.0 * kPi * corner_hz / sample_rate_hz;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / 2.0 * std::sqrt(2.0);
  const double sq = 2.0 * std::sqrt(a) * alpha;
  const double sign = high ? 1.0 : -1.0;
  const double a0 = (a + 1.0) - sign * (a - 1.0) * cw + sq;
  Biquad f;
  f.b0 = a * ((a + 1.0) + sign * (a - 1.0) * cw + sq) / a0;
  f.b1 = -2.0 * sign * a * ((a - 1.0) + sign * (a + 1.0) * cw) / a0;
  f.b2 = a * ((a + 1.0) + sign * (a - 1.0) * cw - sq) / a0;
  f.a1 = 2.0 * sign * ((a - 1.0) - sign * (a + 1.0) * cw) / a0;
  f.a2 = ((a + 1.0) - sign * (a - 1.0) * cw - sq) / a0;
  return f;
}

inline void apply_shelf_eq(std::vector<double>& mono, const ShelfEq& eq,
                           int sample_rate_hz) {
  Biquad low = make_shelf(eq.low_gain_db, eq.low_corner_hz, sample_rate_hz,
                          false);
  Biquad high = make_shelf(eq.high_gain_db, eq.high_corner_hz, sample_rate_hz,
                           true);
  for (double& s : mono) s = high.step(low.step(s));
}

// Shares the source spectrum across the four response channels.
inline std::array<std::vector<double>, 4> convolve_foa(
    const std::vector<double>& mono, const rir::FoaRir& rir,
    std::size_t out_len) {
  std::array<std::vector<double>, 4> out;
  const std::array<const std::vector<double>*, 4> ch = {&rir.w, &rir.x, &rir.y,
                                                        &rir.z};
  if (mono.empty()) {
    for (auto& o : out) o.assign(out_len, 0.0);
    return out;
  }
  const std::size_t full = mono.size() + rir.w.size() - 1;
  const std::size_t n = dsp::next_power_of_two(full);
  std::vector<std::complex<double>> src(n);
  for (std::size_t i = 0; i < mono.size(); ++i) src[i] = mono[i];
  dsp::fft_inplace(src, false);
  std::vector<std::complex<double>> work(n);
  for (int c = 0; c < 4; ++c) {
    std::fill(work.begin(), work.end(), std::complex<double>{});
    const std::vector<double>& h = *ch[c];
    for (std::size_t i = 0; i < h.size(); ++i) work[i] = h[i];
    dsp::fft_inplace(work, false);
    for (std::size_t i = 0; i < n; ++i) work[i] *= src[i];
    dsp::fft_inplace(work, true);
    out[c].assign(out_len, 0.0);
    const std::size_t m = std::min(out_len, full);
    for (std::size_t i = 0; i < m; ++i) out[c][i] = work[i].real();
  }
  return out;
}

}  // namespace detail

constexpr double kSilenceFloorDb = -120.0;

/// A-weighted level in dBFS: IEC 61672 weighting, then 20 log10 of the RMS
/// relative to unit full scale. Callers measuring one source pass the slice
/// covering its active interval. Returns the -120 dB floor for silence.
inline double compute_loudness_dba(const std::vector<double>& samples,
                                   int sample_rate_hz) {
  if (samples.empty()) throw Error("compute_loudness_dba: empty signal");
  if (sample_rate_hz <= 0) throw Error("compute_loudness_dba: bad sample rate");
  detail::AWeighting weight(sample_rate_hz);
  double acc = 0.0;
  for (double s : samples) {
    double y = weight.step(s);
    acc += y * y;
  }
  const double rms = std::sqrt(acc / static_cast<double>(samples.size()));
  if (!(rms > 0.0)) return kSilenceFloorDb;
  return std::max(kSilenceFloorDb, 20.0 * std::log10(rms));
}

struct ActiveInterval {
  std::size_t onset_sample = 0;
  std::size_t offset_sample = 0;  // exclusive
  double onset_s = 0.0;
  double offset_s = 0.0;
};

/// Activity bounds from the short-time energy envelope: 10 ms centered mean
/// of the squared signal, active where the envelope is within 40 dB of its
/// peak, plus a 100 ms hangover after the last crossing. Returns nothing for
/// an all-zero signal.
inline std::optional<ActiveInterval> detect_activity(
    const std::vector<double>& samples, int sample_rate_hz) {
  const std::size_t n = samples.size();
  if (n == 0) return std::nullopt;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    prefix[i + 1] = prefix[i] + samples[i] * samples[i];
  const std::size_t half = std::max<std::size_t>(
      1, static_cast<std::size_t>(sample_rate_hz) / 200);
  auto envelope = [&](std::size_t i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    return (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  };
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, envelope(i));
  if (!(peak > 0.0)) return std::nullopt;
  const double threshold = peak * 1e-4;
  std::size_t first = n, last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (envelope(i) >= threshold) {
      if (first == n) first = i;
      last = i;
    }
  }
  const std::size_t hangover =
      static_cast<std::size_t>(sample_rate_hz) / 10;
  ActiveInterval out;
  out.onset_sample = first;
  out.offset_sample = std::min(n, last + 1 + hangover);
  out.onset_s = static_cast<double>(first) / sample_rate_hz;
  out.offset_s = static_cast<double>(out.offset_sample) / sample_rate_hz;
  return out;
}

/// One room's worth of impulse responses: one per candidate position plus
/// their sum scaled by 1/sqrt(count), whose expected level is independent of
/// the count and whose lack of any single propagation direction makes it the
/// diffuse-background response.
struct RoomRirs {
  int sample_rate_hz = 16000;
  std::vector<rir::FoaRir> at_candidate;
  rir::FoaRir diffuse;
  double rt60_s = 0.0;
};

inline RoomRirs build_room_rirs(const RoomSpec& room, int sample_rate_hz) {
  if (room.candidate_source_positions.empty())
    throw Error("build_room_rirs: room has no candidate positions");
  RoomRirs out;
  out.sample_rate_hz = sample_rate_hz;
  std::size_t longest = 0;
  for (const Vec3& pos : room.candidate_source_positions) {
    out.at_candidate.push_back(rir::simulate_rir(room, pos, sample_rate_hz));
    longest = std::max(longest, out.at_candidate.back().w.size());
  }
  out.diffuse.sample_rate_hz = sample_rate_hz;
  out.diffuse.mic_position = room.mic_position;
  out.diffuse.w.assign(longest, 0.0);
  out.diffuse.x.assign(longest, 0.0);
  out.diffuse.y.assign(longest, 0.0);
  out.diffuse.z.assign(longest, 0.0);
  const double scale =
      1.0 / std::sqrt(static_cast<double>(out.at_candidate.size()));
  for (const rir::FoaRir& r : out.at_candidate) {
    for (std::size_t i = 0; i < r.w.size(); ++i) {
      out.diffuse.w[i] += scale * r.w[i];
      out.diffuse.x[i] += scale * r.x[i];
      out.diffuse.y[i] += scale * r.y[i];
      out.diffuse.z[i] += scale * r.z[i];
    }
  }
  try {
    out.rt60_s = rir::estimate_rt60(out.diffuse.w, sample_rate_hz);
  } catch (const rir::InsufficientDecay&) {
    out.rt60_s = 0.0;
  }
  return out;
}

/// Draws one clip recipe: a room, one to max_sources foreground entries at
/// distinct candidate positions with random onset, level above background,
/// and shelf EQ, plus a background entry and level. All randomness comes
/// from the seed, so equal seeds give byte-identical plans.
inline MixturePlan plan_mixture(const SourcePool& pool,
                                const std::vector<RoomSpec>& rooms,
                                const SynthConfig& config,
                                std::uint64_t seed) {
  if (rooms.empty()) throw Error("plan_mixture: no rooms");
  if (config.max_sources < 1) throw Error("plan_mixture: max_sources < 1");
  const std::vector<std::size_t> foreground = pool.foreground_indices();
  const std::vector<std::size_t> backgrounds = pool.background_indices();
  if (foreground.empty())
    throw EmptyPool("plan_mixture: no single-source pool entries");
  if (backgrounds.empty())
    throw EmptyPool("plan_mixture: no background pool entries");

  Rng rng(seed);
  MixturePlan plan;
  plan.rng_seed = seed;
  plan.clip_len_s = config.clip_len_s;
  plan.room = rooms[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(rooms.size()) - 1))];

  const int n = static_cast<int>(rng.uniform_int(1, config.max_sources));
  if (static_cast<std::size_t>(n) > foreground.size())
    throw EmptyPool("plan_mixture: pool has fewer single-source entries than "
                    "planned sources");
  const std::size_t candidates = plan.room.candidate_source_positions.size();
  if (static_cast<std::size_t>(n) > candidates)
    throw Error("plan_mixture: room has fewer candidate positions than "
                "planned sources");

  const std::vector<std::size_t> entry_pick =
      rng.sample_indices(foreground.size(), static_cast<std::size_t>(n));
  const std::vector<std::size_t> position_pick =
      rng.sample_indices(candidates, static_cast<std::size_t>(n));
  const double onset_hi =
      std::max(0.0, config.clip_len_s - config.min_source_window_s);
  for (int i = 0; i < n; ++i) {
    PlannedSource s;
    s.entry = pool.entries[foreground[entry_pick[static_cast<std::size_t>(i)]]];
    s.position_index =
        static_cast<int>(position_pick[static_cast<std::size_t>(i)]);
    s.onset_s = rng.uniform(0.0, onset_hi);
    s.gain_db = rng.uniform(config.snr_db_lo, config.snr_db_hi);
    s.eq.low_gain_db =
        rng.uniform(-config.eq_gain_limit_db, config.eq_gain_limit_db);
    s.eq.low_corner_hz =
        rng.log_uniform(config.eq_corner_lo_hz, config.eq_corner_hi_hz);
    s.eq.high_gain_db =
        rng.uniform(-config.eq_gain_limit_db, config.eq_gain_limit_db);
    s.eq.high_corner_hz =
        rng.log_uniform(config.eq_corner_lo_hz, config.eq_corner_hi_hz);
    plan.sources.push_back(std::move(s));
  }

  plan.background.entry = pool.entries[backgrounds[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(backgrounds.size()) - 1))]];
  plan.background.level_db = rng.uniform(config.background_level_db_lo,
                                         config.background_level_db_hi);
  return plan;
}

struct RenderedScene {
  wav::AudioBuffer foa;
  SceneMeta meta;
  // One stem per kept source, aligned with meta ordering by
  // kept_plan_indices; every buffer spans the full clip.
  std::vector<wav::AudioBuffer> stems;
  std::vector<std::size_t> kept_plan_indices;
  wav::AudioBuffer background;
  std::vector<std::string> warnings;
  double headroom_scale = 1.0;
};

namespace detail {

inline std::vector<double> load_mono(const std::string& path,
                                     int sample_rate_hz) {
  wav::AudioBuffer buf = wav::read_wav(path);
  if (buf.num_channels() != 1)
    throw Error("pool audio must be mono: " + path);
  if (buf.sample_rate_hz != sample_rate_hz)
    throw Error("pool audio sample rate " +
                std::to_string(buf.sample_rate_hz) + " does not match " +
                std::to_string(sample_rate_hz) + ": " + path);
  return std::move(buf.channels[0]);
}

inline wav::AudioBuffer make_foa_buffer(int sample_rate_hz, std::size_t frames) {
  wav::AudioBuffer buf;
  buf.sample_rate_hz = sample_rate_hz;
  buf.channels.assign(4, std::vector<double>(frames, 0.0));
  return buf;
}

inline void scale_buffer(wav::AudioBuffer& buf, double scale) {
  for (auto& ch : buf.channels)
    for (double& s : ch) s *= scale;
}

inline double peak_abs(const wav::AudioBuffer& buf) {
  double peak = 0.0;
  for (const auto& ch : buf.channels)
    for (double s : ch) peak = std::max(peak, std::abs(s));
  return peak;
}

inline bool finite_samples(const wav::AudioBuffer& buf) {
  for (const auto& ch : buf.channels)
    for (double s : ch)
      if (!std::isfinite(s)) return false;
  return true;
}

}  // namespace detail

// Attenuating more than this to fit the mixture under full scale means the
// planned levels were unreachable; the render refuses instead of shipping a
// clip whose levels no longer resemble the plan.
constexpr double kMaxHeadroomCutDb = 24.0;
constexpr double kClipCeiling = 0.99;

/// Renders a plan to the 4-channel mixture, per-source stems, the diffuse
/// background stem, and the measured ground-truth metadata. Each source is
/// EQ'd, convolved with its position's response, shifted to its onset, and
/// scaled so its A-weighted stem level sits gain_db above the background
/// level. Sources that render silent are dropped with a warning. If the
/// mixture would clip, every stem is attenuated together (preserving level
/// differences) up to kMaxHeadroomCutDb; beyond that the render throws
/// ClippingError.
inline RenderedScene render_mixture(const MixturePlan& plan,
                                    const RoomRirs* room_rirs = nullptr,
                                    int sample_rate_hz = 16000) {
  if (plan.clip_len_s <= 0.0) throw Error("render_mixture: bad clip length");
  std::optional<RoomRirs> local;
  if (room_rirs == nullptr) {
    local = build_room_rirs(plan.room, sample_rate_hz);
    room_rirs = &*local;
  }
  if (room_rirs->sample_rate_hz != sample_rate_hz)
    throw Error("render_mixture: RIR sample rate mismatch");
  const std::size_t clip_len = static_cast<std::size_t>(
      std::llround(plan.clip_len_s * sample_rate_hz));

  RenderedScene out;

  // Background: tile the file across the clip, then one convolution with the
  // diffuse response stands in for the 64 per-position convolutions by
  // linearity of the sum.
  std::vector<double> bg_mono =
      detail::load_mono(plan.background.entry.audio_path, sample_rate_hz);
  if (bg_mono.empty()) throw Error("render_mixture: background file empty");
  if (bg_mono.size() < clip_len) {
    std::vector<double> tiled;
    tiled.reserve(clip_len);
    while (tiled.size() < clip_len) {
      const std::size_t take = std::min(bg_mono.size(), clip_len - tiled.size());
      tiled.insert(tiled.end(), bg_mono.begin(),
                   bg_mono.begin() + static_cast<std::ptrdiff_t>(take));
    }
    bg_mono = std::move(tiled);
  } else {
    bg_mono.resize(clip_len);
  }
  out.background = detail::make_foa_buffer(sample_rate_hz, clip_len);
  {
    auto ch = detail::convolve_foa(bg_mono, room_rirs->diffuse, clip_len);
    for (int c = 0; c < 4; ++c) out.background.channels[c] = std::move(ch[c]);
  }
  const double bg_raw =
      compute_loudness_dba(out.background.channels[0], sample_rate_hz);
  if (bg_raw <= kSilenceFloorDb + 1.0)
    throw Error("render_mixture: background renders silent: " +
                plan.background.entry.audio_path);
  detail::scale_buffer(out.background,
                       std::pow(10.0, (plan.background.level_db - bg_raw) / 20.0));

  struct Rendered {
    std::size_t plan_index;
    wav::AudioBuffer stem;
    ActiveInterval interval;
    double loudness_db;
    SourceMeta meta;
  };
  std::vector<Rendered> rendered;

  for (std::size_t i = 0; i < plan.sources.size(); ++i) {
    const PlannedSource& ps = plan.sources[i];
    if (ps.position_index < 0 ||
        static_cast<std::size_t>(ps.position_index) >=
            room_rirs->at_candidate.size())
      throw Error("render_mixture: position index out of range");
    for (std::size_t k = 0; k < i; ++k)
      if (plan.sources[k].position_index == ps.position_index)
        throw Error("render_mixture: duplicate position index");
    if (ps.onset_s < 0.0 || ps.onset_s >= plan.clip_len_s)
      throw Error("render_mixture: onset outside clip");

    const std::size_t onset = static_cast<std::size_t>(
        std::llround(ps.onset_s * sample_rate_hz));
    const std::size_t window = clip_len - std::min(clip_len, onset);
    std::vector<double> mono =
        detail::load_mono(ps.entry.audio_path, sample_rate_hz);
    if (mono.size() > window) mono.resize(window);
    detail::apply_shelf_eq(mono, ps.eq, sample_rate_hz);

    const rir::FoaRir& rir =
        room_rirs->at_candidate[static_cast<std::size_t>(ps.position_index)];
    Rendered r;
    r.plan_index = i;
    r.stem = detail::make_foa_buffer(sample_rate_hz, clip_len);
    auto ch = detail::convolve_foa(mono, rir, window);
    for (int c = 0; c < 4; ++c)
      for (std::size_t t = 0; t < window; ++t)
        r.stem.channels[c][onset + t] = ch[c][t];

    auto interval = detect_activity(r.stem.channels[0], sample_rate_hz);
    double raw = kSilenceFloorDb;
    if (interval) {
      std::vector<double> slice(
          r.stem.channels[0].begin() +
              static_cast<std::ptrdiff_t>(interval->onset_sample),
          r.stem.channels[0].begin() +
              static_cast<std::ptrdiff_t>(interval->offset_sample));
      raw = compute_loudness_dba(slice, sample_rate_hz);
    }
    if (!interval || raw <= kSilenceFloorDb + 1.0) {
      out.warnings.push_back("dropped silent source '" + ps.entry.label +
                             "' (" + ps.entry.audio_path + ")");
      continue;
    }
    r.interval = *interval;
    r.loudness_db = plan.background.level_db + ps.gain_db;
    detail::scale_buffer(r.stem,
                         std::pow(10.0, (r.loudness_db - raw) / 20.0));

    const Vec3 position =
        plan.room
            .candidate_source_positions[static_cast<std::size_t>(ps.position_index)];
    const Vec3 offset_vec = position - plan.room.mic_position;
    r.meta.label = ps.entry.label;
    if (ps.entry.is_speech) r.meta.language = ps.entry.language;
    r.meta.onset_s = quantize_scalar(r.interval.onset_s, ScalarKind::kTime);
    r.meta.offset_s = quantize_scalar(r.interval.offset_s, ScalarKind::kTime);
    r.meta.zone = quantize_direction(normalized(offset_vec));
    r.meta.distance_m = quantize_scalar(norm(offset_vec), ScalarKind::kDistance);
    r.meta.loudness_dba =
        quantize_scalar(r.loudness_db, ScalarKind::kLoudness);
    r.meta.c50_db = quantize_scalar(
        rir::compute_c50(rir.w, sample_rate_hz, rir.direct_path_delay_s),
        ScalarKind::kC50);
    rendered.push_back(std::move(r));
  }

  // Peak check on a provisional sum; any headroom cut rescales the parts
  // before the metadata and the returned mixture are built.
  auto sum_parts = [&](const std::vector<std::size_t>& idx_order) {
    wav::AudioBuffer mix = detail::make_foa_buffer(sample_rate_hz, clip_len);
    for (std::size_t idx : idx_order)
      for (int c = 0; c < 4; ++c)
        for (std::size_t t = 0; t < clip_len; ++t)
          mix.channels[c][t] += rendered[idx].stem.channels[c][t];
    for (int c = 0; c < 4; ++c)
      for (std::size_t t = 0; t < clip_len; ++t)
        mix.channels[c][t] += out.background.channels[c][t];
    return mix;
  };
  std::vector<std::size_t> order(rendered.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  wav::AudioBuffer provisional = sum_parts(order);
  if (!detail::finite_samples(provisional))
    throw ClippingError("render_mixture: mixture contains non-finite samples");
  const double peak = detail::peak_abs(provisional);
  double headroom_scale = 1.0;
  if (peak > kClipCeiling) {
    const double cut_db = 20.0 * std::log10(peak / kClipCeiling);
    if (cut_db > kMaxHeadroomCutDb)
      throw ClippingError(
          "render_mixture: mixture peaks " + std::to_string(cut_db) +
          " dB over full scale; headroom normalization refused");
    headroom_scale = kClipCeiling / peak;
    detail::scale_buffer(out.background, headroom_scale);
    const double shift_db = 20.0 * std::log10(headroom_scale);
    for (Rendered& r : rendered) {
      detail::scale_buffer(r.stem, headroom_scale);
      r.loudness_db += shift_db;
      r.meta.loudness_dba =
          quantize_scalar(r.loudness_db, ScalarKind::kLoudness);
    }
    out.warnings.push_back("attenuated mixture by " +
                           std::to_string(-shift_db) + " dB to avoid clipping");
  }
  out.headroom_scale = headroom_scale;

  // Final ordering uses post-cut loudness. The returned mixture is summed
  // stems in storage order plus background, so callers can reproduce it
  // bit-exactly from the returned parts.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return canonical_source_less(rendered[a].meta,
                                                  rendered[b].meta);
                   });
  out.foa = sum_parts(order);

  out.meta.room_volume_m3 =
      quantize_scalar(plan.room.volume_m3(), ScalarKind::kRoomVolume);
  out.meta.rt60_s = quantize_scalar(room_rirs->rt60_s, ScalarKind::kRt60);
  out.meta.noise_label = plan.background.entry.label;
  out.meta.noise_loudness_db = quantize_scalar(
      plan.background.level_db + 20.0 * std::log10(headroom_scale),
      ScalarKind::kLoudness);

  for (std::size_t idx : order) {
    out.meta.sources.push_back(rendered[idx].meta);
    out.stems.push_back(std::move(rendered[idx].stem));
    out.kept_plan_indices.push_back(rendered[idx].plan_index);
  }
  out.meta.n_src = static_cast<int>(out.meta.sources.size());
  return out;
}

}  // namespace synth
}  // namespace foascene

#endif  // FOASCENE_SCENE_SYNTH_HPP_
