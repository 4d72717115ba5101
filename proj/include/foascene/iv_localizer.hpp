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

#ifndef FOASCENE_IV_LOCALIZER_HPP_
#define FOASCENE_IV_LOCALIZER_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "foascene/common.hpp"
#include "foascene/dsp_features.hpp"
#include "foascene/manifest.hpp"
#include "foascene/scene_model.hpp"
#include "foascene/wav_io.hpp"

namespace foascene {
namespace loc {

struct LocalizerConfig {
  int window_len = 1024;
  int hop_len = 512;
  // Keep a TF bin for direction estimation when its intensity vector is this
  // coherent: ||I|| / (|W| ||XYZ||), 1 for a plane wave, small in diffuse
  // fields.
  double diffuseness_gate = 0.6;
  // Activity detection uses a stricter gate: a diffuse background leaves a
  // fair share of bins above 0.6 in any single frame, but almost none above
  // 0.9, while a source holds most of its energy there.
  double activity_gate = 0.9;
  // A frame is active when at least this fraction of its intensity energy
  // sits in strictly coherent bins (diffuse fields measure below 0.25, a
  // source at 0 dB SNR above 0.5) and the bin count below is met. At least
  // one frame per clip must pass this test or the clip is considered
  // sourceless.
  double activity_fraction = 0.35;
  int min_active_bins = 6;
  // Far sources in wet rooms hold a low coherent fraction even while
  // clearly present; a frame within this factor of the clip's peak
  // strictly-coherent energy stays active regardless of its fraction.
  double activity_floor_ratio = 1e-2;
  // Events need this much sustained activity to open and this much silence
  // to close.
  double hysteresis_on_s = 0.2;
  double hysteresis_off_s = 0.3;
  // Directions closer than this merge into one event.
  double cluster_angle_deg = 45.0;
  // Diffuse background spray sits several orders of magnitude below a real
  // source; this floor leaves a 33 dB window for quiet co-active sources.
  double min_weight_fraction = 5e-4;
  // Wall reflections form light clusters nested inside their source's time
  // span. A cluster mostly covered by a much heavier one is treated as an
  // echo, not a second source.
  double echo_overlap_fraction = 0.9;
  double echo_weight_fraction = 0.05;
  // Bins below this frequency carry no usable direction cue.
  double min_freq_hz = 100.0;
};

struct LocalizationResult {
  DirectionZone zone;
  Vec3 mean_direction;
  double onset_s = 0.0;
  double offset_s = 0.0;
  double confidence = 0.0;
};

namespace detail {

// One (frame, octave-band) direction estimate: the vector sum of gated bin
// IVs, its norm as clustering weight, and the raw norm sum for confidence.
struct DirectionCell {
  std::size_t frame = 0;
  Vec3 sum;
  double weight = 0.0;
  double norm_sum = 0.0;
};

struct Cluster {
  Vec3 sum;
  double weight = 0.0;
  double norm_sum = 0.0;
  std::size_t cells = 0;
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;

  void absorb(const DirectionCell& cell) {
    sum = sum + cell.sum;
    weight += cell.weight;
    norm_sum += cell.norm_sum;
    cells += 1;
    first_frame = std::min(first_frame, cell.frame);
    last_frame = std::max(last_frame, cell.frame);
  }

  void absorb(const Cluster& other) {
    sum = sum + other.sum;
    weight += other.weight;
    norm_sum += other.norm_sum;
    cells += other.cells;
    first_frame = std::min(first_frame, other.first_frame);
    last_frame = std::max(last_frame, other.last_frame);
  }
};

// Greedy agglomeration: heaviest cells seed clusters, every cell joins the
// nearest cluster within the angular threshold, then clusters that drifted
// within the threshold of each other merge until stable.
inline std::vector<Cluster> cluster_cells(std::vector<DirectionCell> cells,
                                          double angle_deg) {
  std::stable_sort(cells.begin(), cells.end(),
                   [](const DirectionCell& a, const DirectionCell& b) {
                     return a.weight > b.weight;
                   });
  std::vector<Cluster> clusters;
  for (const DirectionCell& cell : cells) {
    if (!(cell.weight > 0.0)) continue;
    Cluster* best = nullptr;
    double best_angle = angle_deg;
    for (Cluster& c : clusters) {
      double a = angle_between_deg(c.sum, cell.sum);
      if (a <= best_angle) {
        best_angle = a;
        best = &c;
      }
    }
    if (best) {
      best->absorb(cell);
    } else {
      Cluster c;
      c.first_frame = c.last_frame = cell.frame;
      c.absorb(cell);
      clusters.push_back(c);
    }
  }
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        if (angle_between_deg(clusters[i].sum, clusters[j].sum) <= angle_deg) {
          clusters[i].absorb(clusters[j]);
          clusters.erase(clusters.begin() +
                         static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
  }
  return clusters;
}

}  // namespace detail

/// Direction estimates from first-order intensity vectors, no learning
/// involved. Per TF bin, I = Re{conj(W) (X, Y, Z)}; bins pass when the IV is
/// coherent enough (diffuseness gate); sustained runs of active frames form
/// events via hysteresis; inside an event, per-frame octave-band IV sums are
/// clustered by angle, one result per surviving cluster. Silence yields an
/// empty list.
inline std::vector<LocalizationResult> localize(
    const wav::AudioBuffer& foa, const LocalizerConfig& config = {}) {
  if (foa.num_channels() != 4)
    throw Error("localize: expected 4-channel first-order input");
  if (foa.sample_rate_hz <= 0) throw Error("localize: bad sample rate");
  const int fs = foa.sample_rate_hz;
  const double clip_s =
      static_cast<double>(foa.num_frames()) / static_cast<double>(fs);

  const dsp::Spectrogram sw =
      dsp::stft(foa.channels[0], config.window_len, config.hop_len);
  const dsp::Spectrogram sx =
      dsp::stft(foa.channels[1], config.window_len, config.hop_len);
  const dsp::Spectrogram sy =
      dsp::stft(foa.channels[2], config.window_len, config.hop_len);
  const dsp::Spectrogram sz =
      dsp::stft(foa.channels[3], config.window_len, config.hop_len);
  const std::size_t frames = sw.size();
  const std::size_t bins = sw.empty() ? 0 : sw[0].size();
  const double bin_hz = static_cast<double>(fs) / config.window_len;
  const std::size_t first_bin = std::min(
      bins, static_cast<std::size_t>(
                std::ceil(config.min_freq_hz / bin_hz)));

  // Octave band edges starting at min_freq_hz; the last band runs to
  // Nyquist.
  std::vector<std::size_t> band_of_bin(bins, 0);
  std::size_t band_count = 0;
  {
    double lo = config.min_freq_hz;
    for (std::size_t b = first_bin; b < bins; ++b) {
      double f = static_cast<double>(b) * bin_hz;
      while (f >= 2.0 * lo && 4.0 * lo < fs / 2.0) {
        lo *= 2.0;
        ++band_count;
      }
      band_of_bin[b] = band_count;
    }
    ++band_count;
  }

  std::vector<std::vector<detail::DirectionCell>> frame_cells(frames);
  std::vector<double> energy_strict(frames, 0.0);
  std::vector<bool> coherent_frame(frames, false);
  std::vector<int> strict_bins(frames, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<detail::DirectionCell> cells(band_count);
    for (std::size_t b = 0; b < band_count; ++b) cells[b].frame = t;
    double energy_all = 0.0;
    for (std::size_t f = first_bin; f < bins; ++f) {
      const std::complex<double> w = sw[t][f];
      const double ix = (std::conj(w) * sx[t][f]).real();
      const double iy = (std::conj(w) * sy[t][f]).real();
      const double iz = (std::conj(w) * sz[t][f]).real();
      const double iv_norm = std::sqrt(ix * ix + iy * iy + iz * iz);
      const double dir_energy = std::sqrt(std::norm(sx[t][f]) +
                                          std::norm(sy[t][f]) +
                                          std::norm(sz[t][f]));
      const double denom = std::abs(w) * dir_energy;
      if (!(denom > 0.0)) continue;
      const double coherence = iv_norm / denom;
      energy_all += iv_norm;
      if (coherence >= config.activity_gate) {
        energy_strict[t] += iv_norm;
        strict_bins[t] += 1;
      }
      if (coherence < config.diffuseness_gate) continue;
      detail::DirectionCell& cell = cells[band_of_bin[f]];
      cell.sum = cell.sum + Vec3{ix, iy, iz};
      cell.norm_sum += iv_norm;
    }
    coherent_frame[t] =
        strict_bins[t] >= config.min_active_bins && energy_all > 0.0 &&
        energy_strict[t] >= config.activity_fraction * energy_all;
    for (detail::DirectionCell& cell : cells) {
      cell.weight = norm(cell.sum);
      if (cell.weight > 0.0) frame_cells[t].push_back(cell);
    }
  }

  // A clip with no coherent frame anywhere holds no directional source; a
  // diffuse background alone never trips this.
  const bool has_directional =
      std::find(coherent_frame.begin(), coherent_frame.end(), true) !=
      coherent_frame.end();
  if (!has_directional) return {};
  const double peak_strict =
      *std::max_element(energy_strict.begin(), energy_strict.end());
  std::vector<bool> frame_active(frames, false);
  for (std::size_t t = 0; t < frames; ++t)
    frame_active[t] =
        strict_bins[t] >= config.min_active_bins &&
        (coherent_frame[t] ||
         energy_strict[t] >= config.activity_floor_ratio * peak_strict);

  const double frame_rate =
      static_cast<double>(fs) / static_cast<double>(config.hop_len);
  const std::size_t on_frames = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.hysteresis_on_s * frame_rate)));
  const std::size_t off_frames = std::max<std::size_t>(
      1,
      static_cast<std::size_t>(std::ceil(config.hysteresis_off_s * frame_rate)));

  struct Event {
    std::size_t begin, end;  // frame span, end exclusive
  };
  std::vector<Event> events;
  std::size_t run_start = 0, run_len = 0;
  std::size_t event_start = 0, idle_len = 0;
  bool in_event = false;
  for (std::size_t t = 0; t <= frames; ++t) {
    const bool active = t < frames && frame_active[t];
    if (!in_event) {
      if (active) {
        if (run_len == 0) run_start = t;
        if (++run_len >= on_frames) {
          in_event = true;
          event_start = run_start;
          idle_len = 0;
        }
      } else {
        run_len = 0;
      }
    } else {
      if (active) {
        idle_len = 0;
      } else {
        ++idle_len;
        if (idle_len >= off_frames || t == frames) {
          events.push_back({event_start, t + 1 - idle_len});
          in_event = false;
          run_len = 0;
        }
      }
    }
    if (t == frames && in_event) {
      events.push_back({event_start, frames - std::min(frames, idle_len)});
      in_event = false;
    }
  }

  std::vector<LocalizationResult> results;
  for (const Event& ev : events) {
    std::vector<detail::DirectionCell> cells;
    for (std::size_t t = ev.begin; t < ev.end; ++t)
      cells.insert(cells.end(), frame_cells[t].begin(), frame_cells[t].end());
    std::vector<detail::Cluster> clusters =
        detail::cluster_cells(std::move(cells), config.cluster_angle_deg);
    std::stable_sort(clusters.begin(), clusters.end(),
                     [](const detail::Cluster& a, const detail::Cluster& b) {
                       return a.weight > b.weight;
                     });
    const double heaviest = clusters.empty() ? 0.0 : clusters[0].weight;
    std::vector<const detail::Cluster*> kept;
    for (const detail::Cluster& c : clusters) {
      if (c.cells < 3) continue;
      if (!(norm(c.sum) > 0.0) || !(c.norm_sum > 0.0)) continue;
      if (c.weight < config.min_weight_fraction * heaviest) continue;
      const double span =
          static_cast<double>(c.last_frame - c.first_frame) + 1.0;
      bool echo = false;
      for (const detail::Cluster* k : kept) {
        const double lo = static_cast<double>(
            std::max(c.first_frame, k->first_frame));
        const double hi = static_cast<double>(
            std::min(c.last_frame, k->last_frame) + 1);
        const double covered = std::max(0.0, hi - lo) / span;
        if (covered >= config.echo_overlap_fraction &&
            c.weight < config.echo_weight_fraction * k->weight) {
          echo = true;
          break;
        }
      }
      if (echo) continue;
      kept.push_back(&c);
    }
    for (const detail::Cluster* kc : kept) {
      const detail::Cluster& c = *kc;
      LocalizationResult r;
      r.mean_direction = normalized(c.sum);
      r.zone = quantize_direction(r.mean_direction);
      r.onset_s = std::clamp(static_cast<double>(c.first_frame) *
                                 config.hop_len / fs,
                             0.0, clip_s);
      r.offset_s = std::clamp((static_cast<double>(c.last_frame) *
                                   config.hop_len +
                               config.window_len) /
                                  fs,
                              0.0, clip_s);
      r.confidence = std::min(1.0, norm(c.sum) / c.norm_sum);
      results.push_back(r);
    }
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const LocalizationResult& a, const LocalizationResult& b) {
                     return a.onset_s < b.onset_s;
                   });
  return results;
}

inline Json localization_to_json(const std::vector<LocalizationResult>& rs) {
  Json j;
  j["events"] = Json::array();
  for (const auto& r : rs) {
    Json je;
    je["zone"] = zone_name(r.zone);
    je["mean_direction"] = vec3_to_json(r.mean_direction);
    je["onset_s"] = r.onset_s;
    je["offset_s"] = r.offset_s;
    je["confidence"] = r.confidence;
    j["events"].push_back(je);
  }
  return j;
}

}  // namespace loc
}  // namespace foascene

#endif  // FOASCENE_IV_LOCALIZER_HPP_
