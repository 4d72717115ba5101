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

#ifndef FOASCENE_DSP_FEATURES_HPP_
#define FOASCENE_DSP_FEATURES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "foascene/common.hpp"
#include "foascene/fft.hpp"
#include "foascene/wav_io.hpp"

namespace foascene {
namespace dsp {

using Spectrogram = std::vector<std::vector<std::complex<double>>>;

inline std::vector<double> hann_window(int n) {
  // Periodic form, the STFT convention.
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
  return w;
}

/// Hann-windowed STFT. Frames start every `hop` samples; the tail is
/// zero-padded. Input shorter than one window yields a single padded frame.
inline Spectrogram stft(const std::vector<double>& samples, int window_len,
                        int hop) {
  if (window_len < 2 || (window_len & (window_len - 1)) != 0)
    throw Error("stft: window length must be a power of two");
  if (hop < 1 || hop > window_len)
    throw Error("stft: hop must be in [1, window length]");
  const std::size_t len = samples.size();
  const std::size_t win = static_cast<std::size_t>(window_len);
  std::size_t frames =
      len <= win ? 1 : (len - win + static_cast<std::size_t>(hop) - 1) /
                               static_cast<std::size_t>(hop) +
                           1;
  std::vector<double> window = hann_window(window_len);
  Spectrogram out(frames);
  std::vector<double> frame(win);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t start = t * static_cast<std::size_t>(hop);
    for (std::size_t i = 0; i < win; ++i) {
      std::size_t idx = start + i;
      frame[i] = idx < len ? samples[idx] * window[i] : 0.0;
    }
    out[t] = rfft(frame, window_len);
  }
  return out;
}

/// Triangular mel filterbank [mel_bins x fft_bins], Slaney frequency scale
/// (linear to 1 kHz, logarithmic above) with area normalization, so each
/// row integrates to one over frequency.
inline std::vector<std::vector<double>> mel_filterbank(double sample_rate_hz,
                                                       int window_len,
                                                       int mel_bins) {
  if (mel_bins < 8) throw Error("mel_filterbank: need at least 8 bins");
  const int fft_bins = window_len / 2 + 1;
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double log_step = std::log(6.4) / 27.0;
  auto hz_to_mel = [&](double hz) {
    return hz < min_log_hz ? hz / f_sp
                           : min_log_mel + std::log(hz / min_log_hz) / log_step;
  };
  auto mel_to_hz = [&](double mel) {
    return mel < min_log_mel ? mel * f_sp
                             : min_log_hz * std::exp(log_step *
                                                     (mel - min_log_mel));
  };

  const double mel_max = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(mel_bins) + 2);
  for (int i = 0; i < mel_bins + 2; ++i)
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_max * i / (mel_bins + 1));

  std::vector<std::vector<double>> fb(
      static_cast<std::size_t>(mel_bins),
      std::vector<double>(static_cast<std::size_t>(fft_bins), 0.0));
  for (int m = 0; m < mel_bins; ++m) {
    double lo = edges[static_cast<std::size_t>(m)];
    double mid = edges[static_cast<std::size_t>(m) + 1];
    double hi = edges[static_cast<std::size_t>(m) + 2];
    double norm = 2.0 / (hi - lo);
    for (int k = 0; k < fft_bins; ++k) {
      double f = k * sample_rate_hz / window_len;
      double w = 0.0;
      if (f > lo && f < mid) {
        w = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = w * norm;
    }
  }
  return fb;
}

constexpr double kLogFloor = 1e-10;

/// Log mel power spectrogram [frames x mel_bins], base-10 log with a fixed
/// floor so silence maps to -10 everywhere.
inline std::vector<std::vector<double>> mel_spectrogram(
    const Spectrogram& spec, double sample_rate_hz, int mel_bins) {
  const std::size_t frames = spec.size();
  std::vector<std::vector<double>> out(
      frames, std::vector<double>(static_cast<std::size_t>(mel_bins), 0.0));
  if (frames == 0) return out;
  const int fft_bins = static_cast<int>(spec[0].size());
  const int window_len = (fft_bins - 1) * 2;
  auto fb = mel_filterbank(sample_rate_hz, window_len, mel_bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (int m = 0; m < mel_bins; ++m) {
      double acc = 0.0;
      const auto& row = fb[static_cast<std::size_t>(m)];
      for (int k = 0; k < fft_bins; ++k)
        acc += row[static_cast<std::size_t>(k)] *
               std::norm(spec[t][static_cast<std::size_t>(k)]);
      out[t][static_cast<std::size_t>(m)] =
          std::log10(std::max(acc, kLogFloor));
    }
  }
  return out;
}

struct IvMaps {
  std::vector<std::vector<double>> x, y, z;  // [frames x bins]
};

constexpr double kIvEpsilon = 1e-12;

/// Per TF bin acoustic intensity relative to W, normalized by total energy,
/// which bounds each component to [-sqrt(3)/2, sqrt(3)/2].
inline IvMaps intensity_vectors(const Spectrogram& w, const Spectrogram& x,
                                const Spectrogram& y, const Spectrogram& z) {
  const std::size_t frames = w.size();
  if (x.size() != frames || y.size() != frames || z.size() != frames)
    throw Error("intensity_vectors: mismatched frame counts");
  IvMaps iv;
  iv.x.resize(frames);
  iv.y.resize(frames);
  iv.z.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t bins = w[t].size();
    if (x[t].size() != bins || y[t].size() != bins || z[t].size() != bins)
      throw Error("intensity_vectors: mismatched bin counts");
    iv.x[t].resize(bins);
    iv.y[t].resize(bins);
    iv.z[t].resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> cw = std::conj(w[t][k]);
      double denom = std::norm(w[t][k]) +
                     (std::norm(x[t][k]) + std::norm(y[t][k]) +
                      std::norm(z[t][k])) /
                         3.0 +
                     kIvEpsilon;
      iv.x[t][k] = (cw * x[t][k]).real() / denom;
      iv.y[t][k] = (cw * y[t][k]).real() / denom;
      iv.z[t][k] = (cw * z[t][k]).real() / denom;
    }
  }
  return iv;
}

/// Collapses a linear-frequency map onto the mel grid as a filter-weighted
/// average, preserving the value range.
inline std::vector<std::vector<double>> mel_average(
    const std::vector<std::vector<double>>& map,
    const std::vector<std::vector<double>>& fb) {
  const std::size_t frames = map.size();
  const std::size_t mel_bins = fb.size();
  std::vector<std::vector<double>> out(frames,
                                       std::vector<double>(mel_bins, 0.0));
  std::vector<double> weight_sum(mel_bins, 0.0);
  for (std::size_t m = 0; m < mel_bins; ++m)
    for (double v : fb[m]) weight_sum[m] += v;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < mel_bins; ++m) {
      if (weight_sum[m] <= 0.0) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < fb[m].size() && k < map[t].size(); ++k)
        acc += fb[m][k] * map[t][k];
      out[t][m] = acc / weight_sum[m];
    }
  }
  return out;
}

struct FeatureConfig {
  int window_len = 512;  // 32 ms at 16 kHz, nearest power of two to 25 ms
  int hop = 160;         // 10 ms at 16 kHz
  int mel_bins = 64;
};

struct FeatureStack {
  int num_frames = 0;
  int mel_bins = 0;
  double frame_rate_hz = 0.0;
  std::vector<std::vector<double>> mel_w, mel_x, mel_y, mel_z;
  std::vector<std::vector<double>> iv_x, iv_y, iv_z;
};

/// The seven-map spatial front end: four log mel spectrograms plus three
/// mel-aggregated intensity vector maps, all [frames x mel_bins].
inline FeatureStack extract_features(const wav::AudioBuffer& foa,
                                     const FeatureConfig& cfg = {}) {
  if (foa.num_channels() != 4)
    throw Error("extract_features: expected 4 channels, got " +
                std::to_string(foa.num_channels()));
  Spectrogram sw = stft(foa.channels[0], cfg.window_len, cfg.hop);
  Spectrogram sx = stft(foa.channels[1], cfg.window_len, cfg.hop);
  Spectrogram sy = stft(foa.channels[2], cfg.window_len, cfg.hop);
  Spectrogram sz = stft(foa.channels[3], cfg.window_len, cfg.hop);

  FeatureStack fs;
  fs.num_frames = static_cast<int>(sw.size());
  fs.mel_bins = cfg.mel_bins;
  fs.frame_rate_hz = static_cast<double>(foa.sample_rate_hz) / cfg.hop;
  double rate = static_cast<double>(foa.sample_rate_hz);
  fs.mel_w = mel_spectrogram(sw, rate, cfg.mel_bins);
  fs.mel_x = mel_spectrogram(sx, rate, cfg.mel_bins);
  fs.mel_y = mel_spectrogram(sy, rate, cfg.mel_bins);
  fs.mel_z = mel_spectrogram(sz, rate, cfg.mel_bins);

  IvMaps iv = intensity_vectors(sw, sx, sy, sz);
  auto fb = mel_filterbank(rate, cfg.window_len, cfg.mel_bins);
  fs.iv_x = mel_average(iv.x, fb);
  fs.iv_y = mel_average(iv.y, fb);
  fs.iv_z = mel_average(iv.z, fb);
  return fs;
}

namespace detail {

inline void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  std::fwrite(b, 1, 4, f);
}

inline std::uint32_t get_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4)
    throw Error("feature file: truncated header");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_map(std::FILE* f, const std::vector<std::vector<double>>& m) {
  for (const auto& row : m)
    for (double v : row) {
      float x = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &x, 4);
      put_u32(f, bits);
    }
}

inline void get_map(std::FILE* f, std::vector<std::vector<double>>& m,
                    int frames, int bins) {
  m.assign(static_cast<std::size_t>(frames),
           std::vector<double>(static_cast<std::size_t>(bins)));
  for (auto& row : m)
    for (double& v : row) {
      std::uint32_t bits = get_u32(f);
      float x;
      std::memcpy(&x, &bits, 4);
      v = x;
    }
}

}  // namespace detail

constexpr std::uint32_t kFeatureMagic = 0x46414F46;  // "FOAF" little-endian
constexpr std::uint32_t kFeatureVersion = 1;

/// Binary layout: magic, version, num_frames, mel_bins as little-endian
/// u32; frame_rate_hz scaled by 1e6 as u32 pair (integral and fractional
/// microhertz); then seven row-major float32 maps in the order
/// mel_w, mel_x, mel_y, mel_z, iv_x, iv_y, iv_z.
inline void write_feature_file(const std::string& path,
                               const FeatureStack& fs) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw Error("feature file: cannot open " + path);
  detail::put_u32(f, kFeatureMagic);
  detail::put_u32(f, kFeatureVersion);
  detail::put_u32(f, static_cast<std::uint32_t>(fs.num_frames));
  detail::put_u32(f, static_cast<std::uint32_t>(fs.mel_bins));
  double scaled = fs.frame_rate_hz * 1e6;
  std::uint64_t micro = static_cast<std::uint64_t>(scaled + 0.5);
  detail::put_u32(f, static_cast<std::uint32_t>(micro & 0xFFFFFFFFu));
  detail::put_u32(f, static_cast<std::uint32_t>(micro >> 32));
  for (const auto* m : {&fs.mel_w, &fs.mel_x, &fs.mel_y, &fs.mel_z, &fs.iv_x,
                        &fs.iv_y, &fs.iv_z})
    detail::put_map(f, *m);
  std::fclose(f);
}

inline FeatureStack read_feature_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw Error("feature file: cannot open " + path);
  FeatureStack fs;
  try {
    if (detail::get_u32(f) != kFeatureMagic)
      throw Error("feature file: bad magic in " + path);
    if (detail::get_u32(f) != kFeatureVersion)
      throw Error("feature file: unsupported version in " + path);
    fs.num_frames = static_cast<int>(detail::get_u32(f));
    fs.mel_bins = static_cast<int>(detail::get_u32(f));
    std::uint64_t lo = detail::get_u32(f);
    std::uint64_t hi = detail::get_u32(f);
    fs.frame_rate_hz = static_cast<double>((hi << 32) | lo) / 1e6;
    for (auto* m : {&fs.mel_w, &fs.mel_x, &fs.mel_y, &fs.mel_z, &fs.iv_x,
                    &fs.iv_y, &fs.iv_z})
      detail::get_map(f, *m, fs.num_frames, fs.mel_bins);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return fs;
}

}  // namespace dsp
}  // namespace foascene

#endif  // FOASCENE_DSP_FEATURES_HPP_
