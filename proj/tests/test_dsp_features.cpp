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

#include "foascene/dsp_features.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "foascene/rng.hpp"
#include "foascene/wav_io.hpp"

namespace {

using namespace foascene;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

std::vector<std::complex<double>> naive_dft_bins(
    const std::vector<double>& x, int bins) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += x[static_cast<std::size_t>(i)] *
             std::exp(std::complex<double>(0.0, -2.0 * kPi * k * i / n));
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

std::vector<double> sine(double freq_hz, double rate_hz, std::size_t len,
                         double amp = 1.0) {
  std::vector<double> x(len);
  for (std::size_t i = 0; i < len; ++i)
    x[i] = amp * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) /
                          rate_hz);
  return x;
}

std::vector<double> white_noise(Rng& rng, std::size_t len) {
  std::vector<double> x(len);
  for (double& v : x) v = rng.normal();
  return x;
}

wav::AudioBuffer plane_wave_foa(const std::vector<double>& sig,
                                double az_deg, double el_deg, int rate) {
  Vec3 d = direction_from_angles(az_deg, el_deg);
  wav::AudioBuffer buf;
  buf.sample_rate_hz = rate;
  buf.channels.assign(4, std::vector<double>(sig.size()));
  const double root2 = std::sqrt(2.0);
  for (std::size_t i = 0; i < sig.size(); ++i) {
    buf.channels[0][i] = sig[i] / root2;
    buf.channels[1][i] = sig[i] * d.x;
    buf.channels[2][i] = sig[i] * d.y;
    buf.channels[3][i] = sig[i] * d.z;
  }
  return buf;
}

}  // namespace

TEST_CASE("stft shapes and padding", "[features]") {
  std::vector<double> x(16000, 0.0);
  auto spec = dsp::stft(x, 512, 160);
  // ceil((16000 - 512) / 160) + 1
  REQUIRE(spec.size() == 98);
  REQUIRE(spec[0].size() == 257);
  for (const auto& frame : spec)
    for (const auto& v : frame) REQUIRE(std::abs(v) == 0.0);

  auto tiny = dsp::stft(std::vector<double>(10, 1.0), 512, 160);
  REQUIRE(tiny.size() == 1);

  auto exact = dsp::stft(std::vector<double>(512, 0.0), 512, 160);
  REQUIRE(exact.size() == 1);

  REQUIRE_THROWS_AS(dsp::stft(x, 500, 160), Error);
  REQUIRE_THROWS_AS(dsp::stft(x, 512, 0), Error);
  REQUIRE_THROWS_AS(dsp::stft(x, 512, 513), Error);
}

TEST_CASE("stft frames match a windowed dft oracle", "[features]") {
  Rng rng(0x5712u);
  std::vector<double> x = white_noise(rng, 2000);
  auto spec = dsp::stft(x, 512, 160);
  auto window = dsp::hann_window(512);

  for (std::size_t t : {std::size_t{0}, std::size_t{3}}) {
    std::vector<double> frame(512);
    for (std::size_t i = 0; i < 512; ++i) {
      std::size_t idx = t * 160 + i;
      frame[i] = idx < x.size() ? x[idx] * window[i] : 0.0;
    }
    auto oracle = naive_dft_bins(frame, 257);
    for (std::size_t k = 0; k < 257; ++k)
      REQUIRE_THAT(std::abs(spec[t][k] - oracle[k]), WithinAbs(0.0, 1e-8));

    // Parseval over the one-sided bins.
    double time_energy = 0.0;
    for (double v : frame) time_energy += v * v;
    double freq_energy =
        std::norm(spec[t][0]) + std::norm(spec[t][256]);
    for (std::size_t k = 1; k < 256; ++k)
      freq_energy += 2.0 * std::norm(spec[t][k]);
    freq_energy /= 512.0;
    REQUIRE_THAT(freq_energy, WithinRel(time_energy, 1e-6));
  }
}

TEST_CASE("sine concentrates in its bin neighborhood", "[features]") {
  const double rate = 16000.0;
  const int bin = 32;  // 1 kHz at 512-sample window
  auto x = sine(bin * rate / 512.0, rate, 8000);
  auto spec = dsp::stft(x, 512, 160);
  const auto& frame = spec[10];
  double total = 0.0, local = 0.0;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    double e = std::norm(frame[k]);
    total += e;
    if (k >= bin - 1 && k <= bin + 1) local += e;
  }
  REQUIRE(local / total > 0.99);
}

TEST_CASE("mel filterbank structure", "[features]") {
  auto fb = dsp::mel_filterbank(16000.0, 512, 64);
  REQUIRE(fb.size() == 64);
  REQUIRE(fb[0].size() == 257);
  // Every filter touches at least one FFT bin.
  for (const auto& row : fb) {
    double peak = 0.0;
    for (double v : row) {
      REQUIRE(v >= 0.0);
      peak = std::max(peak, v);
    }
    REQUIRE(peak > 0.0);
  }
  // Area normalization keeps the per-FFT-bin column totals small.
  for (std::size_t k = 0; k < 257; ++k) {
    double col = 0.0;
    for (const auto& row : fb) col += row[k];
    REQUIRE(col <= 1.0 + 1e-9);
  }
  REQUIRE_THROWS_AS(dsp::mel_filterbank(16000.0, 512, 4), Error);
}

TEST_CASE("white noise is flat across mel bins", "[features]") {
  Rng rng(0x11aau);
  auto x = white_noise(rng, 64000);
  auto spec = dsp::stft(x, 512, 160);
  auto mel = dsp::mel_spectrogram(spec, 16000.0, 64);
  std::vector<double> avg(64, 0.0);
  for (const auto& frame : mel)
    for (std::size_t m = 0; m < 64; ++m) avg[m] += frame[m];
  double lo = 1e300, hi = -1e300;
  for (double& v : avg) {
    v /= static_cast<double>(mel.size());
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // 6 dB = 0.6 in log10 power units.
  REQUIRE(hi - lo <= 0.6);
}

TEST_CASE("silence hits the log floor everywhere", "[features]") {
  auto spec = dsp::stft(std::vector<double>(4000, 0.0), 512, 160);
  auto mel = dsp::mel_spectrogram(spec, 16000.0, 64);
  for (const auto& frame : mel)
    for (double v : frame) REQUIRE_THAT(v, WithinAbs(-10.0, 1e-12));
}

TEST_CASE("plane wave intensity closed form", "[features]") {
  Rng rng(0x77e0u);
  auto sig = white_noise(rng, 16000);
  const double expected = 3.0 * std::sqrt(2.0) / 5.0;

  SECTION("from +x") {
    auto foa = plane_wave_foa(sig, 0.0, 0.0, 16000);
    auto fs = dsp::extract_features(foa);
    for (const auto& frame : fs.iv_x)
      for (double v : frame) REQUIRE_THAT(v, WithinAbs(expected, 1e-4));
    for (const auto& frame : fs.iv_y)
      for (double v : frame) REQUIRE(v == 0.0);
    for (const auto& frame : fs.iv_z)
      for (double v : frame) REQUIRE(v == 0.0);
  }
  SECTION("from -y") {
    auto foa = plane_wave_foa(sig, -90.0, 0.0, 16000);
    auto fs = dsp::extract_features(foa);
    for (const auto& frame : fs.iv_y)
      for (double v : frame) {
        REQUIRE(v < 0.0);
        REQUIRE_THAT(v, WithinAbs(-expected, 1e-4));
      }
  }
  SECTION("w only signal has zero intensity") {
    wav::AudioBuffer buf;
    buf.sample_rate_hz = 16000;
    buf.channels.assign(4, std::vector<double>(8000, 0.0));
    buf.channels[0] = sine(500.0, 16000.0, 8000);
    auto fs = dsp::extract_features(buf);
    for (const auto* m : {&fs.iv_x, &fs.iv_y, &fs.iv_z})
      for (const auto& frame : *m)
        for (double v : frame) REQUIRE(v == 0.0);
  }
}

TEST_CASE("intensity bounds hold for arbitrary content", "[features]") {
  Rng rng(0xbeefu);
  wav::AudioBuffer buf;
  buf.sample_rate_hz = 16000;
  for (int c = 0; c < 4; ++c) buf.channels.push_back(white_noise(rng, 8000));
  auto fs = dsp::extract_features(buf);
  const double bound = std::sqrt(3.0) / 2.0 + 1e-9;
  for (const auto* m : {&fs.iv_x, &fs.iv_y, &fs.iv_z})
    for (const auto& frame : *m)
      for (double v : frame) {
        REQUIRE(v <= bound);
        REQUIRE(v >= -bound);
      }
}

TEST_CASE("mirroring y negates iv_y exactly", "[features]") {
  Rng rng(0x2b2bu);
  wav::AudioBuffer buf;
  buf.sample_rate_hz = 16000;
  for (int c = 0; c < 4; ++c) buf.channels.push_back(white_noise(rng, 6000));
  auto fs = dsp::extract_features(buf);

  wav::AudioBuffer mirrored = buf;
  for (double& v : mirrored.channels[2]) v = -v;
  auto fs2 = dsp::extract_features(mirrored);

  REQUIRE(fs2.iv_y.size() == fs.iv_y.size());
  for (std::size_t t = 0; t < fs.iv_y.size(); ++t)
    for (std::size_t m = 0; m < fs.iv_y[t].size(); ++m) {
      REQUIRE(fs2.iv_y[t][m] == -fs.iv_y[t][m]);
      REQUIRE(fs2.iv_x[t][m] == fs.iv_x[t][m]);
      REQUIRE(fs2.iv_z[t][m] == fs.iv_z[t][m]);
      REQUIRE(fs2.mel_y[t][m] == fs.mel_y[t][m]);
      REQUIRE(fs2.mel_w[t][m] == fs.mel_w[t][m]);
    }
}

TEST_CASE("all seven maps share shape", "[features]") {
  Rng rng(0x3141u);
  wav::AudioBuffer buf;
  buf.sample_rate_hz = 16000;
  for (int c = 0; c < 4; ++c) buf.channels.push_back(white_noise(rng, 12345));
  auto fs = dsp::extract_features(buf);
  // ceil((12345 - 512) / 160) + 1
  REQUIRE(fs.num_frames == 75);
  REQUIRE(fs.mel_bins == 64);
  REQUIRE_THAT(fs.frame_rate_hz, WithinAbs(100.0, 1e-12));
  for (const auto* m : {&fs.mel_w, &fs.mel_x, &fs.mel_y, &fs.mel_z, &fs.iv_x,
                        &fs.iv_y, &fs.iv_z}) {
    REQUIRE(m->size() == 75);
    for (const auto& row : *m) REQUIRE(row.size() == 64);
  }

  wav::AudioBuffer bad;
  bad.sample_rate_hz = 16000;
  bad.channels.assign(2, std::vector<double>(100, 0.0));
  REQUIRE_THROWS_AS(dsp::extract_features(bad), Error);
}

TEST_CASE("feature file round trip", "[features]") {
  Rng rng(0x60f3u);
  wav::AudioBuffer buf;
  buf.sample_rate_hz = 16000;
  for (int c = 0; c < 4; ++c) buf.channels.push_back(white_noise(rng, 5000));
  auto fs = dsp::extract_features(buf);

  const std::string path = "features_roundtrip.bin";
  dsp::write_feature_file(path, fs);
  auto loaded = dsp::read_feature_file(path);
  std::remove(path.c_str());

  REQUIRE(loaded.num_frames == fs.num_frames);
  REQUIRE(loaded.mel_bins == fs.mel_bins);
  REQUIRE_THAT(loaded.frame_rate_hz, WithinAbs(fs.frame_rate_hz, 1e-6));
  auto check = [](const std::vector<std::vector<double>>& a,
                  const std::vector<std::vector<double>>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t)
      for (std::size_t m = 0; m < a[t].size(); ++m)
        REQUIRE(static_cast<float>(a[t][m]) == static_cast<float>(b[t][m]));
  };
  check(fs.mel_w, loaded.mel_w);
  check(fs.mel_x, loaded.mel_x);
  check(fs.mel_y, loaded.mel_y);
  check(fs.mel_z, loaded.mel_z);
  check(fs.iv_x, loaded.iv_x);
  check(fs.iv_y, loaded.iv_y);
  check(fs.iv_z, loaded.iv_z);

  REQUIRE_THROWS_AS(dsp::read_feature_file("missing_features.bin"), Error);
}
