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

#ifndef FOASCENE_WAV_IO_HPP_
#define FOASCENE_WAV_IO_HPP_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "foascene/common.hpp"

namespace foascene::wav {

class WavError : public Error {
 public:
  using Error::Error;
};

struct AudioBuffer {
  int sample_rate_hz = 0;
  // channels[c][i]: channel-major samples in [-1, 1] nominal full scale.
  std::vector<std::vector<double>> channels;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_frames() const {
    return channels.empty() ? 0 : channels.front().size();
  }
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

/// Reads a RIFF/WAVE file. Supports PCM 16/24/32-bit and IEEE float 32/64,
/// plus the WAVE_FORMAT_EXTENSIBLE wrapper around either.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open " + path.string());
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
      std::memcmp(data.data() + 8, "WAVE", 4) != 0) {
    throw WavError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* payload = nullptr;
  std::size_t payload_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const unsigned char* hdr = data.data() + pos;
    std::uint32_t chunk_len = detail::read_u32(hdr + 4);
    std::size_t body = pos + 8;
    if (body + chunk_len > data.size()) chunk_len = static_cast<std::uint32_t>(data.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      const unsigned char* f = data.data() + body;
      format = detail::read_u16(f);
      channels = detail::read_u16(f + 2);
      sample_rate = detail::read_u32(f + 4);
      bits = detail::read_u16(f + 14);
      if (format == 0xFFFE && chunk_len >= 40) {
        format = detail::read_u16(f + 24);  // first two bytes of SubFormat GUID
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      payload = data.data() + body;
      payload_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (payload == nullptr) throw WavError("no data chunk: " + path.string());
  if (channels == 0 || sample_rate == 0) throw WavError("bad fmt chunk: " + path.string());

  const std::size_t bytes_per_sample = bits / 8;
  if (bytes_per_sample == 0) throw WavError("bad bit depth: " + path.string());
  const std::size_t frames = payload_len / (bytes_per_sample * channels);

  AudioBuffer buf;
  buf.sample_rate_hz = static_cast<int>(sample_rate);
  buf.channels.assign(channels, std::vector<double>(frames));

  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = payload + (i * channels + c) * bytes_per_sample;
      double v = 0.0;
      if (format == 1 && bits == 16) {
        std::int16_t s = static_cast<std::int16_t>(detail::read_u16(p));
        v = static_cast<double>(s) / 32768.0;
      } else if (format == 1 && bits == 24) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = static_cast<double>(s) / 8388608.0;
      } else if (format == 1 && bits == 32) {
        std::int32_t s = static_cast<std::int32_t>(detail::read_u32(p));
        v = static_cast<double>(s) / 2147483648.0;
      } else if (format == 3 && bits == 32) {
        float f;
        std::uint32_t u = detail::read_u32(p);
        std::memcpy(&f, &u, 4);
        v = static_cast<double>(f);
      } else if (format == 3 && bits == 64) {
        std::uint64_t u = static_cast<std::uint64_t>(detail::read_u32(p)) |
                          (static_cast<std::uint64_t>(detail::read_u32(p + 4)) << 32);
        double d;
        std::memcpy(&d, &u, 8);
        v = d;
      } else {
        throw WavError("unsupported WAV encoding (format " + std::to_string(format) +
                       ", " + std::to_string(bits) + " bit): " + path.string());
      }
      buf.channels[c][i] = v;
    }
  }
  return buf;
}

/// Writes a 32-bit IEEE float WAV. Channel order is preserved as given
/// (for FOA output the order is W, X, Y, Z).
inline void write_wav_float32(const std::filesystem::path& path,
                              const AudioBuffer& buf) {
  if (buf.channels.empty()) throw WavError("write_wav: no channels");
  const std::size_t frames = buf.num_frames();
  for (const auto& ch : buf.channels) {
    if (ch.size() != frames) throw WavError("write_wav: channel length mismatch");
  }
  const std::uint16_t channels = static_cast<std::uint16_t>(buf.channels.size());
  const std::uint32_t data_len = static_cast<std::uint32_t>(frames * channels * 4);

  std::string out;
  out.reserve(60 + data_len);
  out += "RIFF";
  detail::put_u32(out, 4 + 26 + 12 + 8 + data_len);
  out += "WAVE";
  out += "fmt ";
  detail::put_u32(out, 18);
  detail::put_u16(out, 3);  // IEEE float
  detail::put_u16(out, channels);
  detail::put_u32(out, static_cast<std::uint32_t>(buf.sample_rate_hz));
  detail::put_u32(out, static_cast<std::uint32_t>(buf.sample_rate_hz) * channels * 4);
  detail::put_u16(out, static_cast<std::uint16_t>(channels * 4));
  detail::put_u16(out, 32);
  detail::put_u16(out, 0);  // cbSize
  out += "fact";
  detail::put_u32(out, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(frames));
  out += "data";
  detail::put_u32(out, data_len);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      float f = static_cast<float>(buf.channels[c][i]);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail::put_u32(out, u);
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw WavError("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw WavError("short write: " + path.string());
}

}  // namespace foascene::wav

#endif  // FOASCENE_WAV_IO_HPP_
