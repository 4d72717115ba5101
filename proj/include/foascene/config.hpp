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

#ifndef FOASCENE_CONFIG_HPP_
#define FOASCENE_CONFIG_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "foascene/common.hpp"
#include "foascene/dsp_features.hpp"
#include "foascene/embed_client.hpp"
#include "foascene/iv_localizer.hpp"
#include "foascene/scene_synth.hpp"

namespace foascene {

/// Everything a tool run needs, in one serializable bundle. Precedence when
/// resolving: command line beats environment beats config file beats these
/// defaults; the resolved bundle is logged so a run can be reproduced.
struct ToolConfig {
  std::uint64_t seed = 0;
  int workers = 0;  // 0 means all available cores
  int sample_rate_hz = 16000;
  // Wall absorption range for sampled rooms.
  double room_alpha_lo = 0.1;
  double room_alpha_hi = 0.6;
  synth::SynthConfig synth;
  dsp::FeatureConfig features;
  loc::LocalizerConfig localizer;
  embed::EndpointConfig embedding;
  std::string provider = "lexical";  // or "embedding_service"
};

namespace detail {

template <typename T>
inline void read_key(const Json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace detail

inline Json config_to_json(const ToolConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["sample_rate_hz"] = c.sample_rate_hz;
  j["provider"] = c.provider;
  Json room;
  room["alpha_lo"] = c.room_alpha_lo;
  room["alpha_hi"] = c.room_alpha_hi;
  j["room"] = room;
  Json synth;
  synth["max_sources"] = c.synth.max_sources;
  synth["clip_len_s"] = c.synth.clip_len_s;
  synth["snr_db_lo"] = c.synth.snr_db_lo;
  synth["snr_db_hi"] = c.synth.snr_db_hi;
  synth["background_level_db_lo"] = c.synth.background_level_db_lo;
  synth["background_level_db_hi"] = c.synth.background_level_db_hi;
  synth["eq_gain_limit_db"] = c.synth.eq_gain_limit_db;
  synth["eq_corner_lo_hz"] = c.synth.eq_corner_lo_hz;
  synth["eq_corner_hi_hz"] = c.synth.eq_corner_hi_hz;
  synth["min_source_window_s"] = c.synth.min_source_window_s;
  j["synth"] = synth;
  Json features;
  features["window_len"] = c.features.window_len;
  features["hop"] = c.features.hop;
  features["mel_bins"] = c.features.mel_bins;
  j["features"] = features;
  Json localizer;
  localizer["window_len"] = c.localizer.window_len;
  localizer["hop_len"] = c.localizer.hop_len;
  localizer["diffuseness_gate"] = c.localizer.diffuseness_gate;
  localizer["activity_gate"] = c.localizer.activity_gate;
  localizer["activity_fraction"] = c.localizer.activity_fraction;
  localizer["min_active_bins"] = c.localizer.min_active_bins;
  localizer["activity_floor_ratio"] = c.localizer.activity_floor_ratio;
  localizer["hysteresis_on_s"] = c.localizer.hysteresis_on_s;
  localizer["hysteresis_off_s"] = c.localizer.hysteresis_off_s;
  localizer["cluster_angle_deg"] = c.localizer.cluster_angle_deg;
  localizer["min_weight_fraction"] = c.localizer.min_weight_fraction;
  localizer["echo_overlap_fraction"] = c.localizer.echo_overlap_fraction;
  localizer["echo_weight_fraction"] = c.localizer.echo_weight_fraction;
  localizer["min_freq_hz"] = c.localizer.min_freq_hz;
  j["localizer"] = localizer;
  Json embedding;
  embedding["url"] = c.embedding.url;
  embedding["path"] = c.embedding.path;
  embedding["batch_size"] = c.embedding.batch_size;
  embedding["timeout_s"] = c.embedding.timeout_s;
  embedding["max_retries"] = c.embedding.max_retries;
  embedding["backoff_s"] = c.embedding.backoff_s;
  j["embedding"] = embedding;
  return j;
}

/// Overlays the keys present in j onto c; absent keys keep their value, so
/// partial config files compose with defaults and earlier layers.
inline void config_overlay_json(ToolConfig& c, const Json& j) {
  using detail::read_key;
  read_key(j, "seed", c.seed);
  read_key(j, "workers", c.workers);
  read_key(j, "sample_rate_hz", c.sample_rate_hz);
  read_key(j, "provider", c.provider);
  if (j.contains("room")) {
    const Json& r = j.at("room");
    read_key(r, "alpha_lo", c.room_alpha_lo);
    read_key(r, "alpha_hi", c.room_alpha_hi);
  }
  if (j.contains("synth")) {
    const Json& s = j.at("synth");
    read_key(s, "max_sources", c.synth.max_sources);
    read_key(s, "clip_len_s", c.synth.clip_len_s);
    read_key(s, "snr_db_lo", c.synth.snr_db_lo);
    read_key(s, "snr_db_hi", c.synth.snr_db_hi);
    read_key(s, "background_level_db_lo", c.synth.background_level_db_lo);
    read_key(s, "background_level_db_hi", c.synth.background_level_db_hi);
    read_key(s, "eq_gain_limit_db", c.synth.eq_gain_limit_db);
    read_key(s, "eq_corner_lo_hz", c.synth.eq_corner_lo_hz);
    read_key(s, "eq_corner_hi_hz", c.synth.eq_corner_hi_hz);
    read_key(s, "min_source_window_s", c.synth.min_source_window_s);
  }
  if (j.contains("features")) {
    const Json& f = j.at("features");
    read_key(f, "window_len", c.features.window_len);
    read_key(f, "hop", c.features.hop);
    read_key(f, "mel_bins", c.features.mel_bins);
  }
  if (j.contains("localizer")) {
    const Json& l = j.at("localizer");
    read_key(l, "window_len", c.localizer.window_len);
    read_key(l, "hop_len", c.localizer.hop_len);
    read_key(l, "diffuseness_gate", c.localizer.diffuseness_gate);
    read_key(l, "activity_gate", c.localizer.activity_gate);
    read_key(l, "activity_fraction", c.localizer.activity_fraction);
    read_key(l, "min_active_bins", c.localizer.min_active_bins);
    read_key(l, "activity_floor_ratio", c.localizer.activity_floor_ratio);
    read_key(l, "hysteresis_on_s", c.localizer.hysteresis_on_s);
    read_key(l, "hysteresis_off_s", c.localizer.hysteresis_off_s);
    read_key(l, "cluster_angle_deg", c.localizer.cluster_angle_deg);
    read_key(l, "min_weight_fraction", c.localizer.min_weight_fraction);
    read_key(l, "echo_overlap_fraction", c.localizer.echo_overlap_fraction);
    read_key(l, "echo_weight_fraction", c.localizer.echo_weight_fraction);
    read_key(l, "min_freq_hz", c.localizer.min_freq_hz);
  }
  if (j.contains("embedding")) {
    const Json& e = j.at("embedding");
    read_key(e, "url", c.embedding.url);
    read_key(e, "path", c.embedding.path);
    read_key(e, "batch_size", c.embedding.batch_size);
    read_key(e, "timeout_s", c.embedding.timeout_s);
    read_key(e, "max_retries", c.embedding.max_retries);
    read_key(e, "backoff_s", c.embedding.backoff_s);
  }
}

inline ToolConfig config_from_json(const Json& j) {
  ToolConfig c;
  config_overlay_json(c, j);
  return c;
}

/// Environment layer, applied between the config file and the command line.
/// Documented variables only; anything else in the environment is ignored.
inline void config_overlay_env(
    ToolConfig& c,
    const std::function<const char*(const char*)>& getenv_fn = [](
        const char* k) { return std::getenv(k); }) {
  auto text = [&](const char* key) -> const char* { return getenv_fn(key); };
  if (const char* v = text("FOASCENE_SEED")) c.seed = std::stoull(v);
  if (const char* v = text("FOASCENE_WORKERS")) c.workers = std::stoi(v);
  if (const char* v = text("FOASCENE_PROVIDER")) c.provider = v;
  if (const char* v = text("FOASCENE_EMBED_URL")) c.embedding.url = v;
  if (const char* v = text("FOASCENE_EMBED_TIMEOUT_S"))
    c.embedding.timeout_s = std::stod(v);
  if (const char* v = text("FOASCENE_EMBED_BATCH_SIZE"))
    c.embedding.batch_size = static_cast<std::size_t>(std::stoull(v));
}

inline void validate_config(const ToolConfig& c) {
  if (c.sample_rate_hz <= 0) throw Error("sample_rate_hz must be positive");
  if (c.workers < 0) throw Error("workers must be >= 0");
  if (c.synth.max_sources < 1) throw Error("max_sources must be >= 1");
  if (!(c.room_alpha_lo > 0.0 && c.room_alpha_hi <= 1.0 &&
        c.room_alpha_lo <= c.room_alpha_hi)) {
    throw Error("room absorption range must satisfy 0 < lo <= hi <= 1");
  }
  if (c.synth.snr_db_lo > c.synth.snr_db_hi)
    throw Error("snr range is inverted");
  if (c.provider != "lexical" && c.provider != "embedding_service")
    throw Error("provider must be lexical or embedding_service: " +
                c.provider);
}

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(0..count-1) on a worker pool. Work is handed out through an
/// atomic counter; the caller must make the body's output order-independent
/// (write into slot i, never append). If bodies throw, the exception from
/// the lowest index is rethrown after all workers drain.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& body) {
  const std::size_t pool_size = std::min(
      count, static_cast<std::size_t>(resolve_workers(workers)));
  if (pool_size <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr err;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < pool_size; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (i < err_index) {
            err_index = i;
            err = std::current_exception();
          }
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace foascene

#endif  // FOASCENE_CONFIG_HPP_
