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

#ifndef FOASCENE_EMBED_CLIENT_HPP_
#define FOASCENE_EMBED_CLIENT_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <future>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "foascene/common.hpp"
#include "foascene/semantic_sim.hpp"

namespace foascene::embed {

/// The service answered but the answer cannot be used: a rejecting status, a
/// body that is not the documented shape, a row count that does not match the
/// request, or a vector that cannot be scaled to unit length.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

/// Transport failures and 5xx statuses that persisted through every retry.
class ServiceUnavailable : public Error {
 public:
  explicit ServiceUnavailable(const std::string& msg) : Error(msg) {}
};

struct EndpointConfig {
  std::string url = "http://127.0.0.1:8765";
  std::string path = "/embed";
  std::size_t batch_size = 32;  // texts per wire request
  double timeout_s = 10.0;
  int max_retries = 2;     // attempts beyond the first
  double backoff_s = 0.25;  // doubles after each failed attempt
};

namespace detail {

using Json = nlohmann::ordered_json;

/// POSTs one JSON body. Retries transport failures and 5xx with doubling
/// backoff; any other non-200 status aborts at once since resending the same
/// request cannot change the verdict.
inline std::string post_json(const std::string& body,
                             const EndpointConfig& endpoint) {
  const std::string where = "POST " + endpoint.url + endpoint.path;
  std::string last_failure;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(endpoint.url);
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Result res = client.Post(endpoint.path, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (res && res->status / 100 != 5) {
      throw ProtocolError(where + " answered status " +
                          std::to_string(res->status));
    }
    last_failure = res ? "status " + std::to_string(res->status)
                       : httplib::to_string(res.error());
    if (attempt >= endpoint.max_retries) break;
    const double delay = endpoint.backoff_s * static_cast<double>(1 << attempt);
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
  throw ServiceUnavailable(where + " failed after " +
                           std::to_string(endpoint.max_retries + 1) +
                           " attempts: " + last_failure);
}

/// Parses {"embeddings": [[...], ...]}, checks the row count against the
/// request, and writes unit-length rows into out[offset..offset+expected).
inline void parse_embeddings(const std::string& body, std::size_t expected,
                             const EndpointConfig& endpoint,
                             std::vector<std::vector<double>>& out,
                             std::size_t offset) {
  const std::string where = endpoint.url + endpoint.path;
  const Json doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("embeddings") ||
      !doc["embeddings"].is_array()) {
    throw ProtocolError("response from " + where +
                        " is not an object with an \"embeddings\" array");
  }
  const Json& rows = doc["embeddings"];
  if (rows.size() != expected) {
    throw ProtocolError("asked " + where + " for " + std::to_string(expected) +
                        " embeddings, response carries " +
                        std::to_string(rows.size()));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Json& row = rows[r];
    const std::string label = "embedding " + std::to_string(r) + " from " +
                              where;
    if (!row.is_array() || row.empty()) {
      throw ProtocolError(label + " is not a non-empty array");
    }
    std::vector<double>& v = out[offset + r];
    v.resize(row.size());
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!row[k].is_number()) {
        throw ProtocolError(label + " holds a non-numeric entry");
      }
      v[k] = row[k].get<double>();
      norm_sq += v[k] * v[k];
    }
    if (!(norm_sq > 0.0) || !std::isfinite(norm_sq)) {
      throw ProtocolError(label + " cannot be scaled to unit length");
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
  }
}

}  // namespace detail

/// Embeds texts through the wire protocol: POST {endpoint.path} with
/// {"texts": [...]}, response {"embeddings": [[float, ...], ...]}. Returns one
/// unit vector per input text, in input order. Duplicate inputs collapse to a
/// single wire entry and requests carry at most endpoint.batch_size texts.
inline std::vector<std::vector<double>> embed_batch(
    const std::vector<std::string>& texts, const EndpointConfig& endpoint) {
  std::vector<std::vector<double>> out(texts.size());
  if (texts.empty()) return out;
  if (endpoint.batch_size == 0) throw Error("batch_size must be positive");

  std::vector<std::string> unique;
  std::map<std::string, std::size_t> first_slot;
  std::vector<std::size_t> slot(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto [it, fresh] = first_slot.emplace(texts[i], unique.size());
    if (fresh) unique.push_back(texts[i]);
    slot[i] = it->second;
  }

  std::vector<std::vector<double>> vecs(unique.size());
  for (std::size_t begin = 0; begin < unique.size();
       begin += endpoint.batch_size) {
    const std::size_t end =
        std::min(unique.size(), begin + endpoint.batch_size);
    detail::Json request;
    request["texts"] = detail::Json::array();
    for (std::size_t i = begin; i < end; ++i) {
      request["texts"].push_back(unique[i]);
    }
    const std::string body = detail::post_json(request.dump(), endpoint);
    detail::parse_embeddings(body, end - begin, endpoint, vecs, begin);
  }
  for (std::size_t i = 1; i < vecs.size(); ++i) {
    if (vecs[i].size() != vecs[0].size()) {
      throw ProtocolError("embedding dimensions disagree across a batch: " +
                          std::to_string(vecs[0].size()) + " vs " +
                          std::to_string(vecs[i].size()));
    }
  }
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = vecs[slot[i]];
  return out;
}

/// What-scorer backed by an external embedding service. similarity() is the
/// cosine of the two texts' unit embeddings, mapped from the raw [-1, 1] onto
/// [0, 1] as (x + 1) / 2. Embeddings are cached by text and concurrent
/// requests for the same text share one wire call, so an instance can be
/// handed to every scoring worker at once.
class EmbeddingSimilarity final : public SimilarityProvider {
 public:
  explicit EmbeddingSimilarity(EndpointConfig endpoint)
      : endpoint_(std::move(endpoint)) {}

  double similarity(const std::string& a, const std::string& b) override {
    const std::vector<double> va = embedding(a);
    const std::vector<double> vb = embedding(b);
    if (va.size() != vb.size()) {
      throw ProtocolError("embedding dimensions disagree across requests: " +
                          std::to_string(va.size()) + " vs " +
                          std::to_string(vb.size()));
    }
    double raw = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) raw += va[i] * vb[i];
    raw = std::clamp(raw, -1.0, 1.0);
    return (raw + 1.0) / 2.0;
  }

  const char* kind() const override { return "embedding_service"; }
  std::pair<double, double> raw_range() const override { return {-1.0, 1.0}; }

  /// Fetches every text not already cached or in flight, batched. Call once
  /// per corpus so repeated captions cost one wire entry instead of one
  /// round trip each.
  void prefetch(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    std::vector<std::promise<std::vector<double>>> claims;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (const std::string& t : texts) {
        if (cache_.count(t) || inflight_.count(t)) continue;
        claims.emplace_back();
        inflight_.emplace(t, claims.back().get_future().share());
        missing.push_back(t);
      }
    }
    if (missing.empty()) return;
    try {
      std::vector<std::vector<double>> got = embed_batch(missing, endpoint_);
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t i = 0; i < missing.size(); ++i) {
        cache_.emplace(missing[i], got[i]);
        inflight_.erase(missing[i]);
        ++fetched_texts_;
        claims[i].set_value(std::move(got[i]));
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t i = 0; i < missing.size(); ++i) {
        inflight_.erase(missing[i]);
        claims[i].set_exception(std::current_exception());
      }
      throw;
    }
  }

  std::size_t cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

  /// Texts that actually crossed the wire. Stays at the distinct-text count
  /// no matter how often each text is scored.
  std::size_t fetched_texts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return fetched_texts_;
  }

 private:
  std::vector<double> embedding(const std::string& text) {
    std::shared_future<std::vector<double>> shared;
    std::promise<std::vector<double>> claim;
    bool leader = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = cache_.find(text); it != cache_.end()) return it->second;
      if (auto it = inflight_.find(text); it != inflight_.end()) {
        shared = it->second;
      } else {
        shared = claim.get_future().share();
        inflight_.emplace(text, shared);
        leader = true;
      }
    }
    if (!leader) return shared.get();
    try {
      std::vector<std::vector<double>> got = embed_batch({text}, endpoint_);
      {
        std::lock_guard<std::mutex> lock(mu_);
        cache_.emplace(text, got[0]);
        inflight_.erase(text);
        ++fetched_texts_;
      }
      claim.set_value(std::move(got[0]));
    } catch (...) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        inflight_.erase(text);
      }
      claim.set_exception(std::current_exception());
      throw;
    }
    return shared.get();
  }

  EndpointConfig endpoint_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::vector<double>> cache_;
  std::unordered_map<std::string, std::shared_future<std::vector<double>>>
      inflight_;
  std::size_t fetched_texts_ = 0;
};

}  // namespace foascene::embed

#endif  // FOASCENE_EMBED_CLIENT_HPP_
