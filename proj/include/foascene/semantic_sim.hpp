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

#ifndef FOASCENE_SEMANTIC_SIM_HPP_
#define FOASCENE_SEMANTIC_SIM_HPP_

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "foascene/common.hpp"

namespace foascene {

/// Lowercases ASCII letters, strips ASCII punctuation, splits on whitespace.
/// Bytes outside ASCII pass through untouched, which leaves composed Unicode
/// text intact without carrying normalization tables. No stemming: stemming
/// would make scores language-dependent.
inline std::vector<std::string> normalize_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
      continue;
    }
    if (c < 0x80 && std::ispunct(c)) continue;
    cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                           : static_cast<char>(c));
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Cosine similarity over token-frequency vectors, range [0, 1]. Empty token
/// sets score 0 against anything (including another empty set).
inline double lexical_similarity(const std::string& a, const std::string& b) {
  std::map<std::string, int> fa, fb;
  for (auto& t : normalize_tokens(a)) fa[t]++;
  for (auto& t : normalize_tokens(b)) fb[t]++;
  if (fa.empty() || fb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, n] : fa) {
    na += static_cast<double>(n) * n;
    auto it = fb.find(t);
    if (it != fb.end()) dot += static_cast<double>(n) * it->second;
  }
  for (const auto& [t, n] : fb) nb += static_cast<double>(n) * n;
  double sim = dot / (std::sqrt(na) * std::sqrt(nb));
  return sim < 0.0 ? 0.0 : sim > 1.0 ? 1.0 : sim;
}

/// Text-pair scorer normalized to [0, 1]. Implementations must be symmetric
/// and safe to share across scoring workers. raw_range() declares the span of
/// scores before the affine map onto [0, 1], so reports can label how much of
/// the scale a backend can actually use.
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual double similarity(const std::string& a, const std::string& b) = 0;
  virtual const char* kind() const = 0;
  virtual std::pair<double, double> raw_range() const = 0;
};

class LexicalSimilarity final : public SimilarityProvider {
 public:
  double similarity(const std::string& a, const std::string& b) override {
    return lexical_similarity(a, b);
  }
  const char* kind() const override { return "lexical"; }
  std::pair<double, double> raw_range() const override { return {0.0, 1.0}; }
};

}  // namespace foascene

#endif  // FOASCENE_SEMANTIC_SIM_HPP_
