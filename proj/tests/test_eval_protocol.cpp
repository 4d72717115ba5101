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

#include "foascene/eval_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "foascene/rng.hpp"
#include "foascene/scene_text.hpp"
#include "foascene/semantic_sim.hpp"
#include "test_helpers.hpp"

namespace {

using namespace foascene;
using Catch::Matchers::WithinAbs;

SourceTuple make_tuple(const std::string& label, DirectionZone zone,
                       double onset, double offset, double distance = 2.0,
                       double loudness = -20.0, double c50 = 10.0) {
  SourceTuple t;
  t.label = label;
  t.transcription = label;
  t.onset_s = onset;
  t.offset_s = offset;
  t.zone = zone;
  t.distance_m = distance;
  t.loudness_dba = loudness;
  t.c50_db = c50;
  return t;
}

DirectionZone zone_at(double az, double el) {
  return quantize_direction(az, el);
}

// Oracle over all complete matchings via next_permutation, summing
// tuple_score directly from the original lists.
double oracle_os_total(const std::vector<SourceTuple>& G,
                       const std::vector<SourceTuple>& S,
                       SimilarityProvider& provider) {
  const int m = static_cast<int>(G.size());
  const int n = static_cast<int>(S.size());
  if (m == 0 || n == 0) return 0.0;
  double best = -1.0;
  if (m <= n) {
    std::vector<int> cols(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), 0);
    do {
      double total = 0.0;
      for (int i = 0; i < m; ++i)
        total += tuple_score(
            G[static_cast<std::size_t>(i)],
            S[static_cast<std::size_t>(cols[static_cast<std::size_t>(i)])],
            provider);
      best = std::max(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } else {
    std::vector<int> rows(static_cast<std::size_t>(m));
    std::iota(rows.begin(), rows.end(), 0);
    do {
      double total = 0.0;
      for (int j = 0; j < n; ++j)
        total += tuple_score(
            G[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)])],
            S[static_cast<std::size_t>(j)], provider);
      best = std::max(best, total);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

// Deterministic hypothesis corruption: perturbs attributes, drops ties to
// reality, occasionally deletes or duplicates tuples.
std::vector<SourceTuple> corrupt_tuples(const std::vector<SourceTuple>& refs,
                                        Rng& rng) {
  std::vector<SourceTuple> out;
  for (const SourceTuple& r : refs) {
    if (rng.uniform() < 0.15) continue;  // miss
    SourceTuple h = r;
    h.language.reset();
    h.is_speech = false;
    if (rng.uniform() < 0.4)
      h.zone = all_zones()[rng.uniform_int(0, 25)];
    if (rng.uniform() < 0.4 && h.onset_s && h.offset_s) {
      double shift = rng.uniform(-0.5, 0.5);
      h.onset_s = std::max(0.0, *h.onset_s + shift);
      h.offset_s = *h.offset_s + shift + rng.uniform(0.0, 0.4);
    }
    if (rng.uniform() < 0.3 && h.label)
      h.label = *h.label + " thing";
    h.transcription = h.label;
    if (rng.uniform() < 0.2) h.c50_db.reset();
    if (rng.uniform() < 0.2) h.loudness_dba.reset();
    if (rng.uniform() < 0.1) h.zone.reset();
    if (rng.uniform() < 0.15 && h.loudness_dba)
      h.loudness_dba = *h.loudness_dba + rng.uniform(-6.0, 6.0);
    if (rng.uniform() < 0.15 && h.distance_m)
      h.distance_m = *h.distance_m * rng.uniform(0.5, 2.0);
    out.push_back(h);
    if (rng.uniform() < 0.1) out.push_back(h);  // hallucinated duplicate
  }
  return out;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::optional<double>> all_metric_values(const ScoreReport& r) {
  std::vector<std::optional<double>> v;
  v.push_back(r.room_vol_err_log2);
  v.push_back(r.rt60_err_s);
  v.push_back(r.noise_sim);
  v.push_back(r.count_accuracy);
  for (Metric m : all_source_metrics()) v.push_back(r.metric_value(m));
  return v;
}

}  // namespace

TEST_CASE("interval iou units", "[eval]") {
  REQUIRE_THAT(interval_iou(1, 3, 1, 3), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(interval_iou(0, 2, 3, 5), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(interval_iou(0, 2, 1, 3), WithinAbs(1.0 / 3.0, 1e-15));
  REQUIRE_THAT(interval_iou(0, 0, 0, 0), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(interval_iou(2, 1, 5, 4), WithinAbs(0.0, 1e-15));
}

TEST_CASE("word error rate", "[eval]") {
  REQUIRE_THAT(word_error_rate("the cat sat", "the cat sat"),
               WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(word_error_rate("the cat sat", "the cat"),
               WithinAbs(1.0 / 3.0, 1e-15));
  REQUIRE_THAT(word_error_rate("The CAT, sat!", "the cat sat"),
               WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(word_error_rate("", "a b c"), WithinAbs(3.0, 1e-15));
  REQUIRE_THAT(word_error_rate("", ""), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(word_error_rate("a b", "x y z w"), WithinAbs(2.0, 1e-15));
}

TEST_CASE("lexical similarity", "[eval]") {
  LexicalSimilarity sim;
  REQUIRE_THAT(sim.similarity("Dog barking!", "dog barking"),
               WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(sim.similarity("rain", "piano"), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(sim.similarity("dog barking", "a dog barks"),
               WithinAbs(1.0 / std::sqrt(6.0), 1e-12));
  REQUIRE_THAT(sim.similarity("", "anything"), WithinAbs(0.0, 1e-15));
}

TEST_CASE("tuple score factors", "[eval]") {
  LexicalSimilarity sim;
  SourceTuple g = make_tuple("dog barking", zone_at(0, 0), 1.0, 3.0);
  SECTION("identical tuples score one") {
    REQUIRE_THAT(tuple_score(g, g, sim), WithinAbs(1.0, 1e-12));
  }
  SECTION("factor product with known values") {
    // What 0.5 (one shared token of two vs two), Where 0.75 (45 degrees),
    // When 0.8 (4s overlap over 5s union).
    SourceTuple gg = make_tuple("aa bb", zone_at(0, 0), 0.0, 4.0);
    SourceTuple s = make_tuple("aa cc", zone_at(45, 0), 0.0, 5.0);
    REQUIRE_THAT(what_score(gg, s, sim), WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(where_score(gg, s), WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(when_score(gg, s), WithinAbs(0.8, 1e-12));
    REQUIRE_THAT(tuple_score(gg, s, sim),
                 WithinAbs(std::cbrt(0.3), 1e-12));
    REQUIRE_THAT(tuple_score(gg, s, sim), WithinAbs(0.6694, 5e-4));
  }
  SECTION("disjoint time zeroes everything") {
    SourceTuple s = make_tuple("dog barking", zone_at(0, 0), 5.0, 7.0);
    REQUIRE_THAT(tuple_score(g, s, sim), WithinAbs(0.0, 1e-15));
  }
  SECTION("missing attributes zero their factor") {
    SourceTuple s = g;
    s.zone.reset();
    REQUIRE_THAT(tuple_score(g, s, sim), WithinAbs(0.0, 1e-15));
    s = g;
    s.onset_s.reset();
    REQUIRE_THAT(tuple_score(g, s, sim), WithinAbs(0.0, 1e-15));
    s = g;
    s.label.reset();
    s.transcription.reset();
    REQUIRE_THAT(tuple_score(g, s, sim), WithinAbs(0.0, 1e-15));
  }
  SECTION("bounds hold for random pairs") {
    Rng rng(0x90u);
    for (int i = 0; i < 500; ++i) {
      SourceMeta a = testing::random_quantized_source(rng);
      SourceMeta b = testing::random_quantized_source(rng);
      double v = tuple_score(tuple_from_meta(a), tuple_from_meta(b), sim);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("what score language gate", "[eval]") {
  LexicalSimilarity sim;
  SourceTuple g;
  g.label = "hello world there";
  g.transcription = g.label;
  g.language = Language::kEn;
  g.is_speech = true;
  SourceTuple s;
  s.label = "hello world";
  s.transcription = s.label;

  SECTION("speech pair without hypothesis language uses wer") {
    REQUIRE_THAT(what_score(g, s, sim), WithinAbs(2.0 / 3.0, 1e-12));
  }
  SECTION("matching language uses wer") {
    s.language = Language::kEn;
    REQUIRE_THAT(what_score(g, s, sim), WithinAbs(2.0 / 3.0, 1e-12));
  }
  SECTION("conflicting language falls back to similarity") {
    s.language = Language::kDe;
    REQUIRE_THAT(what_score(g, s, sim),
                 WithinAbs(2.0 / std::sqrt(6.0), 1e-12));
  }
  SECTION("non speech reference uses similarity") {
    SourceTuple g2 = g;
    g2.is_speech = false;
    g2.language.reset();
    REQUIRE_THAT(what_score(g2, s, sim),
                 WithinAbs(2.0 / std::sqrt(6.0), 1e-12));
  }
  SECTION("wer above one clamps to zero") {
    SourceTuple g3 = g;
    g3.label = "one";
    g3.transcription = g3.label;
    SourceTuple s3 = s;
    s3.label = "a b c d";
    s3.transcription = s3.label;
    REQUIRE_THAT(what_score(g3, s3, sim), WithinAbs(0.0, 1e-15));
  }
}

TEST_CASE("optimal source matching pairs jointly", "[eval]") {
  LexicalSimilarity sim;
  SECTION("single pair") {
    std::vector<SourceTuple> G{make_tuple("dog", zone_at(0, 0), 0, 2)};
    std::vector<SourceTuple> S{make_tuple("dog", zone_at(0, 0), 0, 2)};
    Matching m = find_permutation_os(G, S, sim);
    REQUIRE(m.g_to_s == std::vector<int>{0});
    REQUIRE_THAT(m.total_score, WithinAbs(1.0, 1e-12));
    REQUIRE(m.unmatched_ref.empty());
    REQUIRE(m.unmatched_hyp.empty());
  }
  SECTION("crossed labels pick the joint optimum") {
    std::vector<SourceTuple> G{
        make_tuple("dog bark", zone_at(0, 0), 0, 2),
        make_tuple("cat meow", zone_at(45, 0), 0, 2)};
    std::vector<SourceTuple> S{
        make_tuple("cat meow", zone_at(0, 0), 0, 2),
        make_tuple("dog bark", zone_at(45, 0), 0, 2)};
    Matching m = find_permutation_os(G, S, sim);
    // Swapping preserves the labels at 45 degrees of direction error;
    // keeping positions would zero the what factor.
    REQUIRE(m.g_to_s == std::vector<int>{1, 0});
    REQUIRE_THAT(m.total_score, WithinAbs(2.0 * std::cbrt(0.75), 1e-12));
  }
  SECTION("joint choice forbids per metric double perfection") {
    std::vector<SourceTuple> G{
        make_tuple("dog", zone_at(0, 0), 0, 2),
        make_tuple("cat", zone_at(180, 0), 0, 2)};
    std::vector<SourceTuple> S{
        make_tuple("cat", zone_at(0, 0), 0, 2),
        make_tuple("dog", zone_at(180, 0), 0, 2)};
    Matching os = find_permutation_os(G, S, sim);
    auto sim_under_os =
        aggregate_metric(G, S, os.g_to_s, Metric::kSourceSim, sim);
    auto zerr_under_os =
        aggregate_metric(G, S, os.g_to_s, Metric::kZoneErr, sim);
    REQUIRE(sim_under_os.has_value());
    REQUIRE(zerr_under_os.has_value());
    // One fixed association cannot win both.
    REQUIRE(!(*sim_under_os > 0.99 && *zerr_under_os < 1.0));
    // Per-metric optima each reach perfection on their own matching.
    Matching om_sim = find_permutation_om(G, S, Metric::kSourceSim, sim);
    Matching om_dir = find_permutation_om(G, S, Metric::kZoneErr, sim);
    auto best_sim =
        aggregate_metric(G, S, om_sim.g_to_s, Metric::kSourceSim, sim);
    auto best_dir =
        aggregate_metric(G, S, om_dir.g_to_s, Metric::kZoneErr, sim);
    REQUIRE_THAT(*best_sim, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(*best_dir, WithinAbs(0.0, 1e-12));
  }
  SECTION("unequal counts record leftovers") {
    std::vector<SourceTuple> G{
        make_tuple("dog", zone_at(0, 0), 0, 2),
        make_tuple("cat", zone_at(90, 0), 4, 6)};
    std::vector<SourceTuple> S{make_tuple("cat", zone_at(90, 0), 4, 6)};
    Matching m = find_permutation_os(G, S, sim);
    REQUIRE(m.g_to_s == std::vector<int>{-1, 0});
    REQUIRE(m.unmatched_ref == std::vector<int>{0});
    REQUIRE(m.unmatched_hyp.empty());

    Matching m2 = find_permutation_os(S, G, sim);
    REQUIRE(m2.g_to_s == std::vector<int>{1});
    REQUIRE(m2.unmatched_hyp == std::vector<int>{0});
  }
}

TEST_CASE("matching equals brute force on random tuples", "[eval]") {
  LexicalSimilarity sim;
  Rng rng(0x6a21u);
  for (int trial = 0; trial < 150; ++trial) {
    SceneMeta ref = testing::random_quantized_scene(rng, 5, 1);
    std::vector<SourceTuple> G;
    for (const auto& s : ref.sources) G.push_back(tuple_from_meta(s));
    std::vector<SourceTuple> S = corrupt_tuples(G, rng);
    while (S.size() > 5) S.pop_back();

    Matching exh = find_permutation_os(G, S, sim, MatchMode::kExhaustive);
    Matching hun = find_permutation_os(G, S, sim, MatchMode::kAssignment);
    double oracle = oracle_os_total(G, S, sim);
    REQUIRE_THAT(exh.total_score, WithinAbs(oracle, 1e-12));
    REQUIRE_THAT(hun.total_score, WithinAbs(oracle, 1e-12));

    int matched = 0;
    for (int j : exh.g_to_s)
      if (j >= 0) matched++;
    REQUIRE(matched == static_cast<int>(std::min(G.size(), S.size())));
  }
}

TEST_CASE("auto mode agrees with exhaustive at the solver boundary",
          "[eval]") {
  LexicalSimilarity sim;
  Rng rng(0x6a22u);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SourceTuple> G, S;
    int m = static_cast<int>(rng.uniform_int(6, 8));
    int n = static_cast<int>(rng.uniform_int(6, 8));
    for (int i = 0; i < m; ++i)
      G.push_back(tuple_from_meta(testing::random_quantized_source(rng)));
    for (int j = 0; j < n; ++j)
      S.push_back(tuple_from_meta(testing::random_quantized_source(rng)));
    Matching fast = find_permutation_os(G, S, sim, MatchMode::kAuto);
    Matching slow = find_permutation_os(G, S, sim, MatchMode::kExhaustive);
    REQUIRE_THAT(fast.total_score, WithinAbs(slow.total_score, 1e-12));
  }
}

TEST_CASE("reported metrics are shuffle invariant", "[eval]") {
  LexicalSimilarity sim;
  Rng rng(0x417u);
  for (int trial = 0; trial < 120; ++trial) {
    SceneMeta ref = testing::random_quantized_scene(rng, 4, 1);
    std::string text = render_scene(ref, OrderBy::kLoudness);
    SceneDescription hyp = parse_scene(text);
    // Corrupt the hypothesis so scores are informative.
    std::vector<SourceTuple> tuples;
    for (const auto& t : hyp.tuples) tuples.push_back(tuple_from_parsed(t));
    std::vector<SourceTuple> corrupted = corrupt_tuples(tuples, rng);
    hyp.tuples.clear();
    for (const SourceTuple& t : corrupted) {
      ParsedSource p;
      p.label = t.label;
      p.onset_s = t.onset_s;
      p.offset_s = t.offset_s;
      p.zone = t.zone;
      p.distance_m = t.distance_m;
      p.loudness_dba = t.loudness_dba;
      p.c50_db = t.c50_db;
      hyp.tuples.push_back(p);
    }

    for (Protocol proto : {Protocol::kOS, Protocol::kOM}) {
      ScoreReport base = score_scene(ref, hyp, proto, sim);
      auto base_values = all_metric_values(base);
      for (int shuffle = 0; shuffle < 4; ++shuffle) {
        SceneDescription shuffled = hyp;
        shuffle_vec(shuffled.tuples, rng);
        ScoreReport got = score_scene(ref, shuffled, proto, sim);
        REQUIRE(all_metric_values(got) == base_values);
      }
    }
  }
}

TEST_CASE("tied zero scores still match deterministically", "[eval]") {
  LexicalSimilarity sim;
  // Both hypothesis tuples score zero against the reference (disjoint
  // times), so the matching is a pure tie broken by content.
  SceneMeta ref;
  ref.room_volume_m3 = 400.0;
  ref.rt60_s = 0.4;
  ref.noise_label = "hum";
  ref.noise_loudness_db = -60.0;
  SourceMeta g;
  g.label = "dog";
  g.onset_s = 0.0;
  g.offset_s = 1.0;
  g.zone = zone_at(0, 0);
  g.distance_m = 2.0;
  g.loudness_dba = -20.0;
  g.c50_db = 5.0;
  ref.sources = {g};
  ref.n_src = 1;

  SceneDescription hyp;
  ParsedSource a, b;
  a.label = "aaa";
  a.onset_s = 5.0;
  a.offset_s = 6.0;
  a.zone = zone_at(0, 0);
  a.loudness_dba = -10.0;
  b.label = "bbb";
  b.onset_s = 7.0;
  b.offset_s = 8.0;
  b.zone = zone_at(0, 0);
  b.loudness_dba = -40.0;
  hyp.stated_n_src = 2;
  hyp.tuples = {a, b};

  ScoreReport fwd = score_scene(ref, hyp, Protocol::kOS, sim);
  std::swap(hyp.tuples[0], hyp.tuples[1]);
  ScoreReport rev = score_scene(ref, hyp, Protocol::kOS, sim);
  REQUIRE(fwd.loudness_err_db.has_value());
  REQUIRE(fwd.loudness_err_db == rev.loudness_err_db);
  REQUIRE(all_metric_values(fwd) == all_metric_values(rev));
}

TEST_CASE("per metric optimum dominates the joint matching", "[eval]") {
  LexicalSimilarity sim;
  Rng rng(0xd0c5u);
  for (int trial = 0; trial < 80; ++trial) {
    SceneMeta ref = testing::random_quantized_scene(rng, 4, 1);
    std::vector<SourceTuple> G;
    for (const auto& s : ref.sources) G.push_back(tuple_from_meta(s));
    std::vector<SourceTuple> S = corrupt_tuples(G, rng);

    Matching os = find_permutation_os(G, S, sim);
    for (Metric metric : all_source_metrics()) {
      auto os_val = aggregate_metric(G, S, os.g_to_s, metric, sim);
      Matching om = find_permutation_om(G, S, metric, sim);
      auto om_val = aggregate_metric(G, S, om.g_to_s, metric, sim);
      if (!os_val.has_value()) continue;
      REQUIRE(om_val.has_value());
      if (metric_is_error(metric)) {
        REQUIRE(*om_val <= *os_val + 1e-12);
      } else {
        REQUIRE(*om_val >= *os_val - 1e-12);
      }
    }
    // Definitional equality of the two protocols on the tuple score.
    Matching om_tuple =
        find_permutation_om(G, S, Metric::kTupleScore, sim);
    auto a = aggregate_metric(G, S, os.g_to_s, Metric::kTupleScore, sim);
    auto b =
        aggregate_metric(G, S, om_tuple.g_to_s, Metric::kTupleScore, sim);
    REQUIRE(a == b);
  }
}

TEST_CASE("per metric optimum can restore eligibility", "[eval]") {
  LexicalSimilarity sim;
  // The joint optimum pairs the reference with a transcript-free tuple, so
  // WER is absent under OS; the per-metric matching recovers the worse
  // positioned but transcribed tuple.
  SourceTuple g;
  g.label = "x y z";
  g.transcription = g.label;
  g.language = Language::kEn;
  g.is_speech = true;
  g.onset_s = 0.0;
  g.offset_s = 2.0;
  g.zone = zone_at(0, 0);
  g.distance_m = 1.0;
  g.loudness_dba = -20.0;
  g.c50_db = 5.0;

  SourceTuple s1;  // transcribed but opposite direction
  s1.label = "x y z";
  s1.transcription = s1.label;
  s1.onset_s = 0.0;
  s1.offset_s = 2.0;
  s1.zone = zone_at(180, 0);

  SourceTuple s2 = s1;  // perfectly placed but no transcript
  s2.zone = zone_at(0, 0);
  s2.transcription.reset();

  std::vector<SourceTuple> G{g}, S{s1, s2};
  Matching os = find_permutation_os(G, S, sim);
  REQUIRE(os.g_to_s == std::vector<int>{1});
  auto wer_os = aggregate_metric(G, S, os.g_to_s, Metric::kWer, sim);
  REQUIRE(!wer_os.has_value());

  Matching om = find_permutation_om(G, S, Metric::kWer, sim);
  REQUIRE(om.g_to_s == std::vector<int>{0});
  auto wer_om = aggregate_metric(G, S, om.g_to_s, Metric::kWer, sim);
  REQUIRE(wer_om.has_value());
  REQUIRE_THAT(*wer_om, WithinAbs(0.0, 1e-15));
}

TEST_CASE("self scoring is perfect", "[eval]") {
  LexicalSimilarity sim;
  Rng rng(0xfeedu);
  for (int trial = 0; trial < 60; ++trial) {
    SceneMeta ref = testing::random_quantized_scene(rng, 5, 0);
    SceneDescription hyp = parse_scene(render_scene(ref));
    REQUIRE(!hyp.has_errors());
    for (Protocol proto : {Protocol::kOS, Protocol::kOM}) {
      ScoreReport r = score_scene(ref, hyp, proto, sim);
      REQUIRE(r.room_vol_err_log2.has_value());
      REQUIRE_THAT(*r.room_vol_err_log2, WithinAbs(0.0, 1e-12));
      REQUIRE_THAT(*r.rt60_err_s, WithinAbs(0.0, 1e-12));
      REQUIRE_THAT(r.noise_sim, WithinAbs(1.0, 1e-12));
      REQUIRE_THAT(r.count_accuracy, WithinAbs(1.0, 1e-15));
      if (!ref.sources.empty()) {
        REQUIRE_THAT(*r.tuple_score, WithinAbs(1.0, 1e-9));
        REQUIRE_THAT(*r.source_sim, WithinAbs(1.0, 1e-9));
        REQUIRE_THAT(*r.dir_acc_xyz, WithinAbs(1.0, 1e-15));
        REQUIRE_THAT(*r.dir_acc_z, WithinAbs(1.0, 1e-15));
        REQUIRE_THAT(*r.zone_err_deg, WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(*r.distance_err_ratio, WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(*r.time_iou, WithinAbs(1.0, 1e-12));
        REQUIRE_THAT(*r.loudness_err_db, WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(*r.c50_err_db, WithinAbs(0.0, 1e-12));
        bool any_nonpolar = false;
        for (const auto& s : ref.sources)
          if (!zone_is_polar(s.zone)) any_nonpolar = true;
        REQUIRE(r.dir_acc_xy.has_value() == any_nonpolar);
        if (any_nonpolar) REQUIRE_THAT(*r.dir_acc_xy, WithinAbs(1.0, 1e-15));
        REQUIRE(r.unmatched_ref.empty());
        REQUIRE(r.unmatched_hyp.empty());
      } else {
        REQUIRE(!r.tuple_score.has_value());
      }
    }
  }
}

TEST_CASE("speech self scoring reports zero wer", "[eval]") {
  LexicalSimilarity sim;
  SceneMeta ref;
  ref.room_volume_m3 = 200.0;
  ref.rt60_s = 0.3;
  ref.noise_label = "air conditioner";
  ref.noise_loudness_db = -55.0;
  SourceMeta s;
  s.label = "they moved the meeting";
  s.language = Language::kEn;
  s.onset_s = 0.5;
  s.offset_s = 4.0;
  s.zone = zone_at(90, 0);
  s.distance_m = 1.5;
  s.loudness_dba = -18.0;
  s.c50_db = 12.0;
  ref.sources = {s};
  ref.n_src = 1;

  SceneDescription hyp = parse_scene(render_scene(ref));
  ScoreReport r = score_scene(ref, hyp, Protocol::kOS, sim);
  REQUIRE(r.wer.has_value());
  REQUIRE_THAT(*r.wer, WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(*r.tuple_score, WithinAbs(1.0, 1e-12));
}

TEST_CASE("scene level metrics", "[eval]") {
  LexicalSimilarity sim;
  SceneMeta ref;
  ref.room_volume_m3 = 400.0;
  ref.rt60_s = 0.5;
  ref.noise_label = "rain";
  ref.noise_loudness_db = -50.0;
  ref.n_src = 0;

  SECTION("volume error is log2 of the ratio") {
    SceneDescription hyp;
    hyp.stated_room_volume = 800.0;
    hyp.stated_rt60 = 0.7;
    hyp.stated_noise_label = "rain";
    hyp.stated_n_src = 0;
    ScoreReport r = score_scene(ref, hyp, Protocol::kOS, sim);
    REQUIRE_THAT(*r.room_vol_err_log2, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(*r.rt60_err_s, WithinAbs(0.2, 1e-12));
    REQUIRE_THAT(r.noise_sim, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(r.count_accuracy, WithinAbs(1.0, 1e-15));
  }
  SECTION("absent statements degrade not crash") {
    SceneDescription hyp;  // nothing stated, nothing parsed
    ScoreReport r = score_scene(ref, hyp, Protocol::kOS, sim);
    REQUIRE(!r.room_vol_err_log2.has_value());
    REQUIRE(!r.rt60_err_s.has_value());
    REQUIRE_THAT(r.noise_sim, WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(r.count_accuracy, WithinAbs(1.0, 1e-15));
    REQUIRE(!r.tuple_score.has_value());
  }
  SECTION("count uses enumerated lines not the header") {
    SceneMeta ref2 = ref;
    ref2.n_src = 2;
    SourceMeta a;
    a.label = "dog";
    a.onset_s = 0.0;
    a.offset_s = 1.0;
    a.zone = zone_at(0, 0);
    a.distance_m = 1.0;
    a.loudness_dba = -20.0;
    a.c50_db = 5.0;
    SourceMeta b = a;
    b.label = "cat";
    b.loudness_dba = -25.0;
    ref2.sources = {a, b};

    std::string text = render_scene(ref2);
    // Drop one source line but leave the header claiming two.
    std::size_t cat = text.find("cat:");
    REQUIRE(cat != std::string::npos);
    std::string truncated = text.substr(0, cat);
    SceneDescription hyp = parse_scene(truncated);
    REQUIRE(hyp.stated_n_src == 2);
    REQUIRE(hyp.tuples.size() == 1);
    ScoreReport r = score_scene(ref2, hyp, Protocol::kOS, sim);
    REQUIRE_THAT(r.count_accuracy, WithinAbs(0.0, 1e-15));
  }
  SECTION("garbage hypothesis yields an all miss report") {
    SceneMeta ref2 = ref;
    ref2.n_src = 1;
    SourceMeta a;
    a.label = "dog";
    a.onset_s = 0.0;
    a.offset_s = 1.0;
    a.zone = zone_at(0, 0);
    a.distance_m = 1.0;
    a.loudness_dba = -20.0;
    a.c50_db = 5.0;
    ref2.sources = {a};
    SceneDescription hyp = parse_scene("%%% not a scene at all");
    REQUIRE(hyp.has_errors());
    ScoreReport r = score_scene(ref2, hyp, Protocol::kOS, sim);
    REQUIRE_THAT(r.count_accuracy, WithinAbs(0.0, 1e-15));
    REQUIRE(r.tuple_score.has_value());
    REQUIRE_THAT(*r.tuple_score, WithinAbs(0.0, 1e-15));
    REQUIRE(!r.zone_err_deg.has_value());
    REQUIRE(!r.wer.has_value());
    REQUIRE(r.unmatched_ref == std::vector<int>{0});
  }
}

TEST_CASE("tuple averaging denominators", "[eval]") {
  LexicalSimilarity sim;
  SceneMeta ref;
  ref.room_volume_m3 = 400.0;
  ref.rt60_s = 0.5;
  ref.noise_label = "rain";
  ref.noise_loudness_db = -50.0;
  SourceMeta a;
  a.label = "dog";
  a.onset_s = 0.0;
  a.offset_s = 1.0;
  a.zone = zone_at(0, 0);
  a.distance_m = 1.0;
  a.loudness_dba = -20.0;
  a.c50_db = 5.0;
  ref.sources = {a};
  ref.n_src = 1;

  // Hypothesis repeats the perfect source plus a hallucinated one.
  SceneDescription hyp = parse_scene(render_scene(ref));
  ParsedSource extra;
  extra.label = "phantom";
  extra.onset_s = 5.0;
  extra.offset_s = 6.0;
  extra.zone = zone_at(90, 0);
  extra.distance_m = 2.0;
  extra.loudness_dba = -30.0;
  extra.c50_db = 0.0;
  hyp.tuples.push_back(extra);

  ScoreReport by_max = score_scene(ref, hyp, Protocol::kOS, sim);
  REQUIRE_THAT(*by_max.tuple_score, WithinAbs(0.5, 1e-9));
  REQUIRE(by_max.unmatched_hyp.size() == 1);

  EvalOptions opts;
  opts.average_over_refs = true;
  ScoreReport by_ref = score_scene(ref, hyp, Protocol::kOS, sim, opts);
  REQUIRE_THAT(*by_ref.tuple_score, WithinAbs(1.0, 1e-9));
}

TEST_CASE("attribute errors skip incomparable pairs", "[eval]") {
  LexicalSimilarity sim;
  SourceTuple g1 = make_tuple("dog", zone_at(0, 0), 0, 2, 2.0, -20.0, 5.0);
  SourceTuple g2 = make_tuple("cat", zone_at(90, 0), 3, 5, 4.0, -30.0, 8.0);
  SourceTuple s1 = g1;
  s1.c50_db.reset();
  s1.distance_m.reset();
  SourceTuple s2 = g2;
  s2.c50_db = 10.0;

  std::vector<SourceTuple> G{g1, g2}, S{s1, s2};
  Matching os = find_permutation_os(G, S, sim);
  REQUIRE(os.g_to_s == std::vector<int>{0, 1});

  auto c50 = aggregate_metric(G, S, os.g_to_s, Metric::kC50Err, sim);
  REQUIRE_THAT(*c50, WithinAbs(2.0, 1e-12));  // only the cat pair counts
  auto dist =
      aggregate_metric(G, S, os.g_to_s, Metric::kDistanceErrRatio, sim);
  REQUIRE_THAT(*dist, WithinAbs(0.0, 1e-12));  // only the cat pair counts

  // Accuracy metrics count a missing attribute as a miss instead.
  SourceTuple s1z = s1;
  s1z.zone.reset();
  std::vector<SourceTuple> S2{s1z, s2};
  Matching os2 = find_permutation_os(G, S2, sim);
  REQUIRE(os2.g_to_s == std::vector<int>{0, 1});
  auto xyz = aggregate_metric(G, S2, os2.g_to_s, Metric::kDirAccXyz, sim);
  REQUIRE_THAT(*xyz, WithinAbs(0.5, 1e-12));
}

TEST_CASE("polar references leave the azimuth accuracy", "[eval]") {
  LexicalSimilarity sim;
  SourceTuple g1 = make_tuple("beep", zone_at(0, 80), 0, 2);  // above
  SourceTuple g2 = make_tuple("boop", zone_at(0, 0), 0, 2);
  SourceTuple s1 = g1;
  SourceTuple s2 = g2;
  std::vector<SourceTuple> G{g1, g2}, S{s1, s2};
  Matching os = find_permutation_os(G, S, sim);
  auto xy = aggregate_metric(G, S, os.g_to_s, Metric::kDirAccXy, sim);
  REQUIRE(xy.has_value());
  REQUIRE_THAT(*xy, WithinAbs(1.0, 1e-15));

  std::vector<SourceTuple> Gp{g1}, Sp{s1};
  Matching osp = find_permutation_os(Gp, Sp, sim);
  auto xyp = aggregate_metric(Gp, Sp, osp.g_to_s, Metric::kDirAccXy, sim);
  REQUIRE(!xyp.has_value());
}
