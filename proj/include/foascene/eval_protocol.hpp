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

#ifndef FOASCENE_EVAL_PROTOCOL_HPP_
#define FOASCENE_EVAL_PROTOCOL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "foascene/assignment.hpp"
#include "foascene/scene_model.hpp"
#include "foascene/scene_text.hpp"
#include "foascene/semantic_sim.hpp"

namespace foascene {

// One source as seen by the scorer. References are always complete;
// hypothesis tuples may have any attribute absent.
struct SourceTuple {
  std::optional<std::string> label;
  std::optional<std::string> transcription;
  std::optional<Language> language;
  bool is_speech = false;
  std::optional<double> onset_s;
  std::optional<double> offset_s;
  std::optional<DirectionZone> zone;
  std::optional<double> distance_m;
  std::optional<double> loudness_dba;
  std::optional<double> c50_db;
};

/// Reference tuples come from manifests. A source with a language is a
/// speech source whose label doubles as its transcription.
inline SourceTuple tuple_from_meta(const SourceMeta& s) {
  SourceTuple t;
  t.label = s.label;
  if (s.language) {
    t.is_speech = true;
    t.transcription = s.label;
    t.language = s.language;
  }
  t.onset_s = s.onset_s;
  t.offset_s = s.offset_s;
  t.zone = s.zone;
  t.distance_m = s.distance_m;
  t.loudness_dba = s.loudness_dba;
  t.c50_db = s.c50_db;
  return t;
}

/// Hypothesis tuples come from parsed descriptions. The description string
/// carries no language or speech flag; the label stands in as the
/// transcription candidate.
inline SourceTuple tuple_from_parsed(const ParsedSource& p) {
  SourceTuple t;
  t.label = p.label;
  t.transcription = p.label;
  t.onset_s = p.onset_s;
  t.offset_s = p.offset_s;
  t.zone = p.zone;
  t.distance_m = p.distance_m;
  t.loudness_dba = p.loudness_dba;
  t.c50_db = p.c50_db;
  return t;
}

/// Interval intersection-over-union on [g_on, g_off] vs [s_on, s_off].
/// Degenerate (empty-union) input scores 0.
inline double interval_iou(double g_on, double g_off, double s_on,
                           double s_off) {
  double gl = std::max(0.0, g_off - g_on);
  double sl = std::max(0.0, s_off - s_on);
  double inter =
      std::max(0.0, std::min(g_off, s_off) - std::max(g_on, s_on));
  double uni = gl + sl - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Word-level edit distance over normalized tokens divided by reference
/// length. An empty reference scores the hypothesis token count (every
/// hypothesis word is an insertion against nothing).
inline double word_error_rate(const std::string& ref_text,
                              const std::string& hyp_text) {
  std::vector<std::string> ref = normalize_tokens(ref_text);
  std::vector<std::string> hyp = normalize_tokens(hyp_text);
  if (ref.empty()) return static_cast<double>(hyp.size());
  const std::size_t m = ref.size(), n = hyp.size();
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[n]) / static_cast<double>(m);
}

namespace detail {

// WER applies only when the reference is speech with a transcription, the
// hypothesis offers one, and languages do not conflict.
inline bool wer_eligible(const SourceTuple& g, const SourceTuple& s) {
  if (!g.is_speech || !g.transcription || !s.transcription) return false;
  if (s.language && g.language && *s.language != *g.language) return false;
  return true;
}

inline const std::string* tuple_text(const SourceTuple& t) {
  if (t.label) return &*t.label;
  if (t.transcription) return &*t.transcription;
  return nullptr;
}

}  // namespace detail

/// What factor: transcription quality for speech pairs, text similarity
/// otherwise; 0 when the hypothesis offers no text.
inline double what_score(const SourceTuple& g, const SourceTuple& s,
                         SimilarityProvider& provider) {
  if (detail::wer_eligible(g, s))
    return std::max(0.0, 1.0 - word_error_rate(*g.transcription,
                                               *s.transcription));
  const std::string* gt = detail::tuple_text(g);
  const std::string* st = detail::tuple_text(s);
  if (gt == nullptr || st == nullptr) return 0.0;
  return provider.similarity(*gt, *st);
}

inline double where_score(const SourceTuple& g, const SourceTuple& s) {
  if (!g.zone || !s.zone) return 0.0;
  return (180.0 - zone_angle_error(*g.zone, *s.zone)) / 180.0;
}

inline double when_score(const SourceTuple& g, const SourceTuple& s) {
  if (!g.onset_s || !g.offset_s || !s.onset_s || !s.offset_s) return 0.0;
  return interval_iou(*g.onset_s, *g.offset_s, *s.onset_s, *s.offset_s);
}

/// Geometric mean of What, Where, When; a missing attribute zeroes its
/// factor and therefore the whole score.
inline double tuple_score(const SourceTuple& g, const SourceTuple& s,
                          SimilarityProvider& provider) {
  double w1 = what_score(g, s, provider);
  double w2 = where_score(g, s);
  double w3 = when_score(g, s);
  return std::cbrt(w1 * w2 * w3);
}

enum class MatchMode { kAuto, kExhaustive, kAssignment };

struct Matching {
  std::vector<int> g_to_s;  // -1 for unmatched references
  double total_score = 0.0;
  std::vector<int> unmatched_ref;
  std::vector<int> unmatched_hyp;
};

namespace detail {

inline std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "\x01";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

// Stable content fingerprint; sorting by it makes matching results
// independent of input order.
inline std::string tuple_key(const SourceTuple& t) {
  std::string key;
  key += t.label ? *t.label : "\x01";
  key += '|';
  key += t.transcription ? *t.transcription : "\x01";
  key += '|';
  key += t.language ? language_code(*t.language) : "\x01";
  key += '|';
  key += t.is_speech ? '1' : '0';
  key += '|';
  key += fmt_opt(t.onset_s) + "|" + fmt_opt(t.offset_s) + "|";
  key += t.zone ? std::to_string(zone_index(*t.zone)) : "\x01";
  key += '|';
  key += fmt_opt(t.distance_m) + "|" + fmt_opt(t.loudness_dba) + "|" +
         fmt_opt(t.c50_db);
  return key;
}

inline std::vector<int> key_order(const std::vector<SourceTuple>& tuples) {
  std::vector<std::string> keys(tuples.size());
  for (std::size_t i = 0; i < tuples.size(); ++i) keys[i] = tuple_key(tuples[i]);
  std::vector<int> order(tuples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
  });
  return order;
}

inline Matching finish_matching(const std::vector<int>& g_order,
                                const std::vector<int>& s_order,
                                const assign::Injection& inj, int m, int n,
                                const std::vector<std::vector<double>>& score) {
  Matching out;
  out.g_to_s.assign(static_cast<std::size_t>(m), -1);
  std::vector<char> s_used(static_cast<std::size_t>(n), 0);
  out.total_score = 0.0;
  for (int a = 0; a < m; ++a) {
    int b = inj.row_to_col[static_cast<std::size_t>(a)];
    if (b < 0) continue;
    int gi = g_order[static_cast<std::size_t>(a)];
    int sj = s_order[static_cast<std::size_t>(b)];
    out.g_to_s[static_cast<std::size_t>(gi)] = sj;
    s_used[static_cast<std::size_t>(sj)] = 1;
    out.total_score +=
        score[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  for (int i = 0; i < m; ++i)
    if (out.g_to_s[static_cast<std::size_t>(i)] < 0) out.unmatched_ref.push_back(i);
  for (int j = 0; j < n; ++j)
    if (!s_used[static_cast<std::size_t>(j)]) out.unmatched_hyp.push_back(j);
  return out;
}

}  // namespace detail

/// Optimal-source matching: maximizes total tuple score over complete
/// matchings of min(|G|, |S|) pairs. Exact ties resolve to the matching
/// whose content-key sequence is lexicographically smallest, so the result
/// never depends on input order. Auto mode enumerates below 6 sources and
/// switches to the assignment solver above.
inline Matching find_permutation_os(const std::vector<SourceTuple>& G,
                                    const std::vector<SourceTuple>& S,
                                    SimilarityProvider& provider,
                                    MatchMode mode = MatchMode::kAuto) {
  const int m = static_cast<int>(G.size());
  const int n = static_cast<int>(S.size());
  std::vector<int> g_order = detail::key_order(G);
  std::vector<int> s_order = detail::key_order(S);

  std::vector<std::vector<double>> score(
      static_cast<std::size_t>(m),
      std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < n; ++b)
      score[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          tuple_score(G[static_cast<std::size_t>(
                          g_order[static_cast<std::size_t>(a)])],
                      S[static_cast<std::size_t>(
                          s_order[static_cast<std::size_t>(b)])],
                      provider);

  bool exhaustive = mode == MatchMode::kExhaustive ||
                    (mode == MatchMode::kAuto && std::max(m, n) < 6);
  assign::Injection inj;
  if (exhaustive) {
    inj = assign::best_injection_exhaustive(
        m, n,
        [&](const std::vector<int>& row_to_col) {
          double total = 0.0;
          for (int a = 0; a < m; ++a) {
            int b = row_to_col[static_cast<std::size_t>(a)];
            if (b >= 0)
              total += score[static_cast<std::size_t>(a)]
                            [static_cast<std::size_t>(b)];
          }
          return total;
        },
        /*maximize=*/true);
  } else {
    inj = assign::best_injection_assignment(score);
  }
  return detail::finish_matching(g_order, s_order, inj, m, n, score);
}

enum class Metric {
  kTupleScore,
  kSourceSim,
  kWer,
  kDirAccXyz,
  kDirAccXy,
  kDirAccZ,
  kZoneErr,
  kDistanceErrRatio,
  kTimeIou,
  kLoudnessErr,
  kC50Err
};

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kTupleScore: return "tuple_score";
    case Metric::kSourceSim: return "source_sim";
    case Metric::kWer: return "wer";
    case Metric::kDirAccXyz: return "dir_acc_xyz";
    case Metric::kDirAccXy: return "dir_acc_xy";
    case Metric::kDirAccZ: return "dir_acc_z";
    case Metric::kZoneErr: return "zone_err_deg";
    case Metric::kDistanceErrRatio: return "distance_err_ratio";
    case Metric::kTimeIou: return "time_iou";
    case Metric::kLoudnessErr: return "loudness_err_db";
    case Metric::kC50Err: return "c50_err_db";
  }
  return "tuple_score";
}

/// Error metrics are minimized; everything else is maximized.
inline bool metric_is_error(Metric m) {
  switch (m) {
    case Metric::kWer:
    case Metric::kZoneErr:
    case Metric::kDistanceErrRatio:
    case Metric::kLoudnessErr:
    case Metric::kC50Err:
      return true;
    default:
      return false;
  }
}

inline const std::vector<Metric>& all_source_metrics() {
  static const std::vector<Metric> metrics = {
      Metric::kTupleScore,   Metric::kSourceSim,        Metric::kWer,
      Metric::kDirAccXyz,    Metric::kDirAccXy,         Metric::kDirAccZ,
      Metric::kZoneErr,      Metric::kDistanceErrRatio, Metric::kTimeIou,
      Metric::kLoudnessErr,  Metric::kC50Err};
  return metrics;
}

struct EvalOptions {
  // Tuple score averages over max(|G|, |S|) by default; true switches to
  // averaging over the reference count.
  bool average_over_refs = false;
  MatchMode match_mode = MatchMode::kAuto;
};

/// Per-scene aggregate of one metric under a fixed matching. Accuracy-style
/// metrics count a missing hypothesis attribute as wrong; error-style
/// metrics skip pairs where the attribute cannot be compared and go absent
/// when nothing is comparable.
inline std::optional<double> aggregate_metric(
    const std::vector<SourceTuple>& G, const std::vector<SourceTuple>& S,
    const std::vector<int>& g_to_s, Metric metric,
    SimilarityProvider& provider, const EvalOptions& opts = {}) {
  const int m = static_cast<int>(G.size());
  const int n = static_cast<int>(S.size());
  double sum = 0.0;
  int count = 0;

  for (int i = 0; i < m; ++i) {
    int j = g_to_s[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    const SourceTuple& g = G[static_cast<std::size_t>(i)];
    const SourceTuple& s = S[static_cast<std::size_t>(j)];
    switch (metric) {
      case Metric::kTupleScore:
        sum += tuple_score(g, s, provider);
        count++;
        break;
      case Metric::kSourceSim: {
        const std::string* gt = detail::tuple_text(g);
        const std::string* st = detail::tuple_text(s);
        sum += (gt && st) ? provider.similarity(*gt, *st) : 0.0;
        count++;
        break;
      }
      case Metric::kWer:
        if (detail::wer_eligible(g, s)) {
          sum += word_error_rate(*g.transcription, *s.transcription);
          count++;
        }
        break;
      case Metric::kDirAccXyz:
        sum += (g.zone && s.zone && *s.zone == *g.zone) ? 1.0 : 0.0;
        count++;
        break;
      case Metric::kDirAccXy:
        if (g.zone && !zone_is_polar(*g.zone)) {
          bool hit = s.zone && !zone_is_polar(*s.zone) &&
                     *s.zone->octant == *g.zone->octant;
          sum += hit ? 1.0 : 0.0;
          count++;
        }
        break;
      case Metric::kDirAccZ:
        sum += (g.zone && s.zone && s.zone->band == g.zone->band) ? 1.0 : 0.0;
        count++;
        break;
      case Metric::kZoneErr:
        if (g.zone && s.zone) {
          sum += zone_angle_error(*g.zone, *s.zone);
          count++;
        }
        break;
      case Metric::kDistanceErrRatio:
        if (g.distance_m && s.distance_m && *g.distance_m > 0.0) {
          sum += std::abs(*s.distance_m - *g.distance_m) / *g.distance_m;
          count++;
        }
        break;
      case Metric::kTimeIou:
        sum += when_score(g, s);
        count++;
        break;
      case Metric::kLoudnessErr:
        if (g.loudness_dba && s.loudness_dba) {
          sum += std::abs(*s.loudness_dba - *g.loudness_dba);
          count++;
        }
        break;
      case Metric::kC50Err:
        if (g.c50_db && s.c50_db) {
          sum += std::abs(*s.c50_db - *g.c50_db);
          count++;
        }
        break;
    }
  }

  if (metric == Metric::kTupleScore) {
    int denom = opts.average_over_refs ? m : std::max(m, n);
    if (denom == 0) return std::nullopt;
    return sum / denom;  // unmatched slots contribute zero
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

/// Per-metric optimal matching: enumerates complete matchings and optimizes
/// the metric aggregate exactly as it is computed, so the result weakly
/// dominates any other matching on that metric by construction. Matchings
/// where the metric is absent rank below any matching with a value. The
/// TupleScore metric delegates to the optimal-source matching (they are the
/// same object by definition).
inline Matching find_permutation_om(const std::vector<SourceTuple>& G,
                                    const std::vector<SourceTuple>& S,
                                    Metric metric,
                                    SimilarityProvider& provider,
                                    const EvalOptions& opts = {}) {
  if (metric == Metric::kTupleScore)
    return find_permutation_os(G, S, provider, opts.match_mode);

  const int m = static_cast<int>(G.size());
  const int n = static_cast<int>(S.size());
  std::vector<int> g_order = detail::key_order(G);
  std::vector<int> s_order = detail::key_order(S);
  const bool maximize = !metric_is_error(metric);
  const double kAbsent = maximize ? -1e300 : 1e300;

  auto objective = [&](const std::vector<int>& row_to_col) {
    std::vector<int> g_to_s(static_cast<std::size_t>(m), -1);
    for (int a = 0; a < m; ++a) {
      int b = row_to_col[static_cast<std::size_t>(a)];
      if (b >= 0)
        g_to_s[static_cast<std::size_t>(g_order[static_cast<std::size_t>(a)])] =
            s_order[static_cast<std::size_t>(b)];
    }
    auto v = aggregate_metric(G, S, g_to_s, metric, provider, opts);
    return v ? *v : kAbsent;
  };

  assign::Injection inj =
      assign::best_injection_exhaustive(m, n, objective, maximize);

  std::vector<std::vector<double>> zero(
      static_cast<std::size_t>(m),
      std::vector<double>(static_cast<std::size_t>(n), 0.0));
  Matching out = detail::finish_matching(g_order, s_order, inj, m, n, zero);
  out.total_score = inj.total == kAbsent ? 0.0 : inj.total;
  return out;
}

enum class Protocol { kOS, kOM };

struct ScoreReport {
  // Scene-level metrics.
  std::optional<double> room_vol_err_log2;
  std::optional<double> rt60_err_s;
  double noise_sim = 0.0;
  double count_accuracy = 0.0;
  // Source-level metrics, absent when no pair qualifies.
  std::optional<double> tuple_score;
  std::optional<double> source_sim;
  std::optional<double> wer;
  std::optional<double> dir_acc_xyz;
  std::optional<double> dir_acc_xy;
  std::optional<double> dir_acc_z;
  std::optional<double> zone_err_deg;
  std::optional<double> distance_err_ratio;
  std::optional<double> time_iou;
  std::optional<double> loudness_err_db;
  std::optional<double> c50_err_db;
  // Matching diagnostics (the TupleScore matching).
  std::vector<int> matching_g_to_s;
  std::vector<int> unmatched_ref;
  std::vector<int> unmatched_hyp;
  int ref_count = 0;
  int hyp_count = 0;
  std::string protocol;
  std::string provider_kind;

  std::optional<double> metric_value(Metric m) const {
    switch (m) {
      case Metric::kTupleScore: return tuple_score;
      case Metric::kSourceSim: return source_sim;
      case Metric::kWer: return wer;
      case Metric::kDirAccXyz: return dir_acc_xyz;
      case Metric::kDirAccXy: return dir_acc_xy;
      case Metric::kDirAccZ: return dir_acc_z;
      case Metric::kZoneErr: return zone_err_deg;
      case Metric::kDistanceErrRatio: return distance_err_ratio;
      case Metric::kTimeIou: return time_iou;
      case Metric::kLoudnessErr: return loudness_err_db;
      case Metric::kC50Err: return c50_err_db;
    }
    return std::nullopt;
  }
};

namespace detail {

inline void set_metric_value(ScoreReport& r, Metric m,
                             const std::optional<double>& v) {
  switch (m) {
    case Metric::kTupleScore: r.tuple_score = v; break;
    case Metric::kSourceSim: r.source_sim = v; break;
    case Metric::kWer: r.wer = v; break;
    case Metric::kDirAccXyz: r.dir_acc_xyz = v; break;
    case Metric::kDirAccXy: r.dir_acc_xy = v; break;
    case Metric::kDirAccZ: r.dir_acc_z = v; break;
    case Metric::kZoneErr: r.zone_err_deg = v; break;
    case Metric::kDistanceErrRatio: r.distance_err_ratio = v; break;
    case Metric::kTimeIou: r.time_iou = v; break;
    case Metric::kLoudnessErr: r.loudness_err_db = v; break;
    case Metric::kC50Err: r.c50_err_db = v; break;
  }
}

}  // namespace detail

/// Scores one hypothesis description against its reference scene. Count
/// accuracy compares the declared n_src; source metrics run over the
/// enumerated entries. Unparsable hypotheses degrade to an all-miss report.
inline ScoreReport score_scene(const SceneMeta& ref,
                               const SceneDescription& hyp, Protocol protocol,
                               SimilarityProvider& provider,
                               const EvalOptions& opts = {}) {
  ScoreReport report;
  report.protocol = protocol == Protocol::kOS ? "os" : "om";
  report.provider_kind = provider.kind();

  if (hyp.stated_room_volume && *hyp.stated_room_volume > 0.0 &&
      ref.room_volume_m3 > 0.0) {
    report.room_vol_err_log2 =
        std::abs(std::log2(*hyp.stated_room_volume / ref.room_volume_m3));
  }
  if (hyp.stated_rt60)
    report.rt60_err_s = std::abs(*hyp.stated_rt60 - ref.rt60_s);
  report.noise_sim =
      hyp.stated_noise_label
          ? provider.similarity(ref.noise_label, *hyp.stated_noise_label)
          : 0.0;
  // Counting is scored on the enumerated source lines, not the stated
  // header value; a header/line disagreement surfaces as a parse warning.
  report.count_accuracy =
      (static_cast<int>(hyp.tuples.size()) == ref.n_src) ? 1.0 : 0.0;

  std::vector<SourceTuple> G, S;
  for (const auto& s : ref.sources) G.push_back(tuple_from_meta(s));
  for (const auto& t : hyp.tuples) S.push_back(tuple_from_parsed(t));
  report.ref_count = static_cast<int>(G.size());
  report.hyp_count = static_cast<int>(S.size());

  Matching os = find_permutation_os(G, S, provider, opts.match_mode);
  report.matching_g_to_s = os.g_to_s;
  report.unmatched_ref = os.unmatched_ref;
  report.unmatched_hyp = os.unmatched_hyp;

  for (Metric metric : all_source_metrics()) {
    if (protocol == Protocol::kOS) {
      detail::set_metric_value(
          report, metric,
          aggregate_metric(G, S, os.g_to_s, metric, provider, opts));
    } else {
      Matching om = find_permutation_om(G, S, metric, provider, opts);
      detail::set_metric_value(
          report, metric,
          aggregate_metric(G, S, om.g_to_s, metric, provider, opts));
    }
  }
  return report;
}

}  // namespace foascene

#endif  // FOASCENE_EVAL_PROTOCOL_HPP_
