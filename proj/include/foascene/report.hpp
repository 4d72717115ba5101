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

#ifndef FOASCENE_REPORT_HPP_
#define FOASCENE_REPORT_HPP_

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "foascene/common.hpp"
#include "foascene/eval_protocol.hpp"

namespace foascene {

using Json = nlohmann::ordered_json;

/// The fifteen report keys in table order: four scene-level metrics, then
/// the eleven source-level metrics.
inline const std::vector<std::string>& report_metric_names() {
  static const std::vector<std::string> names = {
      "room_vol_err_log2", "rt60_err_s",         "noise_sim",
      "count_accuracy",    "tuple_score",        "source_sim",
      "wer",               "dir_acc_xyz",        "dir_acc_xy",
      "dir_acc_z",         "zone_err_deg",       "distance_err_ratio",
      "time_iou",          "loudness_err_db",    "c50_err_db"};
  return names;
}

/// Value of one metric key on one report. Scene metrics that are always
/// computed come back engaged; the rest are absent when the clip had nothing
/// to measure.
inline std::optional<double> report_metric(const ScoreReport& r,
                                           const std::string& name) {
  if (name == "room_vol_err_log2") return r.room_vol_err_log2;
  if (name == "rt60_err_s") return r.rt60_err_s;
  if (name == "noise_sim") return r.noise_sim;
  if (name == "count_accuracy") return r.count_accuracy;
  for (Metric m : all_source_metrics()) {
    if (name == metric_name(m)) return r.metric_value(m);
  }
  throw Error("unknown metric key: " + name);
}

/// One report as a JSON object: protocol and provider labels, counts, the
/// fifteen metric keys in table order (null when absent), and the matching
/// diagnostics.
inline Json score_report_to_json(const ScoreReport& r) {
  Json j;
  j["protocol"] = r.protocol;
  j["provider_kind"] = r.provider_kind;
  j["ref_count"] = r.ref_count;
  j["hyp_count"] = r.hyp_count;
  for (const std::string& name : report_metric_names()) {
    const std::optional<double> v = report_metric(r, name);
    if (v) {
      j[name] = *v;
    } else {
      j[name] = nullptr;
    }
  }
  Json matching;
  matching["g_to_s"] = r.matching_g_to_s;
  matching["unmatched_ref"] = r.unmatched_ref;
  matching["unmatched_hyp"] = r.unmatched_hyp;
  j["matching"] = matching;
  return j;
}

inline ScoreReport score_report_from_json(const Json& j) {
  auto opt = [&j](const std::string& key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  ScoreReport r;
  r.protocol = j.at("protocol").get<std::string>();
  r.provider_kind = j.at("provider_kind").get<std::string>();
  r.ref_count = j.at("ref_count").get<int>();
  r.hyp_count = j.at("hyp_count").get<int>();
  r.room_vol_err_log2 = opt("room_vol_err_log2");
  r.rt60_err_s = opt("rt60_err_s");
  r.noise_sim = j.at("noise_sim").get<double>();
  r.count_accuracy = j.at("count_accuracy").get<double>();
  for (Metric m : all_source_metrics()) {
    detail::set_metric_value(r, m, opt(metric_name(m)));
  }
  if (j.contains("matching")) {
    const Json& jm = j.at("matching");
    r.matching_g_to_s = jm.at("g_to_s").get<std::vector<int>>();
    r.unmatched_ref = jm.at("unmatched_ref").get<std::vector<int>>();
    r.unmatched_hyp = jm.at("unmatched_hyp").get<std::vector<int>>();
  }
  return r;
}

struct MetricAggregate {
  std::size_t count = 0;  // reports where the metric is present
  double mean = 0.0;      // over present values; 0 when count == 0
  double std_dev = 0.0;   // population spread; 0 when count < 2
};

/// Mean and population standard deviation over the reports where the metric
/// is present. Sums run in input order, so callers that collect clips in a
/// fixed order aggregate identically no matter how scoring was parallelized.
inline MetricAggregate aggregate_metric_values(
    const std::vector<ScoreReport>& reports, const std::string& name) {
  MetricAggregate agg;
  double sum = 0.0;
  for (const ScoreReport& r : reports) {
    if (const std::optional<double> v = report_metric(r, name)) {
      sum += *v;
      ++agg.count;
    }
  }
  if (agg.count == 0) return agg;
  agg.mean = sum / static_cast<double>(agg.count);
  double sum_sq = 0.0;
  for (const ScoreReport& r : reports) {
    if (const std::optional<double> v = report_metric(r, name)) {
      const double d = *v - agg.mean;
      sum_sq += d * d;
    }
  }
  agg.std_dev = std::sqrt(sum_sq / static_cast<double>(agg.count));
  return agg;
}

/// Summary over a clip set: per metric the present-value count, mean, and
/// std (null mean/std when no clip measured it).
inline Json summarize_reports(const std::vector<ScoreReport>& reports) {
  Json metrics;
  for (const std::string& name : report_metric_names()) {
    const MetricAggregate a = aggregate_metric_values(reports, name);
    Json row;
    row["count"] = a.count;
    if (a.count > 0) {
      row["mean"] = a.mean;
      row["std"] = a.std_dev;
    } else {
      row["mean"] = nullptr;
      row["std"] = nullptr;
    }
    metrics[name] = row;
  }
  Json out;
  out["clips"] = reports.size();
  out["metrics"] = metrics;
  return out;
}

/// One summary per reference source count, keyed by the count, ascending.
inline Json summarize_by_n_src(const std::vector<ScoreReport>& reports) {
  std::map<int, std::vector<ScoreReport>> groups;
  for (const ScoreReport& r : reports) groups[r.ref_count].push_back(r);
  Json out = Json::object();
  for (const auto& [n, rs] : groups) out[std::to_string(n)] = summarize_reports(rs);
  return out;
}

/// Full corpus report: labels, per-clip rows, the overall summary, and the
/// per-source-count split. Clip ids come from the caller and lead each row.
inline Json corpus_report_json(
    const std::vector<std::pair<std::string, ScoreReport>>& per_clip) {
  Json rows = Json::array();
  std::vector<ScoreReport> reports;
  for (const auto& [id, r] : per_clip) {
    Json row;
    row["clip"] = id;
    const Json fields = score_report_to_json(r);
    for (const auto& [k, v] : fields.items()) row[k] = v;
    rows.push_back(std::move(row));
    reports.push_back(r);
  }
  Json out;
  out["protocol"] = per_clip.empty() ? "" : per_clip.front().second.protocol;
  out["provider_kind"] =
      per_clip.empty() ? "" : per_clip.front().second.provider_kind;
  out["clips"] = rows;
  out["summary"] = summarize_reports(reports);
  out["by_n_src"] = summarize_by_n_src(reports);
  return out;
}

/// Per-clip rows back out of a corpus report, in stored order.
inline std::vector<std::pair<std::string, ScoreReport>> corpus_report_clips(
    const Json& j) {
  std::vector<std::pair<std::string, ScoreReport>> out;
  for (const Json& row : j.at("clips")) {
    out.emplace_back(row.at("clip").get<std::string>(),
                     score_report_from_json(row));
  }
  return out;
}

}  // namespace foascene

#endif  // FOASCENE_REPORT_HPP_
