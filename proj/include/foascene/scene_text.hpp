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

#ifndef FOASCENE_SCENE_TEXT_HPP_
#define FOASCENE_SCENE_TEXT_HPP_

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "foascene/scene_model.hpp"

namespace foascene {

enum class OrderBy { kLoudness, kZone, kDistance, kName, kOnset };

inline std::optional<OrderBy> order_by_from_name(const std::string& name) {
  if (name == "loudness") return OrderBy::kLoudness;
  if (name == "zone") return OrderBy::kZone;
  if (name == "distance") return OrderBy::kDistance;
  if (name == "name") return OrderBy::kName;
  if (name == "onset") return OrderBy::kOnset;
  return std::nullopt;
}

inline const char* order_by_name(OrderBy o) {
  switch (o) {
    case OrderBy::kLoudness: return "loudness";
    case OrderBy::kZone: return "zone";
    case OrderBy::kDistance: return "distance";
    case OrderBy::kName: return "name";
    case OrderBy::kOnset: return "onset";
  }
  return "loudness";
}

namespace detail {

inline std::string fmt1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

inline std::string fmt0(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.0f", v);
  return buf;
}

// Reserved punctuation would corrupt the line grammar; degrade politely
// instead of failing the render.
inline std::string sanitize_label(std::string s) {
  for (char& c : s) {
    if (c == ';' || c == ':' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

inline bool render_less(const SourceMeta& a, const SourceMeta& b, OrderBy key) {
  switch (key) {
    case OrderBy::kLoudness:
      if (a.loudness_dba != b.loudness_dba)
        return a.loudness_dba > b.loudness_dba;
      break;
    case OrderBy::kZone:
      if (zone_index(a.zone) != zone_index(b.zone))
        return zone_index(a.zone) < zone_index(b.zone);
      break;
    case OrderBy::kDistance:
      if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
      break;
    case OrderBy::kName:
      if (a.label != b.label) return a.label < b.label;
      break;
    case OrderBy::kOnset:
      if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
      break;
  }
  if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
  if (a.label != b.label) return a.label < b.label;
  return canonical_source_less(a, b);
}

}  // namespace detail

/// Serializes a scene to the structured description string. Sources are
/// sorted by the chosen key (loudness descending, everything else
/// ascending), ties broken by onset then label.
inline std::string render_scene(const SceneMeta& scene,
                                OrderBy order_by = OrderBy::kLoudness) {
  std::vector<SourceMeta> src = scene.sources;
  std::stable_sort(src.begin(), src.end(),
                   [order_by](const SourceMeta& a, const SourceMeta& b) {
                     return detail::render_less(a, b, order_by);
                   });

  std::string out;
  out += "room_volume=" + detail::fmt0(scene.room_volume_m3) + "; RT60=" +
         detail::fmt1(scene.rt60_s) + ";\n";
  out += "n_src=" + std::to_string(scene.n_src) + ". noise_label:" +
         detail::sanitize_label(scene.noise_label) + ";\n";
  out += "noise_loudness=" + detail::fmt0(scene.noise_loudness_db) + ".\n";
  if (!src.empty()) {
    out += "Sound label:(time, direction, distance, loudness, C50):\n";
    for (const auto& s : src) {
      out += detail::sanitize_label(s.label) + ": (" + detail::fmt1(s.onset_s) +
             "-" + detail::fmt1(s.offset_s) + ", " + zone_name(s.zone) + ", " +
             detail::fmt1(s.distance_m) + ", " + detail::fmt0(s.loudness_dba) +
             ", " + detail::fmt0(s.c50_db) + ");\n";
    }
  }
  return out;
}

enum class IssueCode {
  kMalformedHeader,
  kUnknownZoneName,
  kUnparsableNumber,
  kCountMismatch,
  kDroppedSourceLine,
  kExtraField
};

struct ParseIssue {
  IssueCode code = IssueCode::kMalformedHeader;
  bool is_error = false;
  int line = 0;    // 1-based; 0 when the issue has no anchor
  int column = 0;  // 1-based
  std::string message;
};

inline const char* issue_code_name(IssueCode c) {
  switch (c) {
    case IssueCode::kMalformedHeader: return "MalformedHeader";
    case IssueCode::kUnknownZoneName: return "UnknownZoneName";
    case IssueCode::kUnparsableNumber: return "UnparsableNumber";
    case IssueCode::kCountMismatch: return "CountMismatch";
    case IssueCode::kDroppedSourceLine: return "DroppedSourceLine";
    case IssueCode::kExtraField: return "ExtraField";
  }
  return "MalformedHeader";
}

// One enumerated source entry; any attribute may be absent in model output.
struct ParsedSource {
  std::optional<std::string> label;
  std::optional<double> onset_s;
  std::optional<double> offset_s;
  std::optional<DirectionZone> zone;
  std::optional<double> distance_m;
  std::optional<double> loudness_dba;
  std::optional<double> c50_db;
  int line = 0;

  bool complete() const {
    return label && onset_s && offset_s && zone && distance_m && loudness_dba &&
           c50_db;
  }
};

struct SceneDescription {
  std::string raw_text;
  // Canonicalized scene built from the fully formed entries; header fields
  // default to zero/empty when missing. Canonical inputs reproduce the
  // original SceneMeta exactly.
  SceneMeta parsed;
  // Header fields as stated, kept separate from the entry list so count
  // checks can compare the declared value against enumerated lines.
  std::optional<double> stated_room_volume;
  std::optional<double> stated_rt60;
  std::optional<int> stated_n_src;
  std::optional<std::string> stated_noise_label;
  std::optional<double> stated_noise_loudness;
  std::vector<ParsedSource> tuples;
  std::vector<ParseIssue> issues;

  bool has_errors() const {
    for (const auto& i : issues)
      if (i.is_error) return true;
    return false;
  }
  std::size_t warning_count() const {
    std::size_t n = 0;
    for (const auto& i : issues)
      if (!i.is_error) n++;
    return n;
  }
};

namespace detail {

struct Cursor {
  const std::string* text;
  std::size_t pos = 0;
};

inline int line_of(const std::string& text, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i)
    if (text[i] == '\n') line++;
  return line;
}

inline int col_of(const std::string& text, std::size_t pos) {
  int col = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
    if (text[i] == '\n')
      col = 1;
    else
      col++;
  }
  return col;
}

inline bool ieq(char a, char b) {
  return std::tolower(static_cast<unsigned char>(a)) ==
         std::tolower(static_cast<unsigned char>(b));
}

// Case-insensitive substring search.
inline std::size_t ifind(const std::string& hay, const std::string& needle,
                         std::size_t from = 0) {
  if (needle.empty() || hay.size() < needle.size()) return std::string::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (!ieq(hay[i + j], needle[j])) {
        ok = false;
        break;
      }
    }
    if (ok) return i;
  }
  return std::string::npos;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) a++;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) b--;
  return s.substr(a, b - a);
}

// Parses a number at/after pos, skipping leading whitespace and consuming a
// trailing unit suffix (s, m, m3, dB, dBA) when present.
inline std::optional<double> parse_number(const std::string& s,
                                          std::size_t& pos) {
  std::size_t p = pos;
  while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) p++;
  if (p >= s.size()) return std::nullopt;
  const char* start = s.c_str() + p;
  char* end = nullptr;
  double v = std::strtod(start, &end);
  if (end == start) return std::nullopt;
  p += static_cast<std::size_t>(end - start);
  std::size_t q = p;
  while (q < s.size() && std::isspace(static_cast<unsigned char>(s[q]))) q++;
  for (const char* unit : {"dba", "db", "m3", "m^3", "ms", "m", "s"}) {
    std::size_t len = std::string(unit).size();
    if (q + len <= s.size()) {
      bool match = true;
      for (std::size_t j = 0; j < len; ++j)
        if (!ieq(s[q + j], unit[j])) {
          match = false;
          break;
        }
      // Unit must not be the start of a longer word.
      if (match && (q + len == s.size() ||
                    !std::isalnum(static_cast<unsigned char>(s[q + len])))) {
        if (std::string(unit) == "ms") v *= 1e-3;
        p = q + len;
        break;
      }
    }
  }
  pos = p;
  return v;
}

// Finds "<key> [=:] <number>" anywhere in text, case-insensitive key.
inline std::optional<double> find_key_number(const std::string& text,
                                             const std::string& key,
                                             std::size_t& anchor_end) {
  std::size_t at = ifind(text, key);
  while (at != std::string::npos) {
    // Reject matches embedded in a longer identifier.
    bool left_ok = at == 0 || !(std::isalnum(static_cast<unsigned char>(
                                    text[at - 1])) ||
                                text[at - 1] == '_');
    std::size_t p = at + key.size();
    bool right_ok =
        p >= text.size() || !(std::isalnum(static_cast<unsigned char>(text[p])) ||
                              text[p] == '_');
    if (left_ok && right_ok) {
      while (p < text.size() &&
             std::isspace(static_cast<unsigned char>(text[p])))
        p++;
      if (p < text.size() && (text[p] == '=' || text[p] == ':')) {
        p++;
        auto v = parse_number(text, p);
        if (v) {
          anchor_end = std::max(anchor_end, p);
          return v;
        }
      }
    }
    at = ifind(text, key, at + 1);
  }
  return std::nullopt;
}

// Splits a field list on top-level commas.
inline std::vector<std::pair<std::string, std::size_t>> split_fields(
    const std::string& body, std::size_t base_offset) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',') {
      out.emplace_back(body.substr(start, i - start), base_offset + start);
      start = i + 1;
    }
  }
  return out;
}

// Accepts "a-b", "a – b" (en dash), or "a to b". Single numbers leave the
// offset absent.
inline void parse_time_range(const std::string& field, std::size_t field_off,
                             ParsedSource& src,
                             std::vector<ParseIssue>& issues,
                             const std::string& full_text) {
  std::size_t pos = 0;
  auto first = parse_number(field, pos);
  if (!first) {
    if (!trim(field).empty()) {
      issues.push_back({IssueCode::kUnparsableNumber, true,
                        line_of(full_text, field_off),
                        col_of(full_text, field_off),
                        "unparsable time field: '" + trim(field) + "'"});
    }
    return;
  }
  src.onset_s = *first;
  while (pos < field.size() &&
         std::isspace(static_cast<unsigned char>(field[pos])))
    pos++;
  bool has_sep = false;
  if (pos < field.size() && field[pos] == '-') {
    pos++;
    has_sep = true;
  } else if (pos + 2 < field.size() &&
             static_cast<unsigned char>(field[pos]) == 0xE2 &&
             static_cast<unsigned char>(field[pos + 1]) == 0x80 &&
             static_cast<unsigned char>(field[pos + 2]) == 0x93) {
    pos += 3;
    has_sep = true;
  } else if (pos + 1 < field.size() && ieq(field[pos], 't') &&
             ieq(field[pos + 1], 'o')) {
    pos += 2;
    has_sep = true;
  }
  if (!has_sep) return;
  auto second = parse_number(field, pos);
  if (second) {
    src.offset_s = *second;
  } else {
    issues.push_back({IssueCode::kUnparsableNumber, true,
                      line_of(full_text, field_off + pos),
                      col_of(full_text, field_off + pos),
                      "missing end time in '" + trim(field) + "'"});
  }
}

inline void parse_numeric_field(const std::string& field, std::size_t field_off,
                                const char* what,
                                std::optional<double>& slot,
                                std::vector<ParseIssue>& issues,
                                const std::string& full_text) {
  if (trim(field).empty()) return;  // absent attribute
  std::size_t pos = 0;
  auto v = parse_number(field, pos);
  if (v && trim(field.substr(pos)).empty()) {
    slot = *v;
  } else {
    issues.push_back({IssueCode::kUnparsableNumber, true,
                      line_of(full_text, field_off),
                      col_of(full_text, field_off),
                      std::string("unparsable ") + what + " field: '" +
                          trim(field) + "'"});
  }
}

}  // namespace detail

/// Tolerant inverse of render_scene. Never throws on any byte input;
/// recoverable deviations land in issues, fatal per-line failures drop the
/// line, header failures leave stated fields absent.
inline SceneDescription parse_scene(const std::string& input) {
  SceneDescription out;
  out.raw_text = input;
  std::string text;
  text.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input[i] == '\r') {
      if (i + 1 < input.size() && input[i + 1] == '\n') continue;
      text.push_back('\n');
    } else {
      text.push_back(input[i]);
    }
  }

  std::size_t header_end = 0;
  out.stated_room_volume =
      detail::find_key_number(text, "room_volume", header_end);
  out.stated_rt60 = detail::find_key_number(text, "rt60", header_end);
  std::size_t n_src_end = 0;
  if (auto n = detail::find_key_number(text, "n_src", n_src_end)) {
    out.stated_n_src = static_cast<int>(std::floor(*n + 0.5));
    header_end = std::max(header_end, n_src_end);
  }
  out.stated_noise_loudness =
      detail::find_key_number(text, "noise_loudness", header_end);

  std::size_t nl_at = detail::ifind(text, "noise_label");
  if (nl_at != std::string::npos) {
    std::size_t p = nl_at + std::string("noise_label").size();
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p])))
      p++;
    if (p < text.size() && (text[p] == ':' || text[p] == '=')) {
      p++;
      std::size_t end = p;
      while (end < text.size() && text[end] != ';' && text[end] != '\n')
        end++;
      out.stated_noise_label = detail::trim(text.substr(p, end - p));
      header_end = std::max(header_end, end);
    }
  }

  const bool any_header = out.stated_room_volume || out.stated_rt60 ||
                          out.stated_n_src || out.stated_noise_label ||
                          out.stated_noise_loudness;
  if (!any_header) {
    out.issues.push_back({IssueCode::kMalformedHeader, true, 1, 1,
                          "no recognizable header fields"});
  } else {
    auto missing = [&](bool present, const char* key) {
      if (!present)
        out.issues.push_back({IssueCode::kMalformedHeader, true, 1, 1,
                              std::string("missing header field ") + key});
    };
    missing(out.stated_room_volume.has_value(), "room_volume");
    missing(out.stated_rt60.has_value(), "RT60");
    missing(out.stated_n_src.has_value(), "n_src");
    missing(out.stated_noise_label.has_value(), "noise_label");
    missing(out.stated_noise_loudness.has_value(), "noise_loudness");
  }

  // Source entries start after the banner when present, otherwise after the
  // last header anchor; bare tuple lists with no header scan from the top.
  std::size_t section = header_end;
  std::size_t banner = detail::ifind(text, "sound label");
  if (banner != std::string::npos) {
    std::size_t eol = text.find('\n', banner);
    section = eol == std::string::npos ? text.size() : eol + 1;
  }

  // Entries are ';'-terminated; the final one may omit the terminator.
  std::size_t entry_start = section;
  while (entry_start < text.size()) {
    std::size_t entry_end = text.find(';', entry_start);
    if (entry_end == std::string::npos) entry_end = text.size();
    std::string entry = text.substr(entry_start, entry_end - entry_start);
    std::size_t entry_off = entry_start;
    entry_start = entry_end + 1;

    std::string trimmed = detail::trim(entry);
    if (trimmed.empty()) continue;
    bool only_dots = true;
    for (char c : trimmed)
      if (c != '.' && !std::isspace(static_cast<unsigned char>(c)))
        only_dots = false;
    if (only_dots) continue;

    std::size_t first_char = 0;
    while (first_char < entry.size() &&
           std::isspace(static_cast<unsigned char>(entry[first_char])))
      first_char++;
    ParsedSource src;
    src.line = detail::line_of(text, entry_off + first_char);
    // Locate the last ": (" split point.
    std::size_t split = std::string::npos;
    for (std::size_t i = 0; i + 1 < entry.size(); ++i) {
      if (entry[i] == ':') {
        std::size_t j = i + 1;
        while (j < entry.size() &&
               std::isspace(static_cast<unsigned char>(entry[j])))
          j++;
        if (j < entry.size() && entry[j] == '(') split = i;
      }
    }
    std::string body;
    std::size_t body_off = 0;
    if (split != std::string::npos) {
      std::string label = detail::trim(entry.substr(0, split));
      if (!label.empty()) src.label = label;
      std::size_t open = entry.find('(', split);
      std::size_t close = entry.rfind(')');
      if (close == std::string::npos || close <= open) close = entry.size();
      body = entry.substr(open + 1, close - open - 1);
      body_off = entry_off + open + 1;
    } else {
      std::size_t colon = entry.find(':');
      if (colon == std::string::npos) {
        out.issues.push_back(
            {IssueCode::kDroppedSourceLine, false,
             detail::line_of(text, entry_off), detail::col_of(text, entry_off),
             "unstructured source entry dropped: '" +
                 (trimmed.size() > 40 ? trimmed.substr(0, 40) + "..." : trimmed) +
                 "'"});
        continue;
      }
      std::string label = detail::trim(entry.substr(0, colon));
      if (!label.empty()) src.label = label;
      body = entry.substr(colon + 1);
      body_off = entry_off + colon + 1;
    }

    auto fields = detail::split_fields(body, body_off);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const std::string& field = fields[f].first;
      std::size_t off = fields[f].second;
      switch (f) {
        case 0:
          detail::parse_time_range(field, off, src, out.issues, text);
          break;
        case 1: {
          std::string name = detail::trim(field);
          if (name.empty()) break;
          auto zone = zone_from_name(name);
          if (zone) {
            src.zone = *zone;
          } else {
            out.issues.push_back({IssueCode::kUnknownZoneName, true,
                                  detail::line_of(text, off),
                                  detail::col_of(text, off),
                                  "unknown zone name: '" + name + "'"});
          }
          break;
        }
        case 2:
          detail::parse_numeric_field(field, off, "distance", src.distance_m,
                                      out.issues, text);
          break;
        case 3:
          detail::parse_numeric_field(field, off, "loudness", src.loudness_dba,
                                      out.issues, text);
          break;
        case 4:
          detail::parse_numeric_field(field, off, "C50", src.c50_db,
                                      out.issues, text);
          break;
        default:
          if (!detail::trim(field).empty()) {
            out.issues.push_back({IssueCode::kExtraField, false,
                                  detail::line_of(text, off),
                                  detail::col_of(text, off),
                                  "extra field ignored: '" +
                                      detail::trim(field) + "'"});
          }
      }
    }

    if (!src.label && !src.onset_s && !src.zone && !src.distance_m &&
        !src.loudness_dba && !src.c50_db) {
      out.issues.push_back({IssueCode::kDroppedSourceLine, false,
                            detail::line_of(text, entry_off),
                            detail::col_of(text, entry_off),
                            "source entry with no usable fields dropped"});
      continue;
    }
    out.tuples.push_back(std::move(src));
  }

  if (out.stated_n_src &&
      *out.stated_n_src != static_cast<int>(out.tuples.size())) {
    out.issues.push_back(
        {IssueCode::kCountMismatch, false, 1, 1,
         "declared n_src=" + std::to_string(*out.stated_n_src) + " but " +
             std::to_string(out.tuples.size()) + " source entries found"});
  }

  out.parsed.room_volume_m3 = out.stated_room_volume.value_or(0.0);
  out.parsed.rt60_s = out.stated_rt60.value_or(0.0);
  out.parsed.noise_label = out.stated_noise_label.value_or("");
  out.parsed.noise_loudness_db = out.stated_noise_loudness.value_or(0.0);
  for (const auto& t : out.tuples) {
    if (!t.complete()) continue;
    SourceMeta s;
    s.label = *t.label;
    s.onset_s = *t.onset_s;
    s.offset_s = *t.offset_s;
    s.zone = *t.zone;
    s.distance_m = *t.distance_m;
    s.loudness_dba = *t.loudness_dba;
    s.c50_db = *t.c50_db;
    out.parsed.sources.push_back(std::move(s));
  }
  std::stable_sort(out.parsed.sources.begin(), out.parsed.sources.end(),
                   canonical_source_less);
  out.parsed.n_src = static_cast<int>(out.parsed.sources.size());
  return out;
}

}  // namespace foascene

#endif  // FOASCENE_SCENE_TEXT_HPP_
