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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "foascene/config.hpp"
#include "foascene/embed_client.hpp"
#include "foascene/eval_protocol.hpp"
#include "foascene/iv_localizer.hpp"
#include "foascene/manifest.hpp"
#include "foascene/report.hpp"
#include "foascene/rng.hpp"
#include "foascene/scene_synth.hpp"
#include "foascene/scene_text.hpp"
#include "foascene/wav_io.hpp"

namespace fs = std::filesystem;
using namespace foascene;

namespace {

// Machine-readable output goes to stdout or files; every log line goes here.
void log_line(const std::string& msg) {
  std::fprintf(stderr, "foascene: %s\n", msg.c_str());
}

std::string clip_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%06zu", index);
  return buf;
}

std::string read_all_stdin() {
  std::ostringstream ss;
  ss << std::cin.rdbuf();
  return ss.str();
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<Json> lines;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(path + ":" + std::to_string(number) + ": bad JSON line");
    }
    lines.push_back(std::move(j));
  }
  return lines;
}

// Plans copy the chosen room verbatim, so an exact field match recovers the
// index into the precomputed RIR cache.
std::size_t room_index_of(const std::vector<RoomSpec>& rooms,
                          const RoomSpec& room) {
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    const RoomSpec& r = rooms[i];
    if (r.lx == room.lx && r.ly == room.ly && r.lz == room.lz &&
        r.mic_position.x == room.mic_position.x &&
        r.mic_position.y == room.mic_position.y &&
        r.mic_position.z == room.mic_position.z) {
      return i;
    }
  }
  throw Error("plan references a room outside the sampled set");
}

// Distinct seed stream for room sampling so room geometry stays fixed while
// per-clip draws vary with the clip index.
constexpr std::uint64_t kRoomStream = 0x726f6f6d73ULL;

struct SynthArgs {
  int rooms = 10;
  int clips = 0;
  std::string pool_path;
  std::string out_dir;
};

int run_synth(const ToolConfig& cfg, const SynthArgs& args) {
  synth::SourcePool pool =
      synth::pool_from_json(load_json_file(args.pool_path));
  fs::create_directories(args.out_dir);

  std::vector<RoomSpec> rooms;
  for (int r = 0; r < args.rooms; ++r) {
    rooms.push_back(rir::sample_room(
        derive_seed(cfg.seed ^ kRoomStream, static_cast<std::uint64_t>(r)),
        cfg.room_alpha_lo, cfg.room_alpha_hi));
  }
  std::vector<synth::RoomRirs> rirs(rooms.size());
  parallel_for(rooms.size(), cfg.workers, [&](std::size_t i) {
    rirs[i] = synth::build_room_rirs(rooms[i], cfg.sample_rate_hz);
  });
  log_line("prepared " + std::to_string(rooms.size()) + " rooms");

  synth::SynthConfig synth_cfg = cfg.synth;
  synth_cfg.sample_rate_hz = cfg.sample_rate_hz;

  const std::size_t n = static_cast<std::size_t>(args.clips);
  std::vector<Json> manifest_lines(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const std::uint64_t clip_seed = derive_seed(cfg.seed, i);
    const synth::MixturePlan plan =
        synth::plan_mixture(pool, rooms, synth_cfg, clip_seed);
    const std::size_t room_idx = room_index_of(rooms, plan.room);
    const synth::RenderedScene scene =
        synth::render_mixture(plan, &rirs[room_idx], cfg.sample_rate_hz);

    const std::string id = clip_name(i);
    const fs::path base = fs::path(args.out_dir) / id;
    wav::write_wav_float32(base.string() + ".wav", scene.foa);

    Json clip_json;
    clip_json["clip"] = id;
    clip_json["seed"] = clip_seed;
    clip_json["room"] = room_to_json(plan.room);
    clip_json["scene"] = scene_to_json(scene.meta);
    clip_json["warnings"] = scene.warnings;
    save_json_file(base.string() + ".json", clip_json);

    const std::string text = render_scene(scene.meta);
    std::ofstream txt(base.string() + ".txt", std::ios::trunc);
    if (!txt) throw Error("cannot write " + base.string() + ".txt");
    txt << text;

    Json line;
    line["clip"] = id;
    line["wav"] = id + ".wav";
    line["json"] = id + ".json";
    line["txt"] = id + ".txt";
    line["n_src"] = scene.meta.n_src;
    line["scene"] = scene_to_json(scene.meta);
    manifest_lines[i] = std::move(line);

    for (const std::string& w : scene.warnings) log_line(id + ": " + w);
  });

  const fs::path manifest_path = fs::path(args.out_dir) / "manifest.jsonl";
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) throw Error("cannot write " + manifest_path.string());
  for (const Json& line : manifest_lines) manifest << line.dump() << '\n';
  log_line("wrote " + std::to_string(n) + " clips to " + args.out_dir);
  return 0;
}

struct RirArgs {
  std::string room_path;
  std::string out_dir;
};

int run_rir(const ToolConfig& cfg, const RirArgs& args) {
  RoomSpec room;
  if (!args.room_path.empty()) {
    room = room_from_json(load_json_file(args.room_path));
  } else {
    room = rir::sample_room(derive_seed(cfg.seed ^ kRoomStream, 0),
                            cfg.room_alpha_lo, cfg.room_alpha_hi);
    log_line("sampled a room (no --room given)");
  }
  if (room.candidate_source_positions.empty())
    throw Error("room has no candidate source positions");
  fs::create_directories(args.out_dir);
  save_json_file((fs::path(args.out_dir) / "room.json").string(),
                 room_to_json(room));

  const std::size_t n = room.candidate_source_positions.size();
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const Vec3 pos = room.candidate_source_positions[i];
    const rir::FoaRir r =
        rir::simulate_rir_with_stats(room, pos, cfg.sample_rate_hz);

    wav::AudioBuffer buf;
    buf.sample_rate_hz = r.sample_rate_hz;
    buf.channels = {r.w, r.x, r.y, r.z};
    char name[32];
    std::snprintf(name, sizeof(name), "rir_%03zu", i);
    const fs::path base = fs::path(args.out_dir) / name;
    wav::write_wav_float32(base.string() + ".wav", buf);

    const Vec3 offset = pos - room.mic_position;
    const AzEl angles = angles_from_direction(normalized(offset));
    Json side;
    side["position_index"] = i;
    side["source_position"] = vec3_to_json(pos);
    side["mic_position"] = vec3_to_json(room.mic_position);
    side["distance_m"] = norm(offset);
    side["azimuth_deg"] = angles.azimuth_deg;
    side["elevation_deg"] = angles.elevation_deg;
    side["zone"] = zone_name(quantize_direction(normalized(offset)));
    side["direct_path_delay_s"] = r.direct_path_delay_s;
    side["rt60_s"] = r.rt60_s;
    side["c50_db"] = r.c50_db;
    save_json_file(base.string() + ".json", side);
  });
  log_line("wrote " + std::to_string(n) + " impulse responses to " +
           args.out_dir);
  return 0;
}

struct FeatureArgs {
  std::string wav_path;
  std::string out_path;
};

int run_features(const ToolConfig& cfg, const FeatureArgs& args) {
  const wav::AudioBuffer buf = wav::read_wav(args.wav_path);
  const dsp::FeatureStack stack = dsp::extract_features(buf, cfg.features);
  dsp::write_feature_file(args.out_path, stack);
  log_line("features: " + std::to_string(stack.num_frames) + " frames x " +
           std::to_string(stack.mel_bins) + " bins, 7 maps");
  return 0;
}

struct LocalizeArgs {
  std::string wav_path;
  std::string json_path;
};

int run_localize(const ToolConfig& cfg, const LocalizeArgs& args) {
  const wav::AudioBuffer buf = wav::read_wav(args.wav_path);
  const std::vector<loc::LocalizationResult> events =
      loc::localize(buf, cfg.localizer);
  const Json j = loc::localization_to_json(events);
  if (args.json_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    save_json_file(args.json_path, j);
  }
  log_line("localized " + std::to_string(events.size()) + " events");
  return 0;
}

int run_render(const std::string& order_by_name_str) {
  const std::optional<OrderBy> order = order_by_from_name(order_by_name_str);
  if (!order) throw Error("unknown --order-by: " + order_by_name_str);
  Json j = Json::parse(read_all_stdin(), nullptr, false);
  if (j.is_discarded()) throw Error("stdin is not JSON");
  // Accept both a bare scene object and a clip manifest wrapping one.
  const SceneMeta scene =
      scene_from_json(j.contains("scene") ? j.at("scene") : j);
  std::cout << render_scene(scene, *order);
  return 0;
}

int run_parse() {
  const SceneDescription desc = parse_scene(read_all_stdin());
  for (const ParseIssue& issue : desc.issues) {
    log_line(std::string(issue.is_error ? "error" : "warning") + " line " +
             std::to_string(issue.line) + " col " +
             std::to_string(issue.column) + ": " + issue.message);
  }
  if (desc.has_errors()) return 1;
  std::cout << scene_to_json(desc.parsed).dump(2) << '\n';
  return 0;
}

struct EvalArgs {
  std::string ref_path;
  std::string hyp_path;
  std::string protocol = "os";
  std::string report_path;
};

int run_eval(const ToolConfig& cfg, const EvalArgs& args) {
  const Protocol protocol =
      args.protocol == "om" ? Protocol::kOM : Protocol::kOS;

  std::vector<std::pair<std::string, SceneMeta>> refs;
  for (const Json& line : read_jsonl(args.ref_path)) {
    refs.emplace_back(line.at("clip").get<std::string>(),
                      scene_from_json(line.at("scene")));
  }
  std::map<std::string, std::string> hyp_texts;
  for (const Json& line : read_jsonl(args.hyp_path)) {
    hyp_texts[line.at("clip").get<std::string>()] =
        line.at("text").get<std::string>();
  }

  std::vector<SceneDescription> hyps(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto it = hyp_texts.find(refs[i].first);
    if (it == hyp_texts.end()) {
      log_line("no hypothesis for " + refs[i].first + ", scoring as empty");
      continue;
    }
    hyps[i] = parse_scene(it->second);
  }

  // Pick the provider; an unreachable service downgrades to the lexical
  // scorer up front so every clip is scored by the same backend.
  LexicalSimilarity lexical;
  std::unique_ptr<embed::EmbeddingSimilarity> service;
  SimilarityProvider* provider = &lexical;
  bool fallback = false;
  if (cfg.provider == "embedding_service") {
    service = std::make_unique<embed::EmbeddingSimilarity>(cfg.embedding);
    std::set<std::string> text_set;
    for (const auto& [id, scene] : refs) {
      text_set.insert(scene.noise_label);
      for (const SourceMeta& s : scene.sources) text_set.insert(s.label);
    }
    for (const SceneDescription& h : hyps) {
      if (h.stated_noise_label.has_value())
        text_set.insert(h.stated_noise_label.value());
      for (const ParsedSource& t : h.tuples) text_set.insert(t.label);
    }
    try {
      service->prefetch(
          std::vector<std::string>(text_set.begin(), text_set.end()));
      provider = service.get();
    } catch (const embed::ServiceUnavailable& e) {
      log_line(std::string("embedding service unavailable, falling back to "
                           "lexical: ") +
               e.what());
      fallback = true;
    }
  }

  std::vector<ScoreReport> reports(refs.size());
  parallel_for(refs.size(), cfg.workers, [&](std::size_t i) {
    reports[i] =
        score_scene(refs[i].second, hyps[i], protocol, *provider);
  });

  std::vector<std::pair<std::string, ScoreReport>> per_clip;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    per_clip.emplace_back(refs[i].first, reports[i]);
  }
  Json report = corpus_report_json(per_clip);
  report["provider_fallback"] = fallback;
  save_json_file(args.report_path, report);
  log_line("scored " + std::to_string(refs.size()) + " clips into " +
           args.report_path);
  return 0;
}

struct ReportArgs {
  std::string in_path;
  std::string group_by;
};

int run_report(const ReportArgs& args) {
  const Json report = load_json_file(args.in_path);
  if (args.group_by.empty()) {
    std::cout << report.at("summary").dump(2) << '\n';
    return 0;
  }
  // Only n_src grouping exists; the flag is validated by the parser.
  std::vector<ScoreReport> reports;
  for (const auto& [id, r] : corpus_report_clips(report)) reports.push_back(r);
  Json out = summarize_by_n_src(reports);
  out["average"] = summarize_reports(reports);
  std::cout << out.dump(2) << '\n';
  return 0;
}

// The config file layer must load before CLI11 binds flag targets, so the
// flag scan happens by hand ahead of the real parse.
std::optional<std::string> preparse_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  ToolConfig cfg;
  try {
    if (const auto path = preparse_config_path(argc, argv)) {
      config_overlay_json(cfg, load_json_file(*path));
    }
    config_overlay_env(cfg);
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return 1;
  }

  CLI::App app{"first-order ambisonics scene synthesis and evaluation"};
  app.require_subcommand(1);
  std::string config_path_unused;
  app.add_option("--config", config_path_unused,
                 "JSON config file (lowest-precedence layer)");
  app.add_option("--seed", cfg.seed, "master random seed");
  app.add_option("--workers", cfg.workers, "worker threads, 0 = all cores");
  app.add_option("--sample-rate", cfg.sample_rate_hz, "sample rate in Hz");
  app.add_option("--provider", cfg.provider,
                 "similarity backend: lexical or embedding_service")
      ->check(CLI::IsMember({"lexical", "embedding_service"}));
  app.add_option("--embed-url", cfg.embedding.url,
                 "embedding service base URL");
  app.add_option("--embed-timeout", cfg.embedding.timeout_s,
                 "embedding request timeout in seconds");
  app.add_option("--embed-batch", cfg.embedding.batch_size,
                 "texts per embedding request");

  SynthArgs synth_args;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "synthesize a labeled clip corpus");
  synth_cmd->fallthrough();
  synth_cmd->add_option("--rooms", synth_args.rooms, "rooms to sample")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--clips", synth_args.clips, "clips to render")
      ->required()
      ->check(CLI::PositiveNumber);
  synth_cmd
      ->add_option("--max-sources", cfg.synth.max_sources,
                   "sources per clip upper bound")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--pool", synth_args.pool_path, "source pool JSON")
      ->required();
  synth_cmd->add_option("--out", synth_args.out_dir, "output directory")
      ->required();

  RirArgs rir_args;
  CLI::App* rir_cmd = app.add_subcommand(
      "rir", "render a room's impulse responses to WAV files");
  rir_cmd->fallthrough();
  rir_cmd->add_option("--room", rir_args.room_path,
                      "room spec JSON (sampled when omitted)");
  rir_cmd->add_option("--out", rir_args.out_dir, "output directory")
      ->required();

  FeatureArgs feature_args;
  CLI::App* features_cmd = app.add_subcommand(
      "features", "extract the seven-map spatial feature stack");
  features_cmd->fallthrough();
  features_cmd->add_option("--wav", feature_args.wav_path, "input 4ch WAV")
      ->required();
  features_cmd->add_option("--out", feature_args.out_path,
                           "output feature container")
      ->required();

  LocalizeArgs localize_args;
  CLI::App* localize_cmd = app.add_subcommand(
      "localize", "detect and localize sources with the intensity baseline");
  localize_cmd->fallthrough();
  localize_cmd->add_option("--wav", localize_args.wav_path, "input 4ch WAV")
      ->required();
  localize_cmd->add_option("--json", localize_args.json_path,
                           "output JSON path (stdout when omitted)");

  std::string order_by = "loudness";
  CLI::App* render_cmd = app.add_subcommand(
      "render", "scene manifest JSON on stdin to scene text on stdout");
  render_cmd->fallthrough();
  render_cmd->add_option("--order-by", order_by,
                         "source line order: loudness zone distance name "
                         "onset");

  CLI::App* parse_cmd = app.add_subcommand(
      "parse", "scene text on stdin to scene manifest JSON on stdout");
  parse_cmd->fallthrough();

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score hypothesis descriptions");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--ref", eval_args.ref_path, "reference manifest.jsonl")
      ->required();
  eval_cmd->add_option("--hyp", eval_args.hyp_path, "hypothesis JSONL")
      ->required();
  eval_cmd->add_option("--protocol", eval_args.protocol, "os or om")
      ->check(CLI::IsMember({"os", "om"}));
  eval_cmd->add_option("--report", eval_args.report_path, "report JSON out")
      ->required();

  ReportArgs report_args;
  CLI::App* report_cmd =
      app.add_subcommand("report", "summarize an eval report");
  report_cmd->fallthrough();
  report_cmd->add_option("--in", report_args.in_path, "report JSON")
      ->required();
  report_cmd->add_option("--group-by", report_args.group_by,
                         "split rows by reference source count")
      ->check(CLI::IsMember({"n_src"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    validate_config(cfg);
    log_line("config: " + config_to_json(cfg).dump());
    if (synth_cmd->parsed()) return run_synth(cfg, synth_args);
    if (rir_cmd->parsed()) return run_rir(cfg, rir_args);
    if (features_cmd->parsed()) return run_features(cfg, feature_args);
    if (localize_cmd->parsed()) return run_localize(cfg, localize_args);
    if (render_cmd->parsed()) return run_render(order_by);
    if (parse_cmd->parsed()) return run_parse();
    if (eval_cmd->parsed()) return run_eval(cfg, eval_args);
    if (report_cmd->parsed()) return run_report(report_args);
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return 1;
  }
  return 2;
}
