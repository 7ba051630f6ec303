#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybeam/array.hpp"
#include "hybeam/common.hpp"
#include "hybeam/dictionary.hpp"
#include "hybeam/metrics.hpp"
#include "hybeam/scene.hpp"
#include "hybeam/stft.hpp"
#include "hybeam/subspace.hpp"
#include "hybeam/wav.hpp"

namespace hybeam {

using nlohmann::json;

enum class DictMode { Parametric, DataDriven, File };

struct RunConfig {
  uint64_t seed = 0;
  std::string output_dir = "out";
  StftConfig stft;

  std::vector<std::array<double, 3>> geometry = default_array_geometry();
  std::string atf_path;  // when set, wins over geometry
  GridSpec atf_grid = default_atf_grid();
  int ref_channel = 1;
  double speed_of_sound = kSpeedOfSound;

  DictMode dict_mode = DictMode::Parametric;
  std::string dict_path;
  GridSpec steering = default_steering_patch();
  bool include_identity = true;
  double aniso_az_step_deg = 6.0;
  std::vector<double> aniso_ranges_db = {8, 16, 24, 32, 40};
  std::vector<double> plane_wave_az_deg;  // off by default
  int clusters = 64;
  int training_use_first = 0;  // 0 = every training file
  int training_stride = 1;     // keep every n-th smoothed snapshot
  std::optional<double> kappa0;

  double t_seconds = 0.080;

  std::vector<SourceSpec> pool;
  struct SegmentGroup {
    int n_active = 1;
    int count = 20;
  };
  std::vector<SegmentGroup> segment_groups;
  double segment_seconds = 6.0;
  double onset_seconds = 2.0;
  IsotropyFunction ambient_isotropy = IsotropyFunction::iso();
  std::optional<double> ambient_level_db;
  std::optional<double> sensor_noise_db;
  std::optional<DiffuseTail> tail;

  FwSegSnrConfig fwsnr;
};

namespace cfgdetail {

inline void check_keys(const json& o, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!o.is_object()) throw ConfigError("config: " + path + " must be an object");
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok)
      throw ConfigError("config: unknown key '" +
                        (path.empty() ? it.key() : path + "." + it.key()) + "'");
  }
}

template <typename T>
T get(const json& o, const std::string& path, const char* key, T fallback) {
  if (!o.contains(key)) return fallback;
  try {
    return o.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value type at " + path + "." + key);
  }
}

inline GridSpec parse_grid(const json& o, const std::string& path, GridSpec base) {
  check_keys(o, path,
             {"az_min_deg", "az_step_deg", "n_az", "incl_min_deg", "incl_step_deg",
              "n_incl"});
  base.az_min_deg = get(o, path, "az_min_deg", base.az_min_deg);
  base.az_step_deg = get(o, path, "az_step_deg", base.az_step_deg);
  base.n_az = get(o, path, "n_az", base.n_az);
  base.incl_min_deg = get(o, path, "incl_min_deg", base.incl_min_deg);
  base.incl_step_deg = get(o, path, "incl_step_deg", base.incl_step_deg);
  base.n_incl = get(o, path, "n_incl", base.n_incl);
  base.validate();
  return base;
}

inline Direction parse_direction(const json& o, const std::string& path) {
  check_keys(o, path, {"frame", "azimuth_deg", "elevation_deg"});
  return Direction::from_az_el_degrees(get(o, path, "azimuth_deg", 0.0),
                                       get(o, path, "elevation_deg", 0.0));
}

inline IsotropyFunction parse_isotropy(const json& v, const std::string& path) {
  if (v.is_string()) {
    if (v == "iso") return IsotropyFunction::iso();
    throw ConfigError("config: " + path + " must be \"iso\" or an object");
  }
  check_keys(v, path, {"kind", "phi_peak_deg", "a_db", "azimuth_deg", "elevation_deg"});
  const std::string kind = get<std::string>(v, path, "kind", "");
  if (kind == "iso") return IsotropyFunction::iso();
  if (kind == "aniso")
    return IsotropyFunction::aniso(deg2rad(get(v, path, "phi_peak_deg", 0.0)),
                                   get(v, path, "a_db", 16.0));
  if (kind == "plane_wave")
    return IsotropyFunction::plane_wave(Direction::from_az_el_degrees(
        get(v, path, "azimuth_deg", 0.0), get(v, path, "elevation_deg", 0.0)));
  throw ConfigError("config: " + path + ".kind must be iso, aniso, or plane_wave");
}

inline SourceSpec parse_source(const json& o, const std::string& path) {
  check_keys(o, path,
             {"kind", "file", "tone_hz", "impulse_hz", "gain_db", "onset_seconds", "doa"});
  SourceSpec s;
  const std::string kind = get<std::string>(o, path, "kind", "speech_shaped");
  if (kind == "speech_shaped")
    s.kind = SourceKind::SpeechShaped;
  else if (kind == "tone")
    s.kind = SourceKind::Tone;
  else if (kind == "impulse_train")
    s.kind = SourceKind::ImpulseTrain;
  else if (kind == "file")
    s.kind = SourceKind::File;
  else
    throw ConfigError("config: " + path + ".kind '" + kind + "' is not a source kind");
  s.file = get<std::string>(o, path, "file", "");
  s.tone_hz = get(o, path, "tone_hz", s.tone_hz);
  s.impulse_hz = get(o, path, "impulse_hz", s.impulse_hz);
  s.gain_db = get(o, path, "gain_db", 0.0);
  s.onset_seconds = get(o, path, "onset_seconds", 0.0);
  if (o.contains("doa")) {
    const json& d = o.at("doa");
    if (d.is_array()) {
      for (size_t i = 0; i < d.size(); ++i)
        s.doa.push_back(parse_direction(d[i], path + ".doa[" + std::to_string(i) + "]"));
    } else {
      s.doa.push_back(parse_direction(d, path + ".doa"));
    }
  }
  if (s.doa.empty()) s.doa.push_back(Direction::from_degrees(0, 90));
  return s;
}

}  // namespace cfgdetail

inline RunConfig parse_config(const json& root) {
  using namespace cfgdetail;
  check_keys(root, "",
             {"seed", "output_dir", "stft", "array", "dictionary", "pipeline", "scenes",
              "metrics"});
  RunConfig c;
  c.seed = get<uint64_t>(root, "", "seed", 0);
  c.output_dir = get<std::string>(root, "", "output_dir", "out");

  if (root.contains("stft")) {
    const json& o = root.at("stft");
    check_keys(o, "stft", {"sample_rate", "window_len", "hop", "fft_len"});
    c.stft.sample_rate = get(o, "stft", "sample_rate", c.stft.sample_rate);
    c.stft.window_len = get(o, "stft", "window_len", c.stft.window_len);
    c.stft.hop = get(o, "stft", "hop", c.stft.hop);
    c.stft.fft_len = get(o, "stft", "fft_len", c.stft.window_len);
    c.stft.validate();
  }

  if (root.contains("array")) {
    const json& o = root.at("array");
    check_keys(o, "array",
               {"geometry", "atf_path", "atf_grid", "ref_channel", "speed_of_sound"});
    if (o.contains("geometry")) {
      c.geometry.clear();
      for (const auto& row : o.at("geometry")) {
        if (!row.is_array() || row.size() != 3)
          throw ConfigError("config: array.geometry entries must be [x, y, z]");
        c.geometry.push_back({row[0].get<double>(), row[1].get<double>(),
                              row[2].get<double>()});
      }
    }
    c.atf_path = get<std::string>(o, "array", "atf_path", "");
    if (o.contains("atf_grid")) c.atf_grid = parse_grid(o.at("atf_grid"), "array.atf_grid", c.atf_grid);
    c.ref_channel = get(o, "array", "ref_channel", c.ref_channel);
    c.speed_of_sound = get(o, "array", "speed_of_sound", c.speed_of_sound);
  }

  if (root.contains("dictionary")) {
    const json& o = root.at("dictionary");
    check_keys(o, "dictionary",
               {"mode", "path", "steering", "include_identity", "aniso_az_step_deg",
                "aniso_dynamic_ranges_db", "plane_wave_az_deg", "clusters",
                "training_use_first", "training_stride", "kappa0"});
    const std::string mode = get<std::string>(o, "dictionary", "mode", "parametric");
    if (mode == "parametric")
      c.dict_mode = DictMode::Parametric;
    else if (mode == "datadriven")
      c.dict_mode = DictMode::DataDriven;
    else if (mode == "file")
      c.dict_mode = DictMode::File;
    else
      throw ConfigError("config: dictionary.mode must be parametric, datadriven, or file");
    c.dict_path = get<std::string>(o, "dictionary", "path", "");
    if (c.dict_mode == DictMode::File && c.dict_path.empty())
      throw ConfigError("config: dictionary.mode=file needs dictionary.path");
    if (o.contains("steering"))
      c.steering = parse_grid(o.at("steering"), "dictionary.steering", c.steering);
    c.include_identity = get(o, "dictionary", "include_identity", true);
    c.aniso_az_step_deg = get(o, "dictionary", "aniso_az_step_deg", 6.0);
    c.aniso_ranges_db =
        get(o, "dictionary", "aniso_dynamic_ranges_db", c.aniso_ranges_db);
    c.plane_wave_az_deg = get(o, "dictionary", "plane_wave_az_deg", c.plane_wave_az_deg);
    c.clusters = get(o, "dictionary", "clusters", 64);
    c.training_use_first = get(o, "dictionary", "training_use_first", 0);
    c.training_stride = get(o, "dictionary", "training_stride", 1);
    if (c.training_stride < 1)
      throw ConfigError("config: dictionary.training_stride must be at least 1");
    if (o.contains("kappa0") && !o.at("kappa0").is_null())
      c.kappa0 = get(o, "dictionary", "kappa0", 0.0);
  }

  if (root.contains("pipeline")) {
    const json& o = root.at("pipeline");
    check_keys(o, "pipeline", {"t_seconds", "ref_channel", "kappa0"});
    c.t_seconds = get(o, "pipeline", "t_seconds", 0.080);
    c.ref_channel = get(o, "pipeline", "ref_channel", c.ref_channel);
    if (o.contains("kappa0") && !o.at("kappa0").is_null())
      c.kappa0 = get(o, "pipeline", "kappa0", 0.0);
  }

  if (root.contains("scenes")) {
    const json& o = root.at("scenes");
    check_keys(o, "scenes",
               {"pool", "segments", "segment_seconds", "onset_seconds", "ambient",
                "sensor_noise_db", "tail"});
    if (o.contains("pool"))
      for (size_t i = 0; i < o.at("pool").size(); ++i)
        c.pool.push_back(cfgdetail::parse_source(
            o.at("pool")[i], "scenes.pool[" + std::to_string(i) + "]"));
    if (o.contains("segments")) {
      const json& segs = o.at("segments");
      auto parse_group = [&](const json& g, const std::string& p) {
        check_keys(g, p, {"n_active", "count"});
        RunConfig::SegmentGroup sg;
        sg.n_active = get(g, p, "n_active", 1);
        sg.count = get(g, p, "count", 20);
        return sg;
      };
      if (segs.is_array()) {
        for (size_t i = 0; i < segs.size(); ++i)
          c.segment_groups.push_back(
              parse_group(segs[i], "scenes.segments[" + std::to_string(i) + "]"));
      } else {
        c.segment_groups.push_back(parse_group(segs, "scenes.segments"));
      }
    }
    c.segment_seconds = get(o, "scenes", "segment_seconds", 6.0);
    c.onset_seconds = get(o, "scenes", "onset_seconds", 2.0);
    if (o.contains("ambient")) {
      const json& a = o.at("ambient");
      check_keys(a, "scenes.ambient", {"isotropy", "level_db"});
      if (a.contains("isotropy"))
        c.ambient_isotropy = parse_isotropy(a.at("isotropy"), "scenes.ambient.isotropy");
      if (a.contains("level_db"))
        c.ambient_level_db = get(a, "scenes.ambient", "level_db", 0.0);
    }
    if (o.contains("sensor_noise_db"))
      c.sensor_noise_db = get(o, "scenes", "sensor_noise_db", 0.0);
    if (o.contains("tail")) {
      const json& t = o.at("tail");
      check_keys(t, "scenes.tail", {"level_db", "decay_seconds"});
      DiffuseTail dt;
      dt.level_db = get(t, "scenes.tail", "level_db", dt.level_db);
      dt.decay_seconds = get(t, "scenes.tail", "decay_seconds", dt.decay_seconds);
      c.tail = dt;
    }
  }

  if (root.contains("metrics")) {
    const json& o = root.at("metrics");
    check_keys(o, "metrics",
               {"bands", "frame_seconds", "hop_seconds", "clamp_lo_db", "clamp_hi_db",
                "weight_exp", "activity_floor_db"});
    c.fwsnr.bands = get(o, "metrics", "bands", c.fwsnr.bands);
    c.fwsnr.frame_seconds = get(o, "metrics", "frame_seconds", c.fwsnr.frame_seconds);
    c.fwsnr.hop_seconds = get(o, "metrics", "hop_seconds", c.fwsnr.hop_seconds);
    c.fwsnr.clamp_lo_db = get(o, "metrics", "clamp_lo_db", c.fwsnr.clamp_lo_db);
    c.fwsnr.clamp_hi_db = get(o, "metrics", "clamp_hi_db", c.fwsnr.clamp_hi_db);
    c.fwsnr.weight_exp = get(o, "metrics", "weight_exp", c.fwsnr.weight_exp);
    c.fwsnr.activity_floor_db =
        get(o, "metrics", "activity_floor_db", c.fwsnr.activity_floor_db);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  json root;
  try {
    root = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

inline AtfSet resolve_atfs(const RunConfig& c) {
  if (!c.atf_path.empty()) return import_atf(c.atf_path);
  return synth_freefield_atf(c.geometry, c.atf_grid, c.stft, c.speed_of_sound,
                             c.ref_channel);
}

inline std::vector<ModelSpec> config_model_specs(const RunConfig& c) {
  std::vector<ModelSpec> specs;
  specs.push_back(ModelSpec::iso());
  if (c.include_identity) specs.push_back(ModelSpec::identity());
  if (c.aniso_az_step_deg > 0 && !c.aniso_ranges_db.empty())
    for (double az = 0; az < 360; az += c.aniso_az_step_deg)
      for (double a : c.aniso_ranges_db) specs.push_back(ModelSpec::aniso(deg2rad(az), a));
  for (double az : c.plane_wave_az_deg)
    specs.push_back(ModelSpec::plane_wave(Direction::from_degrees(az, 90)));
  return specs;
}

namespace cli_detail {

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

inline std::string file_sha256(const std::string& path) {
  const std::string b = slurp(path);
  auto d = detail::sha256(b.data(), b.size());
  return detail::hex(d.data(), d.size());
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("short write to " + path);
}

inline std::string fmt_db(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline json doa_track_json(const std::vector<Direction>& track) {
  json arr = json::array();
  for (size_t l = 0; l < track.size(); ++l) {
    arr.push_back({{"frame", l},
                   {"azimuth_deg", rad2deg(track[l].azimuth)},
                   {"elevation_deg", 90.0 - rad2deg(track[l].inclination)}});
  }
  return arr;
}

inline std::vector<Direction> parse_doa_track(const json& v, int frames) {
  const json& arr = v.is_object() && v.contains("doa_track") ? v.at("doa_track") : v;
  if (!arr.is_array() || arr.empty())
    throw ConfigError("doa track: expected a nonempty JSON array of "
                      "{frame, azimuth_deg, elevation_deg}");
  struct Entry {
    long frame;
    Direction dir;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < arr.size(); ++i) {
    const json& e = arr[i];
    cfgdetail::check_keys(e, "doa_track[" + std::to_string(i) + "]",
                          {"frame", "azimuth_deg", "elevation_deg"});
    Entry en;
    en.frame = e.value("frame", long(i));
    en.dir = Direction::from_az_el_degrees(e.value("azimuth_deg", 0.0),
                                           e.value("elevation_deg", 0.0));
    entries.push_back(en);
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.frame < b.frame; });
  std::vector<Direction> track(frames, entries.front().dir);
  size_t k = 0;
  for (int l = 0; l < frames; ++l) {
    while (k + 1 < entries.size() && entries[k + 1].frame <= l) ++k;
    track[l] = entries[k].dir;
  }
  return track;
}

}  // namespace cli_detail

struct SimulateResult {
  std::vector<std::string> scene_ids;
  std::string manifest_path;
};

inline SimulateResult cmd_simulate(const RunConfig& cfg,
                                   const std::string& out_dir_override = "") {
  namespace fs = std::filesystem;
  const std::string dir =
      out_dir_override.empty() ? cfg.output_dir : out_dir_override;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("simulate: cannot create output dir " + dir);
  if (cfg.pool.empty()) throw ConfigError("simulate: scenes.pool is empty");
  if (cfg.segment_groups.empty())
    throw ConfigError("simulate: scenes.segments is missing");

  AtfSet atfs = resolve_atfs(cfg);

  SceneSpec proto;
  proto.sample_rate = cfg.stft.sample_rate;
  proto.ambient_isotropy = cfg.ambient_isotropy;
  proto.ambient_level_db = cfg.ambient_level_db;
  proto.sensor_noise_db = cfg.sensor_noise_db;
  proto.tail = cfg.tail;

  SimulateResult res;
  json manifest;
  manifest["scenes"] = json::array();
  for (size_t g = 0; g < cfg.segment_groups.size(); ++g) {
    SegmentConstraints sc;
    sc.count = cfg.segment_groups[g].count;
    sc.n_active = cfg.segment_groups[g].n_active;
    sc.segment_seconds = cfg.segment_seconds;
    sc.onset_seconds = cfg.onset_seconds;
    sc.seed = derive_seed(cfg.seed, "scene", uint64_t(g));
    std::vector<SceneSpec> specs = segment_scenes(cfg.pool, proto, sc);
    if (specs.empty() && sc.count > 0)
      throw ConfigError("simulate: pool of " + std::to_string(cfg.pool.size()) +
                        " cannot host n_active=" + std::to_string(sc.n_active));
    for (const SceneSpec& spec : specs) {
      SceneOutput out = render_scene(spec, atfs, cfg.stft);
      const std::string base = (fs::path(dir) / spec.id).string();
      write_wav(out.mixed, base + "_mixed.wav");
      write_wav(out.target_direct, base + "_target.wav");
      write_wav(out.gt_noise, base + "_gtnoise.wav");

      json side;
      side["id"] = spec.id;
      side["n_active"] = spec.n_active;
      side["sample_rate"] = cfg.stft.sample_rate;
      side["frames"] = out.doa_track.size();
      side["target_onset_seconds"] = cfg.onset_seconds;
      side["doa_track"] = cli_detail::doa_track_json(out.doa_track);
      json act = json::array();
      for (char a : out.target_active) act.push_back(int(a));
      side["target_active"] = act;
      cli_detail::write_text(base + "_sidecar.json", side.dump(2) + "\n");

      json entry;
      entry["id"] = spec.id;
      entry["n_active"] = spec.n_active;
      for (const char* suffix : {"_mixed.wav", "_target.wav", "_gtnoise.wav",
                                 "_sidecar.json"})
        entry["sha256"][std::string(suffix).substr(1)] =
            cli_detail::file_sha256(base + suffix);
      manifest["scenes"].push_back(entry);
      res.scene_ids.push_back(spec.id);
    }
  }
  res.manifest_path = (fs::path(dir) / "manifest.json").string();
  cli_detail::write_text(res.manifest_path, manifest.dump(2) + "\n");
  return res;
}

inline std::string cmd_build_dict(const RunConfig& cfg, const std::string& out_path,
                                  const std::string& training_dir = "") {
  namespace fs = std::filesystem;
  AtfSet atfs = resolve_atfs(cfg);
  std::vector<Direction> steering = cfg.steering.directions();

  WeightDictionary dict;
  bool datadriven = false;
  if (cfg.dict_mode == DictMode::Parametric) {
    dict = build_parametric(atfs, config_model_specs(cfg), steering, cfg.kappa0);
  } else if (cfg.dict_mode == DictMode::DataDriven) {
    if (training_dir.empty())
      throw ConfigError("build-dict: datadriven mode needs a training directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(training_dir)) {
      const std::string name = e.path().filename().string();
      if (name.size() > 12 && name.substr(name.size() - 12) == "_gtnoise.wav")
        files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (cfg.training_use_first > 0 && int(files.size()) > cfg.training_use_first)
      files.resize(cfg.training_use_first);
    if (files.empty())
      throw IoError("build-dict: no *_gtnoise.wav training files in " + training_dir);
    TrainingSet training(atfs.channels(), atfs.bins());
    for (const std::string& f : files) {
      AudioBuffer noise = read_wav(f);
      if (noise.channels() != atfs.channels())
        throw DimensionMismatch("build-dict: " + f + " has " +
                                std::to_string(noise.channels()) + " channels, ATF has " +
                                std::to_string(atfs.channels()));
      training.merge(ema_gt_ncm(analyze(noise, cfg.stft), cfg.t_seconds,
                                cfg.training_stride));
    }
    dict = build_datadriven(training, cfg.clusters, atfs, steering, cfg.seed, cfg.kappa0);
    datadriven = true;
  } else {
    throw ConfigError("build-dict: dictionary.mode=file has nothing to build");
  }

  save_dict(dict, out_path);
  std::string summary = "M=" + std::to_string(dict.models()) +
                        (datadriven ? " (incl. Iso)" : "") +
                        " F=" + std::to_string(dict.bins()) +
                        " Q=" + std::to_string(dict.channels()) +
                        " Ψ=" + std::to_string(dict.steering_count());
  return summary;
}

inline void cmd_enhance(const RunConfig& cfg, const WeightDictionary& dict,
                        const std::string& wav_path, const std::string& doa_path,
                        const std::string& out_base) {
  AudioBuffer mixed = read_wav(wav_path);
  if (mixed.sample_rate != cfg.stft.sample_rate)
    throw ConfigMismatch("enhance: input is at " +
                         std::to_string(int(mixed.sample_rate)) + " Hz, config wants " +
                         std::to_string(int(cfg.stft.sample_rate)));
  if (mixed.channels() != dict.channels())
    throw DimensionMismatch("enhance: input has " + std::to_string(mixed.channels()) +
                            " channels, dictionary wants " +
                            std::to_string(dict.channels()));

  StftTensor y = analyze(mixed, cfg.stft);
  json doa_json;
  try {
    doa_json = json::parse(cli_detail::slurp(doa_path));
  } catch (const json::exception& e) {
    throw FormatError("enhance: " + doa_path + " is not valid JSON: " + e.what());
  }
  std::vector<Direction> track = cli_detail::parse_doa_track(doa_json, y.frames);

  PipelineResult res = run_pipeline(y, dict, track, cfg.t_seconds);

  auto to_wav = [&](const StftTensor& t, const std::string& path) {
    AudioBuffer out = synthesize(t);
    for (auto& ch : out.samples) ch.resize(mixed.length(), 0.0);
    write_wav(out, path);
  };
  to_wav(res.z_ss, out_base + ".wav");
  to_wav(res.diag.z_iso, out_base + "_iso.wav");
  to_wav(res.diag.z_hyb, out_base + "_hyb.wav");

  json diag;
  diag["frames"] = y.frames;
  diag["bins"] = y.bins;
  diag["warmup_frames"] = warmup_frames(cfg.t_seconds, cfg.stft.hop_seconds());
  json bh = json::array(), bi_re = json::array(), bi_im = json::array();
  for (const MixingWeights& m : res.diag.mixing) {
    bh.push_back(m.beta_hyb.real());
    bi_re.push_back(m.beta_iso.real());
    bi_im.push_back(m.beta_iso.imag());
  }
  diag["beta_hyb"] = bh;
  diag["beta_iso_re"] = bi_re;
  diag["beta_iso_im"] = bi_im;
  std::map<int, long> histogram;
  for (const auto& frame : res.diag.selected_model)
    for (int m : frame) ++histogram[m];
  json hist = json::object();
  const auto& ids = dict.model_ids();
  for (const auto& [m, count] : histogram)
    hist[m < int(ids.size()) ? ids[m] : std::to_string(m)] = count;
  diag["model_histogram"] = hist;
  long oob = 0;
  for (char f : res.diag.out_of_coverage) oob += f;
  diag["out_of_coverage_frames"] = oob;
  json st = json::array();
  for (int s : res.diag.steering_index) st.push_back(s);
  diag["steering_index"] = st;
  cli_detail::write_text(out_base + "_diag.json", diag.dump(2) + "\n");
}

inline void cmd_enhance(const RunConfig& cfg, const std::string& dict_path,
                        const std::string& wav_path, const std::string& doa_path,
                        const std::string& out_base) {
  cmd_enhance(cfg, load_dict(dict_path), wav_path, doa_path, out_base);
}

struct EvalRow {
  std::string segment;
  int n_active = 0;
  std::string method;
  double fwsegsnr_db = 0;
  double residual_db = 0;
  double distortion_db = 0;
};

struct MetricGates {
  std::vector<char> all;     // every metric frame past the subspace warmup
  std::vector<char> active;  // additionally requires the target to be on
};

// Activity arrives on the STFT frame grid; the metrics frame at their own
// rate. Map each metric frame by its center, and drop the warmup stretch.
inline MetricGates metric_gates(const RunConfig& cfg, const std::vector<char>& active,
                                size_t n_samples) {
  const double sh = cfg.stft.hop_seconds();
  const int wu = warmup_frames(cfg.t_seconds, sh);
  const int mframes =
      int(double(n_samples) / cfg.stft.sample_rate / cfg.fwsnr.hop_seconds) + 2;
  MetricGates g;
  g.all.assign(mframes, 0);
  g.active.assign(mframes, 0);
  for (int l = 0; l < mframes; ++l) {
    const double center = l * cfg.fwsnr.hop_seconds + 0.5 * cfg.fwsnr.frame_seconds;
    const long sf = long(center / sh);
    if (sf < wu) continue;
    g.all[l] = 1;
    const bool on = sf < long(active.size()) ? bool(active[size_t(sf)])
                                             : (!active.empty() && active.back());
    if (on) g.active[l] = 1;
  }
  return g;
}

// One method's scores against the clean target at the reference channel.
inline EvalRow score_output(const RunConfig& cfg, const std::vector<double>& gt_ref,
                            const std::vector<double>& estimate,
                            const std::vector<char>& target_active_stft) {
  const size_t n = std::min(gt_ref.size(), estimate.size());
  std::vector<double> ref(gt_ref.begin(), gt_ref.begin() + n);
  std::vector<double> out(estimate.begin(), estimate.begin() + n);
  MetricGates g = metric_gates(cfg, target_active_stft, n);
  EvalRow row;
  row.fwsegsnr_db = fwsegsnr(ref, out, cfg.stft.sample_rate, cfg.fwsnr);
  row.residual_db = residual_noise_power(out, ref, g.all, cfg.stft.sample_rate,
                                         cfg.fwsnr.frame_seconds, cfg.fwsnr.hop_seconds);
  row.distortion_db =
      residual_noise_power(out, ref, g.active, cfg.stft.sample_rate,
                           cfg.fwsnr.frame_seconds, cfg.fwsnr.hop_seconds);
  return row;
}

inline std::vector<EvalRow> evaluate_rows(const RunConfig& cfg,
                                          const std::string& scene_dir,
                                          const std::string& enhanced_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> sidecars;
  for (const auto& e : fs::directory_iterator(scene_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 13 && name.substr(name.size() - 13) == "_sidecar.json")
      sidecars.push_back(e.path().string());
  }
  std::sort(sidecars.begin(), sidecars.end());
  if (sidecars.empty()) throw IoError("evaluate: no sidecars in " + scene_dir);

  std::vector<EvalRow> rows;
  for (const std::string& sc_path : sidecars) {
    json side = json::parse(cli_detail::slurp(sc_path));
    const std::string id = side.at("id").get<std::string>();
    const int n_active = side.value("n_active", -1);

    const std::string tgt_path = (fs::path(scene_dir) / (id + "_target.wav")).string();
    if (!fs::exists(tgt_path))
      throw IoError("evaluate: missing ground truth " + tgt_path);
    AudioBuffer target = read_wav(tgt_path);
    if (cfg.ref_channel < 0 || cfg.ref_channel >= target.channels())
      throw RefChannelOutOfRange("evaluate: ref channel " +
                                 std::to_string(cfg.ref_channel) + " of " +
                                 std::to_string(target.channels()));
    const std::vector<double>& gt_ref = target.samples[cfg.ref_channel];

    std::vector<char> active;
    for (const auto& v : side.at("target_active")) active.push_back(char(v.get<int>()));

    const std::pair<const char*, const char*> methods[] = {
        {"iso", "_iso.wav"}, {"hyb", "_hyb.wav"}, {"ssh", ".wav"}};
    for (const auto& [method, suffix] : methods) {
      const std::string est_path = (fs::path(enhanced_dir) / (id + suffix)).string();
      if (!fs::exists(est_path)) throw IoError("evaluate: missing output " + est_path);
      AudioBuffer est = read_wav(est_path);
      EvalRow row = score_output(cfg, gt_ref, est.samples[0], active);
      row.segment = id;
      row.n_active = n_active;
      row.method = method;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void cmd_evaluate(const RunConfig& cfg, const std::string& scene_dir,
                         const std::string& enhanced_dir, const std::string& out_base) {
  std::vector<EvalRow> rows = evaluate_rows(cfg, scene_dir, enhanced_dir);

  // aggregate mean per (n_active, method)
  std::map<std::pair<int, std::string>, std::vector<const EvalRow*>> groups;
  for (const EvalRow& r : rows) groups[{r.n_active, r.method}].push_back(&r);
  std::vector<EvalRow> aggregates;
  for (const auto& [key, members] : groups) {
    EvalRow a;
    a.segment = "aggregate";
    a.n_active = key.first;
    a.method = key.second;
    for (const EvalRow* r : members) {
      a.fwsegsnr_db += r->fwsegsnr_db / members.size();
      a.residual_db += r->residual_db / members.size();
      a.distortion_db += r->distortion_db / members.size();
    }
    aggregates.push_back(a);
  }

  std::string csv =
      "segment,n_active,method,fwsegsnr_db,residual_noise_db,target_distortion_db\n";
  auto add_row = [&](const EvalRow& r) {
    csv += r.segment + "," + std::to_string(r.n_active) + "," + r.method + "," +
           cli_detail::fmt_db(r.fwsegsnr_db) + "," + cli_detail::fmt_db(r.residual_db) +
           "," + cli_detail::fmt_db(r.distortion_db) + "\n";
  };
  for (const EvalRow& r : rows) add_row(r);
  for (const EvalRow& r : aggregates) add_row(r);
  cli_detail::write_text(out_base + ".csv", csv);

  json out;
  out["segments"] = json::array();
  for (const EvalRow& r : rows)
    out["segments"].push_back({{"segment", r.segment},
                               {"n_active", r.n_active},
                               {"method", r.method},
                               {"fwsegsnr_db", r.fwsegsnr_db},
                               {"residual_noise_db", r.residual_db},
                               {"target_distortion_db", r.distortion_db}});
  out["aggregates"] = json::array();
  for (const EvalRow& r : aggregates)
    out["aggregates"].push_back({{"n_active", r.n_active},
                                 {"method", r.method},
                                 {"fwsegsnr_db", r.fwsegsnr_db},
                                 {"residual_noise_db", r.residual_db},
                                 {"target_distortion_db", r.distortion_db}});
  cli_detail::write_text(out_base + ".json", out.dump(2) + "\n");
}

inline std::string cmd_inspect_dict(const std::string& dict_path) {
  WeightDictionary d = load_dict(dict_path);
  std::string s;
  s += "models: " + std::to_string(d.models()) + "\n";
  s += "bins: " + std::to_string(d.bins()) + "\n";
  s += "channels: " + std::to_string(d.channels()) + "\n";
  s += "steering: " + std::to_string(d.steering_count()) + "\n";
  s += "iso index: " + std::to_string(d.iso_index()) + "\n";
  s += "weights: " + std::to_string(d.entry_count()) + " vectors\n";
  const auto& fp = d.atf_fingerprint();
  s += "atf fingerprint: " + detail::hex(fp.data(), fp.size()) + "\n";
  double az_lo = 1e9, az_hi = -1e9, in_lo = 1e9, in_hi = -1e9;
  for (const Direction& dir : d.steering_dirs()) {
    az_lo = std::min(az_lo, rad2deg(dir.azimuth));
    az_hi = std::max(az_hi, rad2deg(dir.azimuth));
    in_lo = std::min(in_lo, rad2deg(dir.inclination));
    in_hi = std::max(in_hi, rad2deg(dir.inclination));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "steering azimuth: [%.1f, %.1f] deg\nsteering inclination: [%.1f, %.1f] deg\n",
                az_lo, az_hi, in_lo, in_hi);
  s += buf;
  return s;
}

// Machine-parsable name for the error taxonomy, used on stderr.
inline const char* error_code(const Error& e) {
  if (dynamic_cast<const SingularMatrix*>(&e)) return "singular_matrix";
  if (dynamic_cast<const DimensionMismatch*>(&e)) return "dimension_mismatch";
  if (dynamic_cast<const SignalTooShort*>(&e)) return "signal_too_short";
  if (dynamic_cast<const ConfigMismatch*>(&e)) return "config_mismatch";
  if (dynamic_cast<const InvalidGrid*>(&e)) return "invalid_grid";
  if (dynamic_cast<const InvalidGeometry*>(&e)) return "invalid_geometry";
  if (dynamic_cast<const RefChannelOutOfRange*>(&e)) return "ref_channel_out_of_range";
  if (dynamic_cast<const ZeroReference*>(&e)) return "zero_reference";
  if (dynamic_cast<const FormatError*>(&e)) return "format_error";
  if (dynamic_cast<const VersionMismatch*>(&e)) return "version_mismatch";
  if (dynamic_cast<const NotHermitian*>(&e)) return "not_hermitian";
  if (dynamic_cast<const BadLength*>(&e)) return "bad_length";
  if (dynamic_cast<const TooFewPoints*>(&e)) return "too_few_points";
  if (dynamic_cast<const InsufficientTraining*>(&e)) return "insufficient_training";
  if (dynamic_cast<const EmptyInput*>(&e)) return "empty_input";
  if (dynamic_cast<const EmptyGrid*>(&e)) return "empty_grid";
  if (dynamic_cast<const InvalidKappa*>(&e)) return "invalid_kappa";
  if (dynamic_cast<const ZeroSteering*>(&e)) return "zero_steering";
  if (dynamic_cast<const CoverageError*>(&e)) return "coverage_error";
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const IoError*>(&e)) return "io_error";
  if (dynamic_cast<const FileError*>(&e)) return "file_error";
  if (dynamic_cast<const LengthMismatch*>(&e)) return "length_mismatch";
  if (dynamic_cast<const SilentReference*>(&e)) return "silent_reference";
  return "error";
}

}  // namespace hybeam
