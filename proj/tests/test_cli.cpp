#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hybeam/cli.hpp"

using hybeam::json;
using hybeam::parse_config;
using hybeam::RunConfig;

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// Coarse rig: 8 kHz, 9-bin STFT, 72-direction ATF grid, 3 steering looks,
// 4 models. Everything in this file has to run in seconds.
json rig_json(const std::string& out_dir) {
  json j;
  j["seed"] = 91;
  j["output_dir"] = out_dir;
  j["stft"] = {{"sample_rate", 8000}, {"window_len", 16}, {"hop", 8}, {"fft_len", 16}};
  j["array"] = {{"atf_grid",
                 {{"az_min_deg", -180},
                  {"az_step_deg", 30},
                  {"n_az", 12},
                  {"incl_min_deg", 0},
                  {"incl_step_deg", 30},
                  {"n_incl", 6}}}};
  j["dictionary"] = {{"steering",
                      {{"az_min_deg", -30},
                       {"az_step_deg", 30},
                       {"n_az", 3},
                       {"incl_min_deg", 90},
                       {"incl_step_deg", 10},
                       {"n_incl", 1}}},
                     {"aniso_az_step_deg", 180},
                     {"aniso_dynamic_ranges_db", {16}}};
  j["scenes"] = {{"pool", json::array({json{{"kind", "speech_shaped"}},
                                       json{{"kind", "speech_shaped"}}})},
                 {"segments", {{"n_active", 1}, {"count", 2}}},
                 {"segment_seconds", 1.0},
                 {"onset_seconds", 0.25},
                 {"ambient", {{"isotropy", "iso"}, {"level_db", 0.0}}},
                 {"sensor_noise_db", -40.0}};
  return j;
}

std::string fresh_dir(const std::string& leaf) {
  fs::path p = fs::temp_directory_path() / "hybeam_cli" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("config parsing: defaults and strict keys", "[cli]") {
  SECTION("empty object yields the stock setup") {
    RunConfig c = parse_config(json::parse("{}"));
    CHECK(c.stft == hybeam::StftConfig{});
    CHECK(c.atf_grid == hybeam::default_atf_grid());
    CHECK(c.steering == hybeam::default_steering_patch());
    CHECK(c.steering.count() == 217);
    CHECK(c.geometry.size() == 6);
    CHECK(c.ref_channel == 1);
    CHECK(c.dict_mode == hybeam::DictMode::Parametric);
    CHECK(c.t_seconds == 0.080);
    CHECK(c.fwsnr.bands == 25);
    CHECK_FALSE(c.kappa0.has_value());
  }

  SECTION("unknown keys are rejected with their path") {
    CHECK_THROWS_MATCHES(parse_config(json::parse(R"({"bogus": 1})")),
                         hybeam::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("bogus")));
    CHECK_THROWS_MATCHES(parse_config(json::parse(R"({"stft": {"hopp": 8}})")),
                         hybeam::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("stft.hopp")));
    CHECK_THROWS_AS(
        parse_config(json::parse(R"({"scenes": {"tail": {"decay": 1}}})")),
        hybeam::ConfigError);
  }

  SECTION("type errors name the offending key") {
    CHECK_THROWS_MATCHES(
        parse_config(json::parse(R"({"stft": {"sample_rate": "fast"}})")),
        hybeam::ConfigError,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("stft.sample_rate")));
  }

  SECTION("file mode needs a path") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"dictionary": {"mode": "file"}})")),
                    hybeam::ConfigError);
    RunConfig c =
        parse_config(json::parse(R"({"dictionary": {"mode": "file", "path": "d.bin"}})"));
    CHECK(c.dict_mode == hybeam::DictMode::File);
    CHECK(c.dict_path == "d.bin");
  }

  SECTION("scene blocks round through") {
    RunConfig c = parse_config(json::parse(R"({
      "scenes": {
        "pool": [{"kind": "tone", "tone_hz": 500, "doa": {"azimuth_deg": 30, "elevation_deg": 0}},
                 {"kind": "file", "file": "talker.wav", "gain_db": -3}],
        "segments": [{"n_active": 1, "count": 4}, {"n_active": 2, "count": 3}],
        "ambient": {"isotropy": {"kind": "aniso", "phi_peak_deg": 90, "a_db": 20}, "level_db": -6},
        "tail": {"level_db": -20, "decay_seconds": 0.25}
      }})"));
    REQUIRE(c.pool.size() == 2);
    CHECK(c.pool[0].kind == hybeam::SourceKind::Tone);
    CHECK(c.pool[0].tone_hz == 500.0);
    CHECK(c.pool[1].file == "talker.wav");
    REQUIRE(c.segment_groups.size() == 2);
    CHECK(c.segment_groups[1].n_active == 2);
    CHECK(c.segment_groups[1].count == 3);
    CHECK(c.ambient_isotropy.kind == hybeam::ModelKind::Aniso);
    REQUIRE(c.ambient_level_db.has_value());
    CHECK(*c.ambient_level_db == -6.0);
    REQUIRE(c.tail.has_value());
    CHECK(c.tail->decay_seconds == 0.25);
  }

  SECTION("bad enum values are config errors") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"dictionary": {"mode": "magic"}})")),
                    hybeam::ConfigError);
    CHECK_THROWS_AS(
        parse_config(json::parse(R"({"scenes": {"pool": [{"kind": "humming"}]}})")),
        hybeam::ConfigError);
    CHECK_THROWS_AS(
        parse_config(
            json::parse(R"({"scenes": {"ambient": {"isotropy": "brown"}}})")),
        hybeam::ConfigError);
  }
}

TEST_CASE("config parsing: model roster expansion", "[cli]") {
  RunConfig c = parse_config(json::parse("{}"));
  CHECK(hybeam::config_model_specs(c).size() == 302);

  c.include_identity = false;
  CHECK(hybeam::config_model_specs(c).size() == 301);

  c.include_identity = true;
  c.plane_wave_az_deg = {0.0, 90.0};
  CHECK(hybeam::config_model_specs(c).size() == 304);

  RunConfig small = parse_config(rig_json("unused"));
  auto specs = hybeam::config_model_specs(small);
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].kind == hybeam::ModelKind::Iso);
  CHECK(specs[1].kind == hybeam::ModelKind::Identity);
  CHECK(specs[2].kind == hybeam::ModelKind::Aniso);
}

TEST_CASE("doa track files: hold-last over sparse frames", "[cli]") {
  json sparse = json::parse(R"([
    {"frame": 0, "azimuth_deg": -10, "elevation_deg": 0},
    {"frame": 10, "azimuth_deg": 40, "elevation_deg": 0}])");
  auto track = hybeam::cli_detail::parse_doa_track(sparse, 20);
  REQUIRE(track.size() == 20);
  CHECK_THAT(hybeam::rad2deg(track[0].azimuth), Catch::Matchers::WithinAbs(-10, 1e-12));
  CHECK_THAT(hybeam::rad2deg(track[9].azimuth), Catch::Matchers::WithinAbs(-10, 1e-12));
  CHECK_THAT(hybeam::rad2deg(track[10].azimuth), Catch::Matchers::WithinAbs(40, 1e-12));
  CHECK_THAT(hybeam::rad2deg(track[19].azimuth), Catch::Matchers::WithinAbs(40, 1e-12));

  json wrapped;
  wrapped["doa_track"] = sparse;
  auto track2 = hybeam::cli_detail::parse_doa_track(wrapped, 20);
  CHECK(track2[19].azimuth == track[19].azimuth);

  CHECK_THROWS_AS(hybeam::cli_detail::parse_doa_track(json::parse("[]"), 5),
                  hybeam::ConfigError);
  CHECK_THROWS_AS(
      hybeam::cli_detail::parse_doa_track(
          json::parse(R"([{"frame": 0, "azimuth": 3}])"), 5),
      hybeam::ConfigError);
}

TEST_CASE("pipeline commands end to end on the coarse rig", "[cli]") {
  const std::string scenes_a = fresh_dir("scenes_a");
  const std::string scenes_b = fresh_dir("scenes_b");
  const std::string work = fresh_dir("work");

  RunConfig cfg = parse_config(rig_json(scenes_a));

  // simulate, twice, byte-identical manifests
  hybeam::SimulateResult sim = hybeam::cmd_simulate(cfg);
  REQUIRE(sim.scene_ids.size() == 2);
  hybeam::SimulateResult sim_b = hybeam::cmd_simulate(cfg, scenes_b);
  CHECK(slurp(sim.manifest_path) == slurp(sim_b.manifest_path));

  for (const std::string& id : sim.scene_ids) {
    for (const char* sfx : {"_mixed.wav", "_target.wav", "_gtnoise.wav", "_sidecar.json"})
      REQUIRE(fs::exists(fs::path(scenes_a) / (id + sfx)));
  }

  // sidecar sanity: per-frame track, activity flags, onset bookkeeping
  json side = json::parse(
      slurp((fs::path(scenes_a) / (sim.scene_ids[0] + "_sidecar.json")).string()));
  const int frames = side.at("frames").get<int>();
  CHECK(frames > 900);
  CHECK(side.at("doa_track").size() == size_t(frames));
  CHECK(side.at("target_active").size() == size_t(frames));
  CHECK(side.at("target_active")[0].get<int>() == 0);
  CHECK(side.at("target_active")[frames - 1].get<int>() == 1);
  double az0 = side.at("doa_track")[0].at("azimuth_deg").get<double>();
  CHECK(std::abs(az0) <= 80.0);

  // parametric build: roster is iso + identity + two anisos
  const std::string dict_path = work + "/rig_dict.bin";
  std::string summary = hybeam::cmd_build_dict(cfg, dict_path);
  CHECK(summary == "M=4 F=9 Q=6 Ψ=3");
  hybeam::WeightDictionary dict = hybeam::load_dict(dict_path);
  CHECK(dict.models() == 4);
  CHECK(dict.iso_index() == 0);
  CHECK(hybeam::fingerprint_matches(dict, hybeam::resolve_atfs(cfg)));

  // inspect is a stable text block over the loaded file
  std::string info = hybeam::cmd_inspect_dict(dict_path);
  CHECK_THAT(info, Catch::Matchers::ContainsSubstring("models: 4"));
  CHECK_THAT(info, Catch::Matchers::ContainsSubstring("bins: 9"));
  CHECK_THAT(info, Catch::Matchers::ContainsSubstring("channels: 6"));
  CHECK_THAT(info, Catch::Matchers::ContainsSubstring("steering: 3"));
  CHECK_THAT(info, Catch::Matchers::ContainsSubstring("iso index: 0"));
  CHECK(info == hybeam::cmd_inspect_dict(dict_path));

  // a one-model dictionary collapses the mix to a passthrough
  RunConfig solo = cfg;
  solo.include_identity = false;
  solo.aniso_az_step_deg = 0;
  const std::string solo_path = work + "/solo_dict.bin";
  CHECK(hybeam::cmd_build_dict(solo, solo_path) == "M=1 F=9 Q=6 Ψ=3");

  const std::string enh = fresh_dir("enh");
  for (const std::string& id : sim.scene_ids) {
    const std::string base = (fs::path(scenes_a) / id).string();
    hybeam::cmd_enhance(cfg, solo_path, base + "_mixed.wav", base + "_sidecar.json",
                        (fs::path(enh) / id).string());
  }
  for (const char* sfx : {".wav", "_iso.wav", "_hyb.wav", "_diag.json"})
    REQUIRE(fs::exists(fs::path(enh) / (sim.scene_ids[0] + sfx)));

  json diag = json::parse(
      slurp((fs::path(enh) / (sim.scene_ids[0] + "_diag.json")).string()));
  CHECK(diag.at("frames").get<int>() == frames);
  CHECK(diag.at("model_histogram").size() == 1);
  REQUIRE(diag.at("beta_hyb").size() == size_t(frames));
  for (const auto& b : diag.at("beta_hyb"))
    CHECK_THAT(b.get<double>(), Catch::Matchers::WithinAbs(0.5, 1e-6));

  {
    hybeam::AudioBuffer ss =
        hybeam::read_wav((fs::path(enh) / (sim.scene_ids[0] + ".wav")).string());
    hybeam::AudioBuffer iso =
        hybeam::read_wav((fs::path(enh) / (sim.scene_ids[0] + "_iso.wav")).string());
    REQUIRE(ss.length() == iso.length());
    double max_gap = 0;
    for (size_t i = 0; i < ss.samples[0].size(); ++i)
      max_gap = std::max(max_gap, std::abs(ss.samples[0][i] - iso.samples[0][i]));
    CHECK(max_gap < 1e-5);
  }

  // enhance input validation
  {
    RunConfig wrong = cfg;
    wrong.stft.sample_rate = 10000;
    const std::string base = (fs::path(scenes_a) / sim.scene_ids[0]).string();
    CHECK_THROWS_AS(hybeam::cmd_enhance(wrong, solo_path, base + "_mixed.wav",
                                        base + "_sidecar.json", work + "/x"),
                    hybeam::ConfigMismatch);
  }

  // evaluate: per-segment rows for iso/hyb/ssh plus one aggregate block
  auto rows = hybeam::evaluate_rows(cfg, scenes_a, enh);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK((r.method == "iso" || r.method == "hyb" || r.method == "ssh"));
    CHECK(r.n_active == 1);
    CHECK(std::isfinite(r.fwsegsnr_db));
    CHECK(std::isfinite(r.residual_db));
    CHECK(std::isfinite(r.distortion_db));
  }

  hybeam::cmd_evaluate(cfg, scenes_a, enh, work + "/report");
  std::string csv = slurp(work + "/report.csv");
  REQUIRE_THAT(csv, Catch::Matchers::StartsWith(
                        "segment,n_active,method,fwsegsnr_db,residual_noise_db,"
                        "target_distortion_db\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 6 + 3);
  CHECK_THAT(csv, Catch::Matchers::ContainsSubstring("aggregate,1,ssh,"));
  json report = json::parse(slurp(work + "/report.json"));
  CHECK(report.at("segments").size() == 6);
  CHECK(report.at("aggregates").size() == 3);

  // evaluate against a directory with missing outputs
  CHECK_THROWS_AS(hybeam::cmd_evaluate(cfg, scenes_a, work, work + "/nope"),
                  hybeam::IoError);
}

TEST_CASE("error taxonomy maps to stable codes", "[cli]") {
  CHECK(std::string("config_error") == hybeam::error_code(hybeam::ConfigError("x")));
  CHECK(std::string("singular_matrix") ==
        hybeam::error_code(hybeam::SingularMatrix("x")));
  CHECK(std::string("io_error") == hybeam::error_code(hybeam::IoError("x")));
  CHECK(std::string("coverage_error") ==
        hybeam::error_code(hybeam::CoverageError("x")));
  CHECK(std::string("version_mismatch") ==
        hybeam::error_code(hybeam::VersionMismatch("x")));
}
