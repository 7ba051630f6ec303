#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "hybeam/scene.hpp"

using hybeam::AtfSet;
using hybeam::cplx;
using hybeam::Direction;
using hybeam::GridSpec;
using hybeam::HermitianMatrix;
using hybeam::IsotropyFunction;
using hybeam::Rng;
using hybeam::SceneSpec;
using hybeam::SourceKind;
using hybeam::SourceSpec;
using hybeam::StftConfig;
using hybeam::StftTensor;

namespace {

StftConfig scene_cfg() {
  StftConfig cfg;  // 10 kHz, 160/80
  return cfg;
}

AtfSet coarse_atfs(const StftConfig& cfg) {
  return hybeam::synth_freefield_atf(hybeam::default_array_geometry(),
                                     GridSpec::full_sphere(30, 30), cfg);
}

SourceSpec tone_source(double az_deg, double hz = 700) {
  SourceSpec s;
  s.kind = SourceKind::Tone;
  s.tone_hz = hz;
  s.doa = {Direction::from_degrees(az_deg, 90)};
  return s;
}

// Least-squares scale fit then relative Frobenius distance.
double scaled_frobenius_gap(const HermitianMatrix& got, const HermitianMatrix& want) {
  double num = 0, den = 0;
  for (int i = 0; i < got.dim(); ++i)
    for (int j = 0; j < got.dim(); ++j) {
      num += (std::conj(got(i, j)) * want(i, j)).real();
      den += std::norm(want(i, j));
    }
  const double s = num / den;
  double diff = 0, ref = 0;
  for (int i = 0; i < got.dim(); ++i)
    for (int j = 0; j < got.dim(); ++j) {
      diff += std::norm(got(i, j) - s * want(i, j));
      ref += std::norm(s * want(i, j));
    }
  return std::sqrt(diff / ref);
}

HermitianMatrix sample_covariance(const StftTensor& t, int nu, int skip_frames) {
  HermitianMatrix r(t.channels);
  hybeam::ComplexVector y(t.channels);
  int used = 0;
  for (int l = skip_frames; l < t.frames; ++l) {
    for (int q = 0; q < t.channels; ++q) y[q] = t.at(q, nu, l);
    r.add_outer(y, 1.0);
    ++used;
  }
  r.scale(1.0 / used);
  return r;
}

}  // namespace

TEST_CASE("decomposition identity is sample-exact", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);
  SceneSpec spec;
  spec.duration = 2.0;
  spec.sources = {tone_source(0), tone_source(60, 1100)};
  spec.sources[1].kind = SourceKind::SpeechShaped;
  spec.ambient_level_db = -10;
  spec.sensor_noise_db = -30;
  spec.target_index = 0;
  spec.seed = 77;
  auto out = hybeam::render_scene(spec, atfs, cfg);
  REQUIRE(out.mixed.channels() == 6);
  REQUIRE(out.mixed.length() == 20000);
  for (int q = 0; q < 6; ++q)
    for (long i = 0; i < 20000; ++i)
      REQUIRE(out.mixed.samples[q][i] ==
              out.target_direct.samples[q][i] + out.gt_noise.samples[q][i]);
}

TEST_CASE("single clean plane wave leaves no ground-truth noise", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);
  SceneSpec spec;
  spec.duration = 1.0;
  spec.sources = {tone_source(30)};
  spec.seed = 5;
  auto out = hybeam::render_scene(spec, atfs, cfg);
  for (const auto& ch : out.gt_noise.samples)
    for (double v : ch) CHECK(v == 0.0);
  for (int q = 0; q < 6; ++q)
    for (long i = 0; i < out.mixed.length(); ++i)
      CHECK(out.mixed.samples[q][i] == out.target_direct.samples[q][i]);
}

TEST_CASE("broadside rendering reconstructs the dry source", "[scene]") {
  // Two sensors along x, wave from +y: zero path difference, responses are 1,
  // so each channel must reproduce the source through the analysis-synthesis
  // chain.
  StftConfig cfg = scene_cfg();
  AtfSet atfs = hybeam::synth_freefield_atf({{0.05, 0, 0}, {-0.05, 0, 0}},
                                            GridSpec::full_sphere(30, 30), cfg, 343.0, 0);
  SceneSpec spec;
  spec.duration = 1.0;
  spec.sources = {tone_source(90, 500)};
  spec.seed = 1;
  auto out = hybeam::render_scene(spec, atfs, cfg);

  Rng rng(0);
  std::vector<double> want = hybeam::detail::gen_tone(10000, cfg.sample_rate, 500);
  for (int q = 0; q < 2; ++q)
    for (long i = cfg.window_len; i < 10000 - cfg.window_len; ++i)
      CHECK(out.mixed.samples[q][i] == Catch::Approx(want[i]).margin(1e-10));
}

TEST_CASE("isotropic ambient matches the analytic diffuse covariance", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);
  SceneSpec spec;
  spec.duration = 20.0;
  spec.ambient_level_db = 0;
  spec.seed = 31;
  auto out = hybeam::render_scene(spec, atfs, cfg);
  StftTensor t = hybeam::analyze(out.mixed, cfg);

  hybeam::NcmModel iso = hybeam::isotropy_to_ncm(IsotropyFunction::iso(), atfs);
  for (int nu : {15, 40, 70}) {
    HermitianMatrix got = sample_covariance(t, nu, 4);
    CHECK(scaled_frobenius_gap(got, iso.per_bin[nu]) < 0.10);
  }
}

TEST_CASE("anisotropic ambient matches its covariance model", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);
  SceneSpec spec;
  spec.duration = 20.0;
  spec.ambient_isotropy = IsotropyFunction::aniso(hybeam::deg2rad(90), 40);
  spec.ambient_level_db = 0;
  spec.seed = 32;
  auto out = hybeam::render_scene(spec, atfs, cfg);
  StftTensor t = hybeam::analyze(out.mixed, cfg);

  hybeam::NcmModel want = hybeam::isotropy_to_ncm(spec.ambient_isotropy, atfs);
  for (int nu : {15, 40, 70}) {
    HermitianMatrix got = sample_covariance(t, nu, 4);
    CHECK(scaled_frobenius_gap(got, want.per_bin[nu]) < 0.10);
  }
}

TEST_CASE("rendering is linear in source gain", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);
  SceneSpec spec;
  spec.duration = 1.0;
  spec.sources = {tone_source(20), tone_source(-50, 900)};
  spec.ambient_level_db = -20;
  spec.seed = 9;
  auto a = hybeam::render_scene(spec, atfs, cfg);
  SceneSpec doubled = spec;
  doubled.sources[0].gain_db += 20 * std::log10(2.0);
  auto b = hybeam::render_scene(doubled, atfs, cfg);

  for (int q = 0; q < 6; ++q)
    for (long i = 0; i < a.mixed.length(); ++i) {
      CHECK(b.target_direct.samples[q][i] ==
            Catch::Approx(2 * a.target_direct.samples[q][i]).margin(1e-12));
      CHECK(b.gt_noise.samples[q][i] == a.gt_noise.samples[q][i]);
    }
}

TEST_CASE("fixed seed reproduces the render bit for bit", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);
  SceneSpec spec;
  spec.duration = 1.0;
  spec.sources = {tone_source(0)};
  spec.sources[0].kind = SourceKind::SpeechShaped;
  spec.ambient_level_db = -5;
  spec.sensor_noise_db = -25;
  spec.tail = hybeam::DiffuseTail{};
  spec.seed = 1234;
  auto a = hybeam::render_scene(spec, atfs, cfg);
  auto b = hybeam::render_scene(spec, atfs, cfg);
  CHECK(a.mixed.samples == b.mixed.samples);
  CHECK(a.target_direct.samples == b.target_direct.samples);
  CHECK(a.gt_noise.samples == b.gt_noise.samples);

  SceneSpec other = spec;
  other.seed = 1235;
  auto c = hybeam::render_scene(other, atfs, cfg);
  CHECK(c.gt_noise.samples != a.gt_noise.samples);
}

TEST_CASE("source generators", "[scene]") {
  const double fs = 10000;
  SECTION("tone has the requested frequency and level") {
    auto x = hybeam::detail::gen_tone(10000, fs, 1000);
    double p = 0;
    for (double v : x) p += v * v;
    CHECK(std::sqrt(p / x.size()) == Catch::Approx(0.1).epsilon(1e-3));
    // 1 kHz: 10 samples per cycle, sign flips every 5
    CHECK(x[0] == 0.0);
    CHECK(x[2] > 0);
    CHECK(x[7] < 0);
  }

  SECTION("impulse train spacing and level") {
    auto x = hybeam::detail::gen_impulse_train(10000, fs, 4);
    long hits = 0;
    for (long i = 0; i < 10000; ++i) {
      if (x[i] != 0) {
        CHECK(i % 2500 == 0);
        ++hits;
      }
    }
    CHECK(hits == 4);
    double p = 0;
    for (double v : x) p += v * v;
    CHECK(std::sqrt(p / x.size()) == Catch::Approx(0.1).epsilon(1e-6));
  }

  SECTION("speech-shaped noise concentrates energy at low frequency") {
    Rng rng(hybeam::derive_seed(71, "ssn"));
    auto x = hybeam::detail::gen_speech_shaped(rng, 40000, fs);
    double p = 0;
    for (double v : x) p += v * v;
    CHECK(std::sqrt(p / x.size()) == Catch::Approx(0.1).epsilon(1e-9));

    StftConfig cfg = scene_cfg();
    hybeam::AudioBuffer a;
    a.sample_rate = fs;
    a.samples = {x};
    StftTensor t = hybeam::analyze(a, cfg);
    double low = 0, high = 0;  // 250-750 Hz vs 3-4 kHz
    for (int l = 0; l < t.frames; ++l) {
      for (int nu = 4; nu <= 12; ++nu) low += std::norm(t.at(0, nu, l));
      for (int nu = 48; nu <= 64; ++nu) high += std::norm(t.at(0, nu, l));
    }
    CHECK(low > 20 * high);
  }

  SECTION("syllabic modulation is visible in the envelope") {
    Rng rng(hybeam::derive_seed(71, "am"));
    auto x = hybeam::detail::gen_speech_shaped(rng, 40000, fs);
    // 4 Hz: envelope peak near sin=+1 vs trough near sin=-1, 125 ms apart
    auto band_power = [&](long center) {
      double p = 0;
      for (long i = center - 200; i < center + 200; ++i) p += x[i] * x[i];
      return p;
    };
    double peaks = 0, troughs = 0;
    for (long c = 625; c + 2700 < 40000; c += 2500) {
      peaks += band_power(c);        // sin(2pi*4*t)=1 at t=1/16 s
      troughs += band_power(c + 1250);
    }
    CHECK(peaks > 4 * troughs);
  }
}

TEST_CASE("file sources are tiled and rate-checked", "[scene]") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "hybeam_scene_test";
  fs::create_directories(dir);
  hybeam::AudioBuffer src;
  src.sample_rate = 10000;
  src.samples = {{0.25, -0.25, 0.5}};
  auto p = (dir / "short.wav").string();
  hybeam::write_wav(src, p);

  auto x = hybeam::detail::load_file_source(p, 7, 10000);
  std::vector<double> want = {0.25, -0.25, 0.5, 0.25, -0.25, 0.5, 0.25};
  CHECK(x == want);

  CHECK_THROWS_AS(hybeam::detail::load_file_source(p, 7, 16000), hybeam::ConfigMismatch);
  CHECK_THROWS_AS(hybeam::detail::load_file_source((dir / "nope.wav").string(), 7, 10000),
                  hybeam::FileError);
}

TEST_CASE("scene validation and coverage", "[scene]") {
  StftConfig cfg = scene_cfg();
  AtfSet atfs = coarse_atfs(cfg);

  SECTION("bad target index") {
    SceneSpec spec;
    spec.sources = {tone_source(0)};
    spec.target_index = 3;
    CHECK_THROWS_AS(hybeam::render_scene(spec, atfs, cfg), hybeam::ConfigError);
  }

  SECTION("DOA outside a partial grid") {
    GridSpec patch;
    patch.az_min_deg = -30;
    patch.az_step_deg = 10;
    patch.n_az = 7;
    patch.incl_min_deg = 90;
    patch.incl_step_deg = 10;
    patch.n_incl = 1;
    AtfSet partial = hybeam::synth_freefield_atf(hybeam::default_array_geometry(),
                                                 patch, cfg);
    SceneSpec spec;
    spec.sources = {tone_source(150)};
    spec.duration = 0.5;
    CHECK_THROWS_AS(hybeam::render_scene(spec, partial, cfg), hybeam::CoverageError);
  }

  SECTION("rate mismatch with the ATF set") {
    StftConfig other = cfg;
    other.sample_rate = 16000;
    SceneSpec spec;
    spec.sources = {tone_source(0)};
    spec.sample_rate = 16000;
    CHECK_THROWS_AS(hybeam::render_scene(spec, atfs, other), hybeam::ConfigMismatch);
  }

  SECTION("target activity follows the onset") {
    SceneSpec spec;
    spec.duration = 1.0;
    spec.sources = {tone_source(0)};
    spec.sources[0].onset_seconds = 0.5;
    spec.seed = 2;
    auto out = hybeam::render_scene(spec, atfs, cfg);
    REQUIRE(out.target_active.size() == out.doa_track.size());
    CHECK(out.target_active.front() == 0);
    CHECK(out.target_active.back() == 1);
    // samples before the onset are silent in the direct path
    for (int q = 0; q < 6; ++q)
      for (long i = 0; i < 4800; ++i) CHECK(out.target_direct.samples[q][i] == 0.0);
  }
}

TEST_CASE("segment pools", "[scene]") {
  SceneSpec proto;
  proto.ambient_level_db = -15;
  proto.sensor_noise_db = -40;

  std::vector<SourceSpec> pool = {tone_source(0), tone_source(0, 900)};
  pool[0].kind = SourceKind::SpeechShaped;

  hybeam::SegmentConstraints c;
  c.count = 8;
  c.n_active = 2;
  c.seed = 99;
  auto segs = hybeam::segment_scenes(pool, proto, c);
  REQUIRE(segs.size() == 8);
  for (const auto& s : segs) {
    CHECK(s.duration == 6.0);
    CHECK(s.n_active == 2);
    REQUIRE(s.sources.size() == 2);
    CHECK(s.sources[0].onset_seconds == 2.0);
    CHECK(s.sources[1].onset_seconds == 0.0);
    CHECK(s.target_index == 0);
    CHECK(s.ambient_level_db == proto.ambient_level_db);
    double t_az = s.sources[0].doa[0].azimuth;
    CHECK(std::abs(hybeam::rad2deg(t_az)) <= 80.0);
    double sep = std::abs(hybeam::wrap_angle(s.sources[1].doa[0].azimuth - t_az));
    CHECK(hybeam::rad2deg(sep) >= 20.0);
  }
  CHECK(segs[0].seed != segs[1].seed);
  CHECK(segs[0].id != segs[1].id);

  SECTION("pool too small for the requested density") {
    c.n_active = 3;
    CHECK(hybeam::segment_scenes(pool, proto, c).empty());
  }
  SECTION("single-talker pool labels everything N_s=1") {
    c.n_active = 1;
    auto one = hybeam::segment_scenes({pool[0]}, proto, c);
    REQUIRE(one.size() == 8);
    for (const auto& s : one) {
      CHECK(s.n_active == 1);
      CHECK(s.sources.size() == 1);
    }
  }
  SECTION("empty pool is a caller error") {
    CHECK_THROWS_AS(hybeam::segment_scenes({}, proto, c), hybeam::EmptyInput);
  }
  SECTION("same constraints reproduce the same specs") {
    auto again = hybeam::segment_scenes(pool, proto, c);
    REQUIRE(again.size() == segs.size());
    for (size_t i = 0; i < segs.size(); ++i) {
      CHECK(again[i].seed == segs[i].seed);
      CHECK(again[i].sources[0].doa[0].azimuth == segs[i].sources[0].doa[0].azimuth);
    }
  }
}
