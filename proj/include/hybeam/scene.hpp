#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hybeam/array.hpp"
#include "hybeam/common.hpp"
#include "hybeam/fft.hpp"
#include "hybeam/noisemodels.hpp"
#include "hybeam/stft.hpp"
#include "hybeam/wav.hpp"

namespace hybeam {

enum class SourceKind { File, SpeechShaped, Tone, ImpulseTrain };

struct SourceSpec {
  SourceKind kind = SourceKind::SpeechShaped;
  std::string file;          // File only
  double tone_hz = 440.0;    // Tone only
  double impulse_hz = 4.0;   // ImpulseTrain only
  std::vector<Direction> doa;  // per STFT frame, last entry held
  double gain_db = 0.0;
  double onset_seconds = 0.0;  // silence before the source starts
};

// Reverberant-like stand-in: the source spectrum recirculated with an
// exponential decay and scattered over random directions. Ground truth stays
// exact because the tail is counted as noise.
struct DiffuseTail {
  double level_db = -18.0;
  double decay_seconds = 0.3;
};

struct SceneSpec {
  double duration = 6.0;
  double sample_rate = 10000.0;
  std::vector<SourceSpec> sources;
  IsotropyFunction ambient_isotropy = IsotropyFunction::iso();
  std::optional<double> ambient_level_db;
  std::optional<double> sensor_noise_db;
  std::optional<DiffuseTail> tail;
  int target_index = 0;
  uint64_t seed = 0;
  int n_active = -1;  // segment label, -1 when unlabeled
  std::string id;

  void validate() const {
    if (duration <= 0) throw ConfigError("SceneSpec: duration must be positive");
    if (sample_rate <= 0) throw ConfigError("SceneSpec: sample_rate must be positive");
    if (!sources.empty() && (target_index < 0 || target_index >= int(sources.size())))
      throw ConfigError("SceneSpec: target_index out of range");
    for (const SourceSpec& s : sources) {
      if (s.doa.empty()) throw ConfigError("SceneSpec: source needs at least one DOA");
      if (s.kind == SourceKind::File && s.file.empty())
        throw ConfigError("SceneSpec: file source needs a path");
      if (s.onset_seconds < 0 || s.onset_seconds >= duration)
        throw ConfigError("SceneSpec: source onset outside the scene");
    }
  }
};

struct SceneOutput {
  AudioBuffer mixed;
  AudioBuffer target_direct;
  AudioBuffer gt_noise;               // mixed - target_direct, exact
  std::vector<Direction> doa_track;   // target DOA per frame
  std::vector<char> target_active;    // per frame, onset-derived
};

namespace detail {

// RBJ biquad, direct form 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  static Biquad lowpass(double fc, double fs, double q) {
    double w = 2 * kPi * fc / fs, cw = std::cos(w), al = std::sin(w) / (2 * q);
    double a0 = 1 + al;
    return {(1 - cw) / 2 / a0, (1 - cw) / a0, (1 - cw) / 2 / a0, -2 * cw / a0,
            (1 - al) / a0};
  }
  static Biquad highpass(double fc, double fs, double q) {
    double w = 2 * kPi * fc / fs, cw = std::cos(w), al = std::sin(w) / (2 * q);
    double a0 = 1 + al;
    return {(1 + cw) / 2 / a0, -(1 + cw) / a0, (1 + cw) / 2 / a0, -2 * cw / a0,
            (1 - al) / a0};
  }
  double step(double x) {
    double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

inline void normalize_rms(std::vector<double>& x, double target) {
  double p = 0;
  for (double v : x) p += v * v;
  p = std::sqrt(p / std::max<size_t>(x.size(), 1));
  if (p > 0)
    for (double& v : x) v *= target / p;
}

// Broadband noise with a speech-like spectral tilt and a 4 Hz syllabic
// amplitude modulation; RMS 0.1 before gain.
inline std::vector<double> gen_speech_shaped(Rng& rng, long n, double fs) {
  std::vector<double> x(n);
  Biquad lp = Biquad::lowpass(500.0, fs, 0.707);
  Biquad hp = Biquad::highpass(100.0, fs, 0.707);
  for (long i = 0; i < n; ++i) x[i] = hp.step(lp.step(rng.gaussian()));
  for (long i = 0; i < n; ++i)
    x[i] *= 0.55 + 0.45 * std::sin(2 * kPi * 4.0 * i / fs);
  normalize_rms(x, 0.1);
  return x;
}

inline std::vector<double> gen_tone(long n, double fs, double hz) {
  std::vector<double> x(n);
  const double amp = 0.1 * std::sqrt(2.0);
  for (long i = 0; i < n; ++i) x[i] = amp * std::sin(2 * kPi * hz * i / fs);
  return x;
}

inline std::vector<double> gen_impulse_train(long n, double fs, double hz) {
  std::vector<double> x(n, 0.0);
  long period = std::max<long>(1, std::lround(fs / hz));
  double amp = 0.1 * std::sqrt(double(period));
  for (long i = 0; i < n; i += period) x[i] = amp;
  return x;
}

inline std::vector<double> load_file_source(const std::string& path, long n, double fs) {
  AudioBuffer a = read_wav(path);
  if (a.sample_rate != fs)
    throw ConfigMismatch("scene: source '" + path + "' is at " +
                         std::to_string(int(a.sample_rate)) + " Hz, scene wants " +
                         std::to_string(int(fs)) + " Hz; resampling is not supported");
  if (a.length() == 0) throw FormatError("scene: source '" + path + "' is empty");
  std::vector<double> x(n);
  const std::vector<double>& src = a.samples[0];
  for (long i = 0; i < n; ++i) x[i] = src[i % src.size()];  // tile short files
  return x;
}

inline std::vector<double> render_source_signal(const SourceSpec& src, long n, double fs,
                                                Rng& rng) {
  std::vector<double> x;
  switch (src.kind) {
    case SourceKind::SpeechShaped: x = gen_speech_shaped(rng, n, fs); break;
    case SourceKind::Tone: x = gen_tone(n, fs, src.tone_hz); break;
    case SourceKind::ImpulseTrain: x = gen_impulse_train(n, fs, src.impulse_hz); break;
    case SourceKind::File: x = load_file_source(src.file, n, fs); break;
  }
  const double amp = std::pow(10.0, src.gain_db / 20.0);
  const long onset = std::lround(src.onset_seconds * fs);
  for (long i = 0; i < n; ++i) x[i] = i < onset ? 0.0 : x[i] * amp;
  return x;
}

// One period of the band-limited impulse response of a grid direction's ATF,
// rotated so the kernel bulk sits at fft_len/2. The common half-window delay
// cancels in every relative transfer function. Layout [channel][fft_len].
inline std::vector<std::vector<double>> atf_impulse(const AtfSet& atfs, int d,
                                                    const StftConfig& cfg) {
  const int N = cfg.fft_len;
  const int F = cfg.bins();
  const int Q = atfs.channels();
  Fft fft(N);
  std::vector<std::vector<double>> ir(Q, std::vector<double>(N));
  std::vector<cplx> spec(N), time(N);
  const std::complex<float>* hrow = atfs.raw() + size_t(d) * F * Q;
  for (int q = 0; q < Q; ++q) {
    std::fill(spec.begin(), spec.end(), cplx(0, 0));
    for (int nu = 0; nu < F; ++nu) {
      const cplx v = cplx(hrow[size_t(nu) * Q + q]);
      spec[nu] = v;
      if (nu > 0 && nu < N - nu) spec[N - nu] = std::conj(v);
    }
    fft.inverse(spec.data(), time.data());
    // Taking the real part projects the band edges onto what a real signal
    // can carry; interior bins are untouched by construction.
    for (int i = 0; i < N; ++i) ir[q][(i + N / 2) % N] = std::real(time[i]);
  }
  return ir;
}

// Adds x[a..b) convolved with each channel kernel into dst[q] at offset a.
// dst channels must extend at least fft_len-1 samples past b.
inline void conv_add_multi(std::vector<std::vector<double>>& dst,
                           const std::vector<double>& x, long a, long b,
                           const std::vector<std::vector<double>>& ir) {
  const long m = b - a;
  if (m <= 0) return;
  const int N = int(ir[0].size());
  long M = 1;
  while (M < m + N) M <<= 1;
  Fft fft{int(M)};
  std::vector<cplx> buf(M), xf(M), yf(M);
  for (long i = 0; i < m; ++i) buf[i] = cplx(x[a + i], 0);
  fft.forward(buf.data(), xf.data());
  for (size_t q = 0; q < dst.size(); ++q) {
    std::fill(buf.begin(), buf.end(), cplx(0, 0));
    for (int k = 0; k < N; ++k) buf[k] = cplx(ir[q][k], 0);
    fft.forward(buf.data(), yf.data());
    for (long i = 0; i < M; ++i) yf[i] *= xf[i];
    fft.inverse(yf.data(), buf.data());
    const long lim = std::min<long>(m + N - 1, long(dst[q].size()) - a);
    for (long i = 0; i < lim; ++i) dst[q][a + i] += std::real(buf[i]);
  }
}

// Memoized nearest-grid-direction lookup with a coverage guard.
struct DirPicker {
  const AtfSet& atfs;
  double tol;
  Direction last{1e9, 1e9};
  int last_idx = -1;

  explicit DirPicker(const AtfSet& a)
      : atfs(a),
        tol(1.5 * deg2rad(std::max(a.grid().az_step_deg, a.grid().incl_step_deg))) {}

  int pick(const Direction& want) {
    if (last_idx >= 0 && want.azimuth == last.azimuth &&
        want.inclination == last.inclination)
      return last_idx;
    int d = nearest_direction(atfs, want);
    if (angular_distance(atfs.directions()[d], want) > tol)
      throw CoverageError("scene: DOA az " + std::to_string(rad2deg(want.azimuth)) +
                          " incl " + std::to_string(rad2deg(want.inclination)) +
                          " deg is outside the ATF grid coverage");
    last = want;
    last_idx = d;
    return d;
  }
};

}  // namespace detail

inline SceneOutput render_scene(const SceneSpec& spec, const AtfSet& atfs,
                                const StftConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (cfg.sample_rate != atfs.sample_rate() || cfg.bins() != atfs.bins())
    throw ConfigMismatch("render_scene: STFT config does not match the ATF set");
  if (spec.sample_rate != cfg.sample_rate)
    throw ConfigMismatch("render_scene: scene and STFT sample rates differ");

  const double fs = cfg.sample_rate;
  const long n = std::lround(spec.duration * fs);
  if (n < cfg.window_len)
    throw ConfigError("render_scene: scene shorter than one STFT window");
  const int L = stft_frame_count(n, cfg);
  const int Q = atfs.channels();
  const int F = cfg.bins();

  StftTensor noise_spec(cfg, Q, L);
  detail::DirPicker picker(atfs);

  // Point sources run through time-domain linear convolution with the grid
  // ATF impulse response; multiplying frame spectra instead would leave
  // circular wrap that no physical array exhibits.
  std::vector<std::vector<double>> tgt_time(Q, std::vector<double>(n + cfg.fft_len, 0.0));
  std::vector<std::vector<double>> noi_time(Q, std::vector<double>(n + cfg.fft_len, 0.0));

  for (size_t j = 0; j < spec.sources.size(); ++j) {
    const SourceSpec& src = spec.sources[j];
    Rng rng(derive_seed(spec.seed, "source", j));
    const std::vector<double> mono = detail::render_source_signal(src, n, fs, rng);
    auto& dst = int(j) == spec.target_index ? tgt_time : noi_time;

    // Leading/trailing silence stays bit-exact zero when it never enters the
    // block transforms.
    long first_nz = 0;
    while (first_nz < n && mono[first_nz] == 0.0) ++first_nz;
    long last_nz = n;
    while (last_nz > first_nz && mono[last_nz - 1] == 0.0) --last_nz;

    int l = 0;
    while (l < L) {
      const int d = picker.pick(src.doa[std::min(size_t(l), src.doa.size() - 1)]);
      int l2 = l + 1;
      while (l2 < L &&
             picker.pick(src.doa[std::min(size_t(l2), src.doa.size() - 1)]) == d)
        ++l2;
      const long a = std::max(long(l) * cfg.hop, first_nz);
      const long b = std::min(l2 == L ? n : long(l2) * cfg.hop, last_nz);
      detail::conv_add_multi(dst, mono, a, b, detail::atf_impulse(atfs, d, cfg));
      l = l2;
    }

    if (spec.tail) {
      // Recirculate the source spectrum with exponential decay, scattered
      // over random directions per bin and frame.
      AudioBuffer mb;
      mb.sample_rate = fs;
      mb.samples.push_back(mono);
      StftTensor s = analyze(mb, cfg);
      Rng trng(derive_seed(spec.seed, "tail", j));
      const double g = std::pow(10.0, spec.tail->level_db / 20.0) *
                       std::pow(10.0, src.gain_db / 20.0);
      const double decay = std::exp(-cfg.hop_seconds() / std::max(spec.tail->decay_seconds, 1e-3));
      std::vector<cplx> state(F, cplx(0, 0));
      for (int l2 = 0; l2 < L; ++l2) {
        for (int nu = 0; nu < F; ++nu) {
          const int d = int(trng.below(uint64_t(atfs.count())));
          const cplx a = g * state[nu] * trng.cgaussian();
          const std::complex<float>* h = atfs.raw() + (size_t(d) * F + nu) * Q;
          cplx* y = &noise_spec.data[(size_t(l2) * F + nu) * Q];
          for (int q = 0; q < Q; ++q) y[q] += a * cplx(h[q]);
          state[nu] = decay * state[nu] + s.at(0, nu, l2);
        }
      }
    }
  }

  if (spec.ambient_level_db) {
    Rng rng(derive_seed(spec.seed, "ambient"));
    const double lvl = std::pow(10.0, *spec.ambient_level_db / 20.0);
    for (int d = 0; d < atfs.count(); ++d) {
      const double w =
          atfs.quad_weight(d) * spec.ambient_isotropy.eval(atfs.directions()[d]);
      if (w <= 0) continue;
      const double g = lvl * std::sqrt(w);
      const std::complex<float>* hrow = atfs.raw() + size_t(d) * F * Q;
      for (int l = 0; l < L; ++l) {
        cplx* y = &noise_spec.data[size_t(l) * F * Q];
        for (int nu = 0; nu < F; ++nu) {
          // DC and Nyquist carry real coefficients in a real signal's STFT.
          cplx a = (nu == 0 || nu == F - 1) ? cplx(rng.gaussian(), 0) : rng.cgaussian();
          a *= g;
          const std::complex<float>* h = hrow + size_t(nu) * Q;
          cplx* yy = y + size_t(nu) * Q;
          for (int q = 0; q < Q; ++q) yy[q] += a * cplx(h[q]);
        }
      }
    }
  }

  SceneOutput out;
  out.gt_noise = synthesize(noise_spec);
  for (auto& ch : out.gt_noise.samples) ch.resize(n, 0.0);
  out.target_direct.sample_rate = fs;
  out.target_direct.samples.assign(Q, {});
  for (int q = 0; q < Q; ++q) {
    tgt_time[q].resize(n);
    out.target_direct.samples[q] = std::move(tgt_time[q]);
    for (long i = 0; i < n; ++i) out.gt_noise.samples[q][i] += noi_time[q][i];
  }

  if (spec.sensor_noise_db) {
    Rng rng(derive_seed(spec.seed, "sensor"));
    const double sd = std::pow(10.0, *spec.sensor_noise_db / 20.0);
    for (auto& ch : out.gt_noise.samples)
      for (double& v : ch) v += sd * rng.gaussian();
  }

  out.mixed.sample_rate = fs;
  out.mixed.samples.assign(Q, std::vector<double>(n));
  for (int q = 0; q < Q; ++q)
    for (long i = 0; i < n; ++i)
      out.mixed.samples[q][i] = out.target_direct.samples[q][i] + out.gt_noise.samples[q][i];

  out.doa_track.reserve(L);
  out.target_active.reserve(L);
  const bool has_target = !spec.sources.empty();
  const SourceSpec* tgt = has_target ? &spec.sources[spec.target_index] : nullptr;
  // The convolution kernel adds half a window of bulk delay.
  const long onset =
      has_target ? std::lround(tgt->onset_seconds * fs) + cfg.fft_len / 2 : 0;
  for (int l = 0; l < L; ++l) {
    out.doa_track.push_back(has_target
                                ? tgt->doa[std::min(size_t(l), tgt->doa.size() - 1)]
                                : Direction::from_degrees(0, 90));
    const long center = long(l) * cfg.hop + cfg.window_len / 2;
    out.target_active.push_back(has_target && center >= onset ? 1 : 0);
  }
  return out;
}

struct SegmentConstraints {
  int count = 20;
  int n_active = 1;  // sources per segment, target included
  double segment_seconds = 6.0;
  double onset_seconds = 2.0;
  uint64_t seed = 0;
};

// Emits fixed-length segment specs from a talker pool: the target onsets
// mid-segment, interferers run throughout, DOAs drawn per segment. Returns
// empty when the pool cannot supply n_active distinct talkers.
inline std::vector<SceneSpec> segment_scenes(const std::vector<SourceSpec>& pool,
                                             const SceneSpec& prototype,
                                             const SegmentConstraints& c) {
  if (pool.empty()) throw EmptyInput("segment_scenes: empty source pool");
  std::vector<SceneSpec> out;
  if (c.n_active < 1 || int(pool.size()) < c.n_active) return out;
  for (int k = 0; k < c.count; ++k) {
    Rng rng(derive_seed(c.seed, "segment", uint64_t(k)));
    SceneSpec s = prototype;
    s.duration = c.segment_seconds;
    s.sources.clear();
    s.seed = derive_seed(c.seed, "scene", uint64_t(k));
    s.n_active = c.n_active;
    s.id = "seg" + std::to_string(k) + "_ns" + std::to_string(c.n_active);

    SourceSpec tgt = pool[k % pool.size()];
    tgt.onset_seconds = c.onset_seconds;
    const double tgt_az = rng.uniform(-80.0, 80.0);
    tgt.doa = {Direction::from_degrees(tgt_az, 90)};
    s.sources.push_back(tgt);
    s.target_index = 0;

    for (int j = 1; j < c.n_active; ++j) {
      SourceSpec itf = pool[(k + j) % pool.size()];
      itf.onset_seconds = 0;
      double az = 0;
      for (int tries = 0; tries < 64; ++tries) {
        az = rng.uniform(-180.0, 180.0);
        if (std::abs(wrap_angle(deg2rad(az - tgt_az))) >= deg2rad(20)) break;
      }
      itf.doa = {Direction::from_degrees(az, 90)};
      s.sources.push_back(itf);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hybeam
