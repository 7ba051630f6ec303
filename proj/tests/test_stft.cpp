#include <catch2/catch_amalgamated.hpp>

#include "hybeam/stft.hpp"

using hybeam::AudioBuffer;
using hybeam::cplx;
using hybeam::Rng;
using hybeam::StftConfig;
using hybeam::StftTensor;

namespace {

std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
  const int n = int(x.size());
  std::vector<cplx> y(n, cplx(0, 0));
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m)
      y[k] += x[m] * std::polar(1.0, -2.0 * hybeam::kPi * k * m / n);
  return y;
}

AudioBuffer noise_buffer(Rng& rng, int channels, long len, double rate) {
  AudioBuffer b;
  b.sample_rate = rate;
  b.samples.assign(channels, std::vector<double>(len));
  for (auto& ch : b.samples)
    for (double& s : ch) s = rng.gaussian();
  return b;
}

// Geometric-sum DFT of the sqrt-Hann window, valid for any integer shift m.
cplx window_dft(int N, int m) {
  auto S = [&](double a) {
    cplx num = 1.0 - std::polar(1.0, 2.0 * hybeam::kPi * a);
    cplx den = 1.0 - std::polar(1.0, 2.0 * hybeam::kPi * a / N);
    return num / den;
  };
  return (S(0.5 - m) - S(-0.5 - m)) / cplx(0, 2);
}

}  // namespace

TEST_CASE("fft matches a direct DFT", "[stft]") {
  Rng rng(hybeam::derive_seed(21, "fft"));
  for (int n : {1, 2, 3, 4, 5, 7, 8, 11, 12, 15, 20, 49, 160}) {
    hybeam::Fft fft(n);
    std::vector<cplx> x(n);
    for (cplx& v : x) v = rng.cgaussian();
    std::vector<cplx> got = fft.forward(x);
    std::vector<cplx> want = naive_dft(x);
    for (int k = 0; k < n; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-10 * n);
    std::vector<cplx> back = fft.inverse(got);
    for (int k = 0; k < n; ++k) CHECK(std::abs(back[k] - x[k]) < 1e-12 * n);
  }
}

TEST_CASE("analyze frame count and bin count", "[stft]") {
  StftConfig cfg;  // 10 kHz, 160/80, fft 160
  CHECK(cfg.bins() == 81);
  Rng rng(hybeam::derive_seed(21, "frames"));
  AudioBuffer b = noise_buffer(rng, 1, 1000, cfg.sample_rate);
  StftTensor t = hybeam::analyze(b, cfg);
  CHECK(t.frames == (1000 - 160) / 80 + 1);
  CHECK(t.bins == 81);
  CHECK(t.channels == 1);

  AudioBuffer tiny = noise_buffer(rng, 1, 159, cfg.sample_rate);
  CHECK_THROWS_AS(hybeam::analyze(tiny, cfg), hybeam::SignalTooShort);
}

TEST_CASE("analyze of silence is the zero tensor", "[stft]") {
  StftConfig cfg;
  AudioBuffer b;
  b.sample_rate = cfg.sample_rate;
  b.samples.assign(2, std::vector<double>(500, 0.0));
  StftTensor t = hybeam::analyze(b, cfg);
  for (const cplx& v : t.data) CHECK(v == cplx(0, 0));
}

TEST_CASE("analyze is linear and pins DC/Nyquist to real", "[stft]") {
  StftConfig cfg;
  Rng rng(hybeam::derive_seed(21, "linear"));
  AudioBuffer a = noise_buffer(rng, 2, 800, cfg.sample_rate);
  AudioBuffer b = noise_buffer(rng, 2, 800, cfg.sample_rate);
  AudioBuffer sum = a;
  for (int q = 0; q < 2; ++q)
    for (int n = 0; n < 800; ++n) sum.samples[q][n] += b.samples[q][n];
  StftTensor ta = hybeam::analyze(a, cfg);
  StftTensor tb = hybeam::analyze(b, cfg);
  StftTensor ts = hybeam::analyze(sum, cfg);
  for (size_t i = 0; i < ts.data.size(); ++i)
    CHECK(std::abs(ts.data[i] - (ta.data[i] + tb.data[i])) < 1e-10);
  for (int q = 0; q < ta.channels; ++q)
    for (int l = 0; l < ta.frames; ++l) {
      CHECK(ta.at(q, 0, l).imag() == 0.0);
      CHECK(ta.at(q, ta.bins - 1, l).imag() == 0.0);
    }
}

TEST_CASE("bin-center sinusoid matches the window-DFT prediction", "[stft]") {
  StftConfig cfg;
  const int N = cfg.fft_len;
  const int k0 = 20;  // 1250 Hz
  AudioBuffer b;
  b.sample_rate = cfg.sample_rate;
  b.samples.assign(1, std::vector<double>(1200));
  for (int n = 0; n < 1200; ++n)
    b.samples[0][n] = std::cos(2.0 * hybeam::kPi * k0 * n / N);
  StftTensor t = hybeam::analyze(b, cfg);
  for (int l = 0; l < t.frames; ++l) {
    const double phi = 2.0 * hybeam::kPi * k0 * l * cfg.hop / N;
    for (int nu = 0; nu < t.bins; ++nu) {
      cplx want = 0.5 * std::polar(1.0, phi) * window_dft(N, nu - k0) +
                  0.5 * std::polar(1.0, -phi) * window_dft(N, nu + k0);
      CHECK(std::abs(t.at(0, nu, l) - want) < 1e-9 * N);
    }
    for (int nu = 0; nu < t.bins; ++nu)
      if (nu != k0) CHECK(std::abs(t.at(0, nu, l)) < std::abs(t.at(0, k0, l)));
  }
}

TEST_CASE("windowed-frame energy matches spectral energy", "[stft]") {
  StftConfig cfg;
  Rng rng(hybeam::derive_seed(21, "parseval"));
  AudioBuffer b = noise_buffer(rng, 1, 640, cfg.sample_rate);
  StftTensor t = hybeam::analyze(b, cfg);
  std::vector<double> win = hybeam::make_window(cfg);
  for (int l = 0; l < t.frames; ++l) {
    double time_e = 0;
    for (int n = 0; n < cfg.window_len; ++n) {
      double v = win[n] * b.samples[0][l * cfg.hop + n];
      time_e += v * v;
    }
    double spec_e = std::norm(t.at(0, 0, l)) + std::norm(t.at(0, t.bins - 1, l));
    for (int nu = 1; nu < t.bins - 1; ++nu) spec_e += 2.0 * std::norm(t.at(0, nu, l));
    spec_e /= cfg.fft_len;
    CHECK(spec_e == Catch::Approx(time_e).epsilon(1e-9));
  }
}

TEST_CASE("round trip reconstructs the interior", "[stft]") {
  StftConfig cfg;
  Rng rng(hybeam::derive_seed(21, "roundtrip"));
  AudioBuffer b = noise_buffer(rng, 2, 10000, cfg.sample_rate);
  StftTensor t = hybeam::analyze(b, cfg);
  AudioBuffer r = hybeam::synthesize(t);
  CHECK(r.length() == long(t.frames - 1) * cfg.hop + cfg.window_len);
  for (int q = 0; q < 2; ++q) {
    double err = 0, ref = 0;
    for (long n = cfg.hop; n < r.length() - cfg.hop; ++n) {
      err += (r.samples[q][n] - b.samples[q][n]) * (r.samples[q][n] - b.samples[q][n]);
      ref += b.samples[q][n] * b.samples[q][n];
    }
    CHECK(std::sqrt(err) <= 1e-10 * std::sqrt(ref));
  }
}

TEST_CASE("impulse train survives the round trip", "[stft]") {
  StftConfig cfg;
  AudioBuffer b;
  b.sample_rate = cfg.sample_rate;
  b.samples.assign(1, std::vector<double>(2000, 0.0));
  for (long off : {200L, 481L, 777L, 1500L}) b.samples[0][off] = 1.0;
  StftTensor t = hybeam::analyze(b, cfg);
  AudioBuffer r = hybeam::synthesize(t);
  for (long off : {200L, 481L, 777L, 1500L})
    CHECK(r.samples[0][off] == Catch::Approx(1.0).margin(1e-10));
  for (long n = cfg.hop; n < r.length() - cfg.hop; ++n)
    CHECK(std::abs(r.samples[0][n] - b.samples[0][n]) < 1e-10);
}

TEST_CASE("synthesize rejects a non-unit overlap-add pair", "[stft]") {
  StftConfig cfg;
  cfg.hop = 40;  // 75% overlap; sqrt-Hann squared no longer sums to 1
  Rng rng(hybeam::derive_seed(21, "cola"));
  AudioBuffer b = noise_buffer(rng, 1, 500, cfg.sample_rate);
  StftTensor t = hybeam::analyze(b, cfg);
  CHECK_THROWS_AS(hybeam::synthesize(t), hybeam::ConfigMismatch);
}

TEST_CASE("zero tensor synthesizes to silence", "[stft]") {
  StftConfig cfg;
  StftTensor t(cfg, 2, 10);
  AudioBuffer r = hybeam::synthesize(t);
  for (const auto& ch : r.samples)
    for (double v : ch) CHECK(v == 0.0);
}
