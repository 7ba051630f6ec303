#pragma once

#include <vector>

#include "hybeam/common.hpp"
#include "hybeam/fft.hpp"

namespace hybeam {

// Multichannel time-domain audio; samples[q][n].
struct AudioBuffer {
  double sample_rate = 0;
  std::vector<std::vector<double>> samples;

  int channels() const { return int(samples.size()); }
  long length() const { return samples.empty() ? 0 : long(samples[0].size()); }

  void check_rectangular() const {
    for (const auto& ch : samples)
      if (long(ch.size()) != length())
        throw DimensionMismatch("AudioBuffer: channels have unequal lengths");
  }
};

enum class WindowKind { SqrtHann };

struct StftConfig {
  double sample_rate = 10000.0;
  int window_len = 160;
  int hop = 80;
  int fft_len = 160;
  WindowKind window_kind = WindowKind::SqrtHann;

  int bins() const { return fft_len / 2 + 1; }
  double bin_hz(int nu) const { return sample_rate * nu / fft_len; }
  double hop_seconds() const { return hop / sample_rate; }

  void validate() const {
    if (sample_rate <= 0 || window_len <= 0 || hop <= 0)
      throw ConfigError("StftConfig: sample_rate, window_len, hop must be positive");
    if (window_len % hop != 0) throw ConfigError("StftConfig: hop must divide window_len");
    if (fft_len < window_len) throw ConfigError("StftConfig: fft_len must be >= window_len");
  }

  bool operator==(const StftConfig&) const = default;
};

// Periodic sqrt-Hann: sin(pi n / N). Used as both analysis and synthesis
// window; the squared pair overlap-adds to exactly 1 at 50% overlap.
inline std::vector<double> make_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.window_len);
  for (int n = 0; n < cfg.window_len; ++n) w[n] = std::sin(kPi * n / cfg.window_len);
  return w;
}

// Complex TF data. Logical index (channel q, bin nu, frame l); storage is
// frame-major then bin then channel so one (l, nu) snapshot over channels is
// contiguous.
struct StftTensor {
  StftConfig config;
  int channels = 0;
  int bins = 0;
  int frames = 0;
  std::vector<cplx> data;

  StftTensor() = default;
  StftTensor(const StftConfig& cfg, int q, int l)
      : config(cfg), channels(q), bins(cfg.bins()), frames(l),
        data(size_t(q) * cfg.bins() * l, cplx(0, 0)) {}

  size_t index(int q, int nu, int l) const {
    return (size_t(l) * bins + nu) * channels + q;
  }
  cplx at(int q, int nu, int l) const { return data[index(q, nu, l)]; }
  cplx& at(int q, int nu, int l) { return data[index(q, nu, l)]; }

  // Pointer to the channel snapshot y(nu, l); channels contiguous.
  const cplx* snapshot(int nu, int l) const { return &data[index(0, nu, l)]; }
  cplx* snapshot(int nu, int l) { return &data[index(0, nu, l)]; }
};

inline int stft_frame_count(long length, const StftConfig& cfg) {
  if (length < cfg.window_len) throw SignalTooShort("stft: signal shorter than one window");
  return int((length - cfg.window_len) / cfg.hop) + 1;
}

inline StftTensor analyze(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  audio.check_rectangular();
  const int L = stft_frame_count(audio.length(), cfg);
  const int F = cfg.bins();
  StftTensor out(cfg, audio.channels(), L);
  const std::vector<double> win = make_window(cfg);
  Fft fft(cfg.fft_len);
  std::vector<cplx> buf(cfg.fft_len), spec(cfg.fft_len);
  for (int q = 0; q < audio.channels(); ++q) {
    const std::vector<double>& x = audio.samples[q];
    for (int l = 0; l < L; ++l) {
      const long off = long(l) * cfg.hop;
      for (int n = 0; n < cfg.window_len; ++n) buf[n] = cplx(win[n] * x[off + n], 0);
      for (int n = cfg.window_len; n < cfg.fft_len; ++n) buf[n] = cplx(0, 0);
      fft.forward(buf.data(), spec.data());
      for (int nu = 0; nu < F; ++nu) out.at(q, nu, l) = spec[nu];
      // Real input: DC and Nyquist are real; pin the imaginary part to zero.
      out.at(q, 0, l) = cplx(spec[0].real(), 0);
      if (cfg.fft_len % 2 == 0) out.at(q, F - 1, l) = cplx(spec[F - 1].real(), 0);
    }
  }
  return out;
}

// Weighted overlap-add inverse. Output covers (L-1)*hop + window_len samples;
// reconstruction is exact away from the first and last half windows.
inline AudioBuffer synthesize(const StftTensor& t) {
  t.config.validate();
  if (t.config.window_len != 2 * t.config.hop)
    throw ConfigMismatch("synthesize: window pair needs 50% overlap for unit overlap-add");
  const StftConfig& cfg = t.config;
  const int F = cfg.bins();
  if (t.bins != F) throw ConfigMismatch("synthesize: tensor bin count disagrees with config");
  const long out_len = long(t.frames - 1) * cfg.hop + cfg.window_len;
  AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  out.samples.assign(t.channels, std::vector<double>(out_len, 0.0));
  const std::vector<double> win = make_window(cfg);
  Fft fft(cfg.fft_len);
  std::vector<cplx> spec(cfg.fft_len), buf(cfg.fft_len);
  for (int q = 0; q < t.channels; ++q) {
    for (int l = 0; l < t.frames; ++l) {
      for (int nu = 0; nu < F; ++nu) spec[nu] = t.at(q, nu, l);
      for (int k = F; k < cfg.fft_len; ++k) spec[k] = std::conj(spec[cfg.fft_len - k]);
      fft.inverse(spec.data(), buf.data());
      const long off = long(l) * cfg.hop;
      for (int n = 0; n < cfg.window_len; ++n)
        out.samples[q][off + n] += win[n] * buf[n].real();
    }
  }
  return out;
}

}  // namespace hybeam
