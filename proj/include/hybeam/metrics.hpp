#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hybeam/common.hpp"
#include "hybeam/fft.hpp"

namespace hybeam {

struct FwSegSnrConfig {
  int bands = 25;
  double frame_seconds = 0.016;
  double hop_seconds = 0.008;
  double clamp_lo_db = -10.0;
  double clamp_hi_db = 35.0;
  double weight_exp = 0.2;
  double activity_floor_db = 40.0;  // frames above peak - floor count
};

namespace detail {

inline double mel_of(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double hz_of(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters with edges equally spaced on the mel scale, 0..Nyquist.
inline std::vector<std::vector<double>> mel_filterbank(int bands, int bins, double fs,
                                                       int fft_len) {
  std::vector<double> edges(bands + 2);
  const double top = mel_of(fs / 2);
  for (int i = 0; i < bands + 2; ++i) edges[i] = hz_of(top * i / (bands + 1));
  std::vector<std::vector<double>> fb(bands, std::vector<double>(bins, 0.0));
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int nu = 0; nu < bins; ++nu) {
      const double f = fs * nu / fft_len;
      if (f <= lo || f >= hi) continue;
      fb[b][nu] = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return fb;
}

struct MetricFraming {
  int frame_len;
  int hop;
  int frames;
};

inline MetricFraming metric_framing(size_t n, double fs, double frame_s, double hop_s) {
  MetricFraming f;
  f.frame_len = int(std::lround(frame_s * fs));
  f.hop = int(std::lround(hop_s * fs));
  if (f.frame_len < 2 || f.hop < 1)
    throw ConfigError("metrics: degenerate frame layout");
  if (long(n) < f.frame_len)
    throw SignalTooShort("metrics: signal shorter than one analysis frame");
  f.frames = int((long(n) - f.frame_len) / f.hop) + 1;
  return f;
}

}  // namespace detail

// Frequency-weighted segmental SNR on mel bands of the complex difference
// spectrum. Identical signals sit exactly at the upper clamp; equal-power
// additive noise lands near 0 dB.
inline double fwsegsnr(const std::vector<double>& reference,
                       const std::vector<double>& estimate, double sample_rate,
                       const FwSegSnrConfig& cfg = {}) {
  if (reference.size() != estimate.size())
    throw LengthMismatch("fwsegsnr: signals differ in length");
  const auto fr = detail::metric_framing(reference.size(), sample_rate,
                                         cfg.frame_seconds, cfg.hop_seconds);
  const int N = fr.frame_len;
  Fft fft(N);
  const int bins = N / 2 + 1;
  const auto fb = detail::mel_filterbank(cfg.bands, bins, sample_rate, N);

  std::vector<double> window(N);
  for (int i = 0; i < N; ++i) window[i] = 0.5 - 0.5 * std::cos(2 * kPi * i / N);

  struct FrameBands {
    double energy;  // full-band reference energy, gates activity
    std::vector<double> ref, diff;
  };
  std::vector<FrameBands> rows(fr.frames);
  double peak = 0;
  std::vector<cplx> xr(N), xd(N), yr(N), yd(N);
  for (int l = 0; l < fr.frames; ++l) {
    const size_t at = size_t(l) * fr.hop;
    double energy = 0;
    for (int i = 0; i < N; ++i) {
      const double r = reference[at + i] * window[i];
      const double e = estimate[at + i] * window[i];
      xr[i] = cplx(r, 0);
      xd[i] = cplx(e - r, 0);
      energy += r * r;
    }
    fft.forward(xr.data(), yr.data());
    fft.forward(xd.data(), yd.data());
    rows[l].energy = energy;
    peak = std::max(peak, energy);
    rows[l].ref.assign(cfg.bands, 0.0);
    rows[l].diff.assign(cfg.bands, 0.0);
    for (int b = 0; b < cfg.bands; ++b)
      for (int nu = 0; nu < bins; ++nu) {
        if (fb[b][nu] == 0) continue;
        rows[l].ref[b] += fb[b][nu] * std::norm(yr[nu]);
        rows[l].diff[b] += fb[b][nu] * std::norm(yd[nu]);
      }
  }
  if (peak <= 0) throw SilentReference("fwsegsnr: reference carries no energy");

  const double gate = peak * std::pow(10.0, -cfg.activity_floor_db / 10.0);
  double total = 0;
  int active = 0;
  for (const FrameBands& row : rows) {
    if (row.energy < gate) continue;
    double num = 0, den = 0;
    for (int b = 0; b < cfg.bands; ++b) {
      if (row.ref[b] <= 0) continue;
      double snr = row.diff[b] <= 0 ? cfg.clamp_hi_db
                                    : 10.0 * std::log10(row.ref[b] / row.diff[b]);
      snr = std::clamp(snr, cfg.clamp_lo_db, cfg.clamp_hi_db);
      const double w = std::pow(row.ref[b], cfg.weight_exp);
      num += w * snr;
      den += w;
    }
    if (den <= 0) continue;
    total += num / den;
    ++active;
  }
  if (active == 0) throw SilentReference("fwsegsnr: no active reference frames");
  return total / active;
}

// Mean framewise power of (output - gt_target) relative to the gt target
// power, in dB, floored at -120. Labels, when given, select which frames
// count; one label per analysis frame, nonzero = counted.
inline double residual_noise_power(const std::vector<double>& output,
                                   const std::vector<double>& gt_target,
                                   const std::vector<char>& frame_labels = {},
                                   double sample_rate = 10000.0,
                                   double frame_seconds = 0.016,
                                   double hop_seconds = 0.008) {
  if (output.size() != gt_target.size())
    throw LengthMismatch("residual_noise_power: signals differ in length");
  const auto fr =
      detail::metric_framing(output.size(), sample_rate, frame_seconds, hop_seconds);
  double res = 0, ref = 0;
  int used = 0;
  for (int l = 0; l < fr.frames; ++l) {
    if (!frame_labels.empty() && (size_t(l) >= frame_labels.size() || !frame_labels[l]))
      continue;
    const size_t at = size_t(l) * fr.hop;
    for (int i = 0; i < fr.frame_len; ++i) {
      const double d = output[at + i] - gt_target[at + i];
      res += d * d;
      ref += gt_target[at + i] * gt_target[at + i];
    }
    ++used;
  }
  if (used == 0 || ref <= 0)
    throw SilentReference("residual_noise_power: no usable reference frames");
  if (res <= 0) return -120.0;
  return std::max(10.0 * std::log10(res / ref), -120.0);
}

// Relative error against the gt target during target-active frames.
inline double target_distortion(const std::vector<double>& output,
                                const std::vector<double>& gt_target,
                                const std::vector<char>& target_active,
                                double sample_rate = 10000.0) {
  return residual_noise_power(output, gt_target, target_active, sample_rate);
}

struct MetricReport {
  double fwsegsnr_db = 0;
  double seg_noise_power_db = 0;
  double target_distortion_db = 0;
};

}  // namespace hybeam
