#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "hybeam/common.hpp"
#include "hybeam/dictionary.hpp"
#include "hybeam/numerics.hpp"
#include "hybeam/stft.hpp"

namespace hybeam {

// Running wideband covariance of the stacked [hybrid; iso] full-band spectra.
// Row 0 tracks the hybrid stream, row 1 the iso stream.
struct InterMethodState {
  HermitianMatrix r_z{2};
  double alpha = 0.0;
  bool initialized = false;

  InterMethodState() = default;
  explicit InterMethodState(double a) : alpha(a) {
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("InterMethodState: alpha must be in (0,1)");
  }
  static InterMethodState for_timescale(double t_seconds, double hop_seconds) {
    return InterMethodState(ema_alpha(t_seconds, hop_seconds));
  }
};

// Frames of transient before the covariance EMA is trusted.
inline int warmup_frames(double t_seconds, double hop_seconds) {
  return int(std::ceil(t_seconds / hop_seconds));
}

inline void update_covariance(InterMethodState& state, const ComplexVector& z_hyb,
                              const ComplexVector& z_iso) {
  if (z_hyb.size() != z_iso.size())
    throw LengthMismatch("update_covariance: spectra differ in length");
  double hh = 0, ii = 0;
  cplx hi = 0;
  for (size_t nu = 0; nu < z_hyb.size(); ++nu) {
    hh += std::norm(z_hyb[nu]);
    ii += std::norm(z_iso[nu]);
    hi += z_hyb[nu] * std::conj(z_iso[nu]);
  }
  HermitianMatrix c(2);
  c.set(0, 0, cplx(hh, 0));
  c.set(1, 1, cplx(ii, 0));
  c.set(0, 1, hi);
  if (!state.initialized) {
    state.r_z = c;
    state.initialized = true;
    return;
  }
  HermitianMatrix next(2);
  const double a = state.alpha;
  next.set(0, 0, a * state.r_z(0, 0) + (1 - a) * c(0, 0));
  next.set(1, 1, a * state.r_z(1, 1) + (1 - a) * c(1, 1));
  next.set(0, 1, a * state.r_z(0, 1) + (1 - a) * c(0, 1));
  state.r_z = next;
}

struct MixingWeights {
  cplx beta_hyb;  // U1 conj(U1): exactly real, in [0,1]
  cplx beta_iso;  // U1 conj(U2)
};

struct Projection {
  ComplexVector z_out;      // SS-Hybrid spectrum, row 0 of the projected stack
  ComplexVector z_iso_out;  // row 1, kept for diagnostics
  MixingWeights weights;
};

// Rank-1 PCA of the stacked spectra: keep only the component along the
// dominant eigenvector of R_z. Identical inputs pass through unchanged.
inline Projection project_subspace(const InterMethodState& state, const ComplexVector& z_hyb,
                                   const ComplexVector& z_iso) {
  if (!state.initialized) throw EmptyInput("project_subspace: no covariance history");
  if (z_hyb.size() != z_iso.size())
    throw LengthMismatch("project_subspace: spectra differ in length");
  Evd2 e = evd_2x2(state.r_z);
  const cplx u1 = e.vectors[0][0];
  const cplx u2 = e.vectors[0][1];
  Projection p;
  p.weights.beta_hyb = u1 * std::conj(u1);
  p.weights.beta_iso = u1 * std::conj(u2);
  const cplx g1 = std::conj(u1), g2 = std::conj(u2);
  p.z_out.resize(z_hyb.size());
  p.z_iso_out.resize(z_hyb.size());
  for (size_t nu = 0; nu < z_hyb.size(); ++nu) {
    const cplx t = g1 * z_hyb[nu] + g2 * z_iso[nu];
    p.z_out[nu] = u1 * t;
    p.z_iso_out[nu] = u2 * t;
  }
  return p;
}

struct PipelineDiagnostics {
  std::vector<std::vector<int>> selected_model;  // [frame][bin]
  std::vector<MixingWeights> mixing;             // per frame
  std::vector<int> steering_index;               // per frame
  std::vector<char> out_of_coverage;             // per frame
  StftTensor z_hyb;     // stage-1 hybrid stream
  StftTensor z_iso;     // stage-1 iso stream
  StftTensor z_ss_iso;  // second projection row
};

struct PipelineResult {
  StftTensor z_ss;  // SS-Hybrid stream
  PipelineDiagnostics diag;
};

inline PipelineResult run_pipeline(const StftTensor& y, const WeightDictionary& dict,
                                   const std::vector<Direction>& doa_track,
                                   double t_seconds = 0.080) {
  if (int(doa_track.size()) != y.frames)
    throw LengthMismatch("run_pipeline: DOA track length != frame count");
  InterMethodState state =
      InterMethodState::for_timescale(t_seconds, y.config.hop_seconds());

  PipelineResult out;
  out.z_ss = StftTensor(y.config, 1, y.frames);
  out.diag.z_hyb = StftTensor(y.config, 1, y.frames);
  out.diag.z_iso = StftTensor(y.config, 1, y.frames);
  out.diag.z_ss_iso = StftTensor(y.config, 1, y.frames);
  out.diag.selected_model.reserve(y.frames);
  out.diag.mixing.reserve(y.frames);

  for (int l = 0; l < y.frames; ++l) {
    HybridFrameOutput f = dict.process_frame(y, l, doa_track[l]);
    update_covariance(state, f.z_hyb, f.z_iso);
    Projection p = project_subspace(state, f.z_hyb, f.z_iso);
    for (int nu = 0; nu < y.bins; ++nu) {
      out.z_ss.at(0, nu, l) = p.z_out[nu];
      out.diag.z_hyb.at(0, nu, l) = f.z_hyb[nu];
      out.diag.z_iso.at(0, nu, l) = f.z_iso[nu];
      out.diag.z_ss_iso.at(0, nu, l) = p.z_iso_out[nu];
    }
    out.diag.selected_model.push_back(std::move(f.selected_model));
    out.diag.mixing.push_back(p.weights);
    out.diag.steering_index.push_back(f.steering_index);
    out.diag.out_of_coverage.push_back(f.out_of_coverage ? 1 : 0);
  }
  return out;
}

}  // namespace hybeam
