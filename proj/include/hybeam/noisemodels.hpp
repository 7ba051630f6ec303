#pragma once

#include <string>
#include <vector>

#include "hybeam/array.hpp"
#include "hybeam/numerics.hpp"

namespace hybeam {

enum class ModelKind { Identity, Iso, Aniso, PlaneWave, DataDriven };

// P_Aniso(phi) = 10^(-A |angle to peak| / (10 pi)), azimuth-only, A in dB.
inline double eval_aniso(double phi, double phi_peak, double a_db) {
  double delta = std::abs(wrap_angle(phi - phi_peak));
  return std::pow(10.0, -a_db * delta / (10.0 * kPi));
}

// Directional power profile P(Omega) of an ambient field.
struct IsotropyFunction {
  ModelKind kind = ModelKind::Iso;
  double phi_peak = 0;   // Aniso
  double a_db = 0;       // Aniso
  Direction omega_peak;  // PlaneWave

  static IsotropyFunction iso() { return {}; }
  static IsotropyFunction aniso(double phi_peak, double a_db) {
    IsotropyFunction f;
    f.kind = ModelKind::Aniso;
    f.phi_peak = phi_peak;
    f.a_db = a_db;
    return f;
  }
  static IsotropyFunction plane_wave(const Direction& peak) {
    IsotropyFunction f;
    f.kind = ModelKind::PlaneWave;
    f.omega_peak = peak;
    return f;
  }

  double eval(const Direction& d) const {
    switch (kind) {
      case ModelKind::Iso: return 1.0;
      case ModelKind::Aniso: return eval_aniso(d.azimuth, phi_peak, a_db);
      case ModelKind::PlaneWave: return same_direction(d, omega_peak, 1e-9) ? 1.0 : 0.0;
      default: return 0.0;
    }
  }

  std::string label() const {
    switch (kind) {
      case ModelKind::Iso: return "iso";
      case ModelKind::Aniso:
        return "aniso_az" + std::to_string(int(std::lround(rad2deg(phi_peak)))) + "_A" +
               std::to_string(int(std::lround(a_db)));
      case ModelKind::PlaneWave:
        return "pw_az" + std::to_string(int(std::lround(rad2deg(omega_peak.azimuth)))) +
               "_incl" + std::to_string(int(std::lround(rad2deg(omega_peak.inclination))));
      default: return "unknown";
    }
  }
};

// A noise covariance model: one Q x Q Hermitian PSD matrix per frequency bin.
struct NcmModel {
  std::string id;
  ModelKind kind = ModelKind::Iso;
  int cluster_index = -1;  // data-driven models only
  std::vector<HermitianMatrix> per_bin;

  int bins() const { return int(per_bin.size()); }
  int channels() const { return per_bin.empty() ? 0 : per_bin[0].dim(); }
};

inline NcmModel identity_model(int channels, int bins) {
  if (channels < 1 || bins < 1)
    throw DimensionMismatch("identity_model: channels and bins must be >= 1");
  NcmModel m;
  m.id = "identity";
  m.kind = ModelKind::Identity;
  m.per_bin.assign(bins, HermitianMatrix::identity(channels));
  return m;
}

// R(nu) = sum_i P(Omega_i) q_i h_i(nu) h_i(nu)^H over the ATF grid.
inline NcmModel isotropy_to_ncm(const IsotropyFunction& p, const AtfSet& atfs) {
  if (atfs.count() == 0) throw EmptyGrid("isotropy_to_ncm: empty ATF grid");
  NcmModel m;
  m.id = p.label();
  m.kind = p.kind;
  m.per_bin.assign(atfs.bins(), HermitianMatrix(atfs.channels()));
  for (int d = 0; d < atfs.count(); ++d) {
    const double w = p.eval(atfs.directions()[d]) * atfs.quad_weight(d);
    if (w == 0.0) continue;
    for (int nu = 0; nu < atfs.bins(); ++nu)
      m.per_bin[nu].add_outer(atfs.response_vector(d, nu), w);
  }
  return m;
}

// PSD within roundoff: smallest eigenvalue >= -1e-10 * largest.
inline bool ncm_is_psd(const NcmModel& m) {
  for (const HermitianMatrix& r : m.per_bin) {
    auto [lo, hi] = eig_extremes(r);
    if (lo < -1e-10 * std::max(hi, 0.0)) return false;
  }
  return true;
}

}  // namespace hybeam
