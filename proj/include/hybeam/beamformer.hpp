#pragma once

#include <optional>

#include "hybeam/numerics.hpp"

namespace hybeam {

struct LoadedNcm {
  HermitianMatrix r_eps;
  double eps = 0;
};

// Diagonal loading that caps the condition number at kappa0:
// eps = max((lmax - kappa0 lmin) / (kappa0 - 1), 0). No kappa0 means eps = 0.
inline LoadedNcm robust_loading(const HermitianMatrix& R, std::optional<double> kappa0) {
  if (!kappa0) return {R, 0.0};
  if (*kappa0 <= 1.0) throw InvalidKappa("robust_loading: kappa0 must exceed 1");
  auto [lmin, lmax] = eig_extremes(R);
  double eps = std::max((lmax - *kappa0 * lmin) / (*kappa0 - 1.0), 0.0);
  LoadedNcm out{R, eps};
  if (eps > 0) out.r_eps.add_diagonal(eps);
  return out;
}

// w = R^{-1} d / (d^H R^{-1} d); the unique distortionless (w^H d = 1)
// minimizer of w^H R w for positive definite R.
inline ComplexVector mvdr_weights(const HermitianMatrix& r_eps, const ComplexVector& d) {
  if (norm2(d) < 1e-12) throw ZeroSteering("mvdr_weights: steering vector is zero");
  ComplexVector x = hermitian_solve(r_eps, d);
  double den = hdot(d, x).real();
  if (!(std::abs(den) > 1e-300)) throw SingularMatrix("mvdr_weights: d^H R^{-1} d vanished");
  ComplexVector w(x.size());
  for (size_t i = 0; i < x.size(); ++i) w[i] = x[i] / den;
  return w;
}

// Build-time variant: applies the kappa0 loading, then rescues numerically
// singular matrices (fully coherent fields make the iso/aniso NCMs rank-1 at
// DC) with the smallest diagonal floor that lets the solve succeed. The
// normalization keeps the result distortionless either way.
inline ComplexVector mvdr_weights_robust(const HermitianMatrix& R, const ComplexVector& d,
                                         std::optional<double> kappa0) {
  LoadedNcm loaded = robust_loading(R, kappa0);
  double floor = 0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      return mvdr_weights(loaded.r_eps, d);
    } catch (const SingularMatrix&) {
      auto [lmin, lmax] = eig_extremes(loaded.r_eps);
      double bump = std::max(1e-10 * std::max(lmax, 1e-30), floor * 100);
      loaded.r_eps.add_diagonal(bump - floor);
      floor = bump;
    }
  }
  return mvdr_weights(loaded.r_eps, d);
}

}  // namespace hybeam
