#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <utility>
#include <vector>

#include "hybeam/common.hpp"

namespace hybeam {

using ComplexVector = std::vector<cplx>;

inline double norm2(const ComplexVector& v) {
  double s = 0;
  for (const cplx& x : v) s += std::norm(x);
  return std::sqrt(s);
}

// Hermitian inner product, conjugate on the first argument.
inline cplx hdot(const ComplexVector& a, const ComplexVector& b) {
  assert(a.size() == b.size());
  cplx s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// Dense Hermitian matrix. Writes go through set()/add_outer() which keep the
// conjugate symmetry and real diagonal exact by construction.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(int dim) : dim_(dim), a_(size_t(dim) * dim, cplx(0, 0)) {
    if (dim <= 0) throw DimensionMismatch("HermitianMatrix: dim must be positive");
  }

  static HermitianMatrix identity(int dim) {
    HermitianMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.a_[size_t(i) * dim + i] = cplx(1, 0);
    return m;
  }

  int dim() const { return dim_; }

  cplx operator()(int i, int j) const { return a_[size_t(i) * dim_ + j]; }

  void set(int i, int j, cplx v) {
    if (i == j) {
      a_[size_t(i) * dim_ + j] = cplx(v.real(), 0.0);
    } else {
      a_[size_t(i) * dim_ + j] = v;
      a_[size_t(j) * dim_ + i] = std::conj(v);
    }
  }

  // A += w * v v^H for real w.
  void add_outer(const ComplexVector& v, double w) {
    assert(int(v.size()) == dim_);
    for (int i = 0; i < dim_; ++i) {
      a_[size_t(i) * dim_ + i] += cplx(w * std::norm(v[i]), 0.0);
      for (int j = i + 1; j < dim_; ++j) {
        cplx t = w * v[i] * std::conj(v[j]);
        a_[size_t(i) * dim_ + j] += t;
        a_[size_t(j) * dim_ + i] += std::conj(t);
      }
    }
  }

  void add_diagonal(double eps) {
    for (int i = 0; i < dim_; ++i) a_[size_t(i) * dim_ + i] += cplx(eps, 0.0);
  }

  void scale(double s) {
    for (cplx& x : a_) x *= s;
  }

  double max_abs() const {
    double m = 0;
    for (const cplx& x : a_) m = std::max(m, std::abs(x));
    return m;
  }

  double frobenius() const {
    double s = 0;
    for (const cplx& x : a_) s += std::norm(x);
    return std::sqrt(s);
  }

  ComplexVector multiply(const ComplexVector& x) const {
    assert(int(x.size()) == dim_);
    ComplexVector y(dim_, cplx(0, 0));
    for (int i = 0; i < dim_; ++i) {
      cplx s = 0;
      const cplx* row = &a_[size_t(i) * dim_];
      for (int j = 0; j < dim_; ++j) s += row[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  // x^H A x; real for Hermitian A.
  double quadratic_form(const ComplexVector& x) const {
    ComplexVector ax = multiply(x);
    return hdot(x, ax).real();
  }

  bool operator==(const HermitianMatrix& o) const { return dim_ == o.dim_ && a_ == o.a_; }

 private:
  int dim_;
  std::vector<cplx> a_;
};

namespace detail {

// LDL^H factorization without pivoting. Returns false if a pivot collapses,
// which callers treat as "fall back to pivoted elimination".
inline bool ldlt_solve(const HermitianMatrix& A, const ComplexVector& b, ComplexVector& x) {
  const int n = A.dim();
  std::vector<cplx> L(size_t(n) * n, cplx(0, 0));
  std::vector<double> D(n, 0.0);
  const double scale = std::max(A.max_abs(), 1e-300);
  for (int j = 0; j < n; ++j) {
    double d = A(j, j).real();
    for (int k = 0; k < n && k < j; ++k) d -= std::norm(L[size_t(j) * n + k]) * D[k];
    if (!(std::abs(d) > 1e-13 * scale)) return false;
    D[j] = d;
    L[size_t(j) * n + j] = cplx(1, 0);
    for (int i = j + 1; i < n; ++i) {
      cplx s = A(i, j);
      for (int k = 0; k < j; ++k)
        s -= L[size_t(i) * n + k] * std::conj(L[size_t(j) * n + k]) * D[k];
      L[size_t(i) * n + j] = s / d;
    }
  }
  // Forward substitution L z = b, then D, then L^H x = z.
  ComplexVector z(b);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < i; ++k) z[i] -= L[size_t(i) * n + k] * z[k];
  for (int i = 0; i < n; ++i) z[i] /= D[i];
  x = z;
  for (int i = n - 1; i >= 0; --i)
    for (int k = i + 1; k < n; ++k) x[i] -= std::conj(L[size_t(k) * n + i]) * x[k];
  return true;
}

// Gaussian elimination with complete pivoting on a dense complex copy.
inline ComplexVector pivoted_solve(const HermitianMatrix& A, const ComplexVector& b) {
  const int n = A.dim();
  std::vector<cplx> m(size_t(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[size_t(i) * n + j] = A(i, j);
  ComplexVector rhs(b);
  std::vector<int> col_of(n);
  for (int i = 0; i < n; ++i) col_of[i] = i;
  const double max_a = std::max(A.max_abs(), 1e-300);

  for (int step = 0; step < n; ++step) {
    int pr = step, pc = step;
    double best = -1;
    for (int i = step; i < n; ++i)
      for (int j = step; j < n; ++j) {
        double v = std::abs(m[size_t(i) * n + j]);
        if (v > best) { best = v; pr = i; pc = j; }
      }
    if (best < 1e-14 * max_a)
      throw SingularMatrix("hermitian_solve: pivot below 1e-14 * max|A|");
    if (pr != step)
      for (int j = 0; j < n; ++j) std::swap(m[size_t(pr) * n + j], m[size_t(step) * n + j]);
    if (pr != step) std::swap(rhs[pr], rhs[step]);
    if (pc != step) {
      for (int i = 0; i < n; ++i) std::swap(m[size_t(i) * n + pc], m[size_t(i) * n + step]);
      std::swap(col_of[pc], col_of[step]);
    }
    cplx piv = m[size_t(step) * n + step];
    for (int i = step + 1; i < n; ++i) {
      cplx f = m[size_t(i) * n + step] / piv;
      if (f == cplx(0, 0)) continue;
      for (int j = step; j < n; ++j) m[size_t(i) * n + j] -= f * m[size_t(step) * n + j];
      rhs[i] -= f * rhs[step];
    }
  }
  ComplexVector y(n);
  for (int i = n - 1; i >= 0; --i) {
    cplx s = rhs[i];
    for (int j = i + 1; j < n; ++j) s -= m[size_t(i) * n + j] * y[j];
    y[i] = s / m[size_t(i) * n + i];
  }
  ComplexVector x(n);
  for (int i = 0; i < n; ++i) x[col_of[i]] = y[i];
  return x;
}

}  // namespace detail

// Solves A x = b for Hermitian A. LDL^H first (all call sites pass
// PSD-plus-loading matrices), pivoted elimination as the fallback.
inline ComplexVector hermitian_solve(const HermitianMatrix& A, const ComplexVector& b) {
  if (int(b.size()) != A.dim())
    throw DimensionMismatch("hermitian_solve: size of b != dim of A");
  ComplexVector x;
  if (detail::ldlt_solve(A, b, x)) {
    bool finite = true;
    for (const cplx& v : x)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) finite = false;
    if (finite) return x;
  }
  return detail::pivoted_solve(A, b);
}

struct HermitianEig {
  std::vector<double> values;        // ascending
  std::vector<ComplexVector> vectors;  // vectors[k] pairs with values[k], unit norm
};

namespace detail {

// Cyclic complex Jacobi eigensolver. Adequate for the small (Q <= ~16)
// matrices this library works with.
inline HermitianEig jacobi_eig(const HermitianMatrix& A) {
  const int n = A.dim();
  std::vector<cplx> m(size_t(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[size_t(i) * n + j] = A(i, j);
  std::vector<cplx> V(size_t(n) * n, cplx(0, 0));
  for (int i = 0; i < n; ++i) V[size_t(i) * n + i] = cplx(1, 0);

  auto at = [&](std::vector<cplx>& M, int i, int j) -> cplx& { return M[size_t(i) * n + j]; };

  const double base = std::max(A.max_abs(), 1e-300);
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off = std::max(off, std::abs(at(m, i, j)));
    if (off <= 1e-15 * base) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        cplx apq = at(m, p, q);
        if (std::abs(apq) <= 1e-18 * base) continue;
        double app = at(m, p, p).real();
        double aqq = at(m, q, q).real();
        // Unitary 2x2 rotation diag(1, e^{-i phi}) then real Jacobi angle.
        double absapq = std::abs(apq);
        cplx phase = apq / absapq;
        double tau = (aqq - app) / (2.0 * absapq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        cplx sp = s * phase;  // complex sine
        // Apply G^H M G with G = [[c, sp], [-conj(sp), c]] acting on (p, q).
        for (int k = 0; k < n; ++k) {
          cplx mkp = at(m, k, p), mkq = at(m, k, q);
          at(m, k, p) = c * mkp - std::conj(sp) * mkq;
          at(m, k, q) = sp * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          cplx mpk = at(m, p, k), mqk = at(m, q, k);
          at(m, p, k) = c * mpk - sp * mqk;
          at(m, q, k) = std::conj(sp) * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          cplx vkp = at(V, k, p), vkq = at(V, k, q);
          at(V, k, p) = c * vkp - std::conj(sp) * vkq;
          at(V, k, q) = sp * vkp + c * vkq;
        }
      }
    }
  }

  HermitianEig out;
  out.values.resize(n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = at(m, i, i).real();
  std::sort(order.begin(), order.end(), [&](int a, int b) { return diag[a] < diag[b]; });
  out.vectors.assign(n, ComplexVector(n));
  for (int k = 0; k < n; ++k) {
    out.values[k] = diag[order[k]];
    for (int i = 0; i < n; ++i) out.vectors[k][i] = at(V, i, order[k]);
    // Phase convention: first entry with non-negligible magnitude is made
    // real and non-negative, for reproducible serialization.
    int lead = 0;
    while (lead < n - 1 && std::abs(out.vectors[k][lead]) < 1e-12) ++lead;
    cplx l = out.vectors[k][lead];
    if (std::abs(l) > 0) {
      cplx ph = std::conj(l) / std::abs(l);
      for (cplx& v : out.vectors[k]) v *= ph;
    }
    double nn = norm2(out.vectors[k]);
    if (nn > 0)
      for (cplx& v : out.vectors[k]) v /= nn;
  }
  return out;
}

}  // namespace detail

inline HermitianEig hermitian_eig(const HermitianMatrix& A) { return detail::jacobi_eig(A); }

// Smallest and largest eigenvalue of a Hermitian matrix.
inline std::pair<double, double> eig_extremes(const HermitianMatrix& A) {
  HermitianEig e = hermitian_eig(A);
  return {e.values.front(), e.values.back()};
}

struct Evd2 {
  std::array<double, 2> values;           // descending
  std::array<ComplexVector, 2> vectors;   // unit norm, phase-normalized
};

// Closed-form EVD of a 2x2 Hermitian matrix, eigenvalues descending.
// The degenerate case returns [1,1]/sqrt(2) as the leading vector so a
// downstream projection degrades to plain averaging.
inline Evd2 evd_2x2(const HermitianMatrix& A) {
  if (A.dim() != 2) throw DimensionMismatch("evd_2x2: matrix must be 2x2");
  const double a = A(0, 0).real();
  const double c = A(1, 1).real();
  const cplx b = A(0, 1);
  const double half_tr = 0.5 * (a + c);
  const double disc = std::sqrt(0.25 * (a - c) * (a - c) + std::norm(b));
  Evd2 out;
  out.values = {half_tr + disc, half_tr - disc};

  const double mag = std::max({std::abs(a), std::abs(c), std::abs(b)});
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  if (disc <= 1e-12 * std::max(mag, 1e-300) || mag == 0.0) {
    out.vectors[0] = {cplx(inv_sqrt2, 0), cplx(inv_sqrt2, 0)};
    out.vectors[1] = {cplx(inv_sqrt2, 0), cplx(-inv_sqrt2, 0)};
    return out;
  }

  auto make_vec = [&](double lambda) -> ComplexVector {
    // Pick the more stable of the two analytic forms.
    ComplexVector v1 = {b, cplx(lambda - a, 0)};
    ComplexVector v2 = {cplx(lambda - c, 0), std::conj(b)};
    ComplexVector v = (norm2(v1) >= norm2(v2)) ? v1 : v2;
    double nn = norm2(v);
    if (nn == 0) return {cplx(1, 0), cplx(0, 0)};
    for (cplx& x : v) x /= nn;
    int lead = std::abs(v[0]) >= 1e-12 ? 0 : 1;
    cplx l = v[lead];
    cplx ph = std::conj(l) / std::abs(l);
    for (cplx& x : v) x *= ph;
    return v;
  };
  out.vectors[0] = make_vec(out.values[0]);
  // Orthonormal complement keeps the pair exactly orthogonal.
  ComplexVector comp = {-std::conj(out.vectors[0][1]), std::conj(out.vectors[0][0])};
  int lead = std::abs(comp[0]) >= 1e-12 ? 0 : 1;
  cplx l = comp[lead];
  if (std::abs(l) > 0) {
    cplx ph = std::conj(l) / std::abs(l);
    for (cplx& x : comp) x *= ph;
  }
  out.vectors[1] = comp;
  return out;
}

// Clamps negative eigenvalues to zero and reconstructs; keeps a k-means
// centroid (PSD in exact arithmetic) PSD under roundoff.
inline HermitianMatrix psd_project(const HermitianMatrix& A) {
  HermitianEig e = hermitian_eig(A);
  bool any_neg = false;
  for (double v : e.values)
    if (v < 0) any_neg = true;
  if (!any_neg) return A;
  HermitianMatrix out(A.dim());
  for (size_t k = 0; k < e.values.size(); ++k) {
    if (e.values[k] <= 0) continue;
    out.add_outer(e.vectors[k], e.values[k]);
  }
  return out;
}

}  // namespace hybeam
