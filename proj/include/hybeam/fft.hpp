#pragma once

#include <vector>

#include "hybeam/common.hpp"

namespace hybeam {

// Mixed-radix DFT with precomputed root table. Sizes holding only small prime
// factors run in O(n log n); a leftover large prime factor degrades to the
// O(p^2) combine, which is fine for the frame lengths used here.
class Fft {
 public:
  explicit Fft(int n) : n_(n), roots_(n) {
    if (n <= 0) throw DimensionMismatch("Fft: size must be positive");
    for (int k = 0; k < n; ++k) {
      double ang = -2.0 * kPi * k / n;
      roots_[k] = cplx(std::cos(ang), std::sin(ang));
    }
  }

  int size() const { return n_; }

  void forward(const cplx* in, cplx* out) const {
    std::vector<cplx> scratch(n_);
    rec(in, 1, out, n_, scratch.data());
  }

  void inverse(const cplx* in, cplx* out) const {
    std::vector<cplx> tmp(n_);
    for (int i = 0; i < n_; ++i) tmp[i] = std::conj(in[i]);
    forward(tmp.data(), out);
    for (int i = 0; i < n_; ++i) out[i] = std::conj(out[i]) / double(n_);
  }

  std::vector<cplx> forward(const std::vector<cplx>& x) const {
    if (int(x.size()) != n_) throw DimensionMismatch("Fft::forward: length mismatch");
    std::vector<cplx> y(n_);
    forward(x.data(), y.data());
    return y;
  }

  std::vector<cplx> inverse(const std::vector<cplx>& x) const {
    if (int(x.size()) != n_) throw DimensionMismatch("Fft::inverse: length mismatch");
    std::vector<cplx> y(n_);
    inverse(x.data(), y.data());
    return y;
  }

 private:
  static int smallest_factor(int n) {
    for (int p : {2, 3, 5, 7})
      if (n % p == 0) return p;
    for (int p = 11; p * p <= n; p += 2)
      if (n % p == 0) return p;
    return n;
  }

  // DFT of in[0], in[stride], ..., in[(n-1)*stride] into out[0..n).
  // scratch is only touched during the combine, after subcalls return.
  void rec(const cplx* in, int stride, cplx* out, int n, cplx* scratch) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const int p = smallest_factor(n);
    const int m = n / p;
    for (int j = 0; j < p; ++j) rec(in + size_t(j) * stride, stride * p, out + size_t(j) * m, m, scratch);
    const int root_step = n_ / n;
    for (int r = 0; r < m; ++r) {
      for (int k = 0; k < p; ++k) {
        const long idx = long(r) + long(k) * m;
        cplx s = 0;
        for (int j = 0; j < p; ++j)
          s += out[size_t(j) * m + r] * roots_[size_t((long(j) * idx) % n * root_step)];
        scratch[idx] = s;
      }
    }
    for (int i = 0; i < n; ++i) out[i] = scratch[i];
  }

  int n_;
  std::vector<cplx> roots_;
};

}  // namespace hybeam
