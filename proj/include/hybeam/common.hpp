#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybeam {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Every named failure mode in the library derives from
// Error so callers can catch broadly or by condition.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularMatrix : Error {
  explicit SingularMatrix(const std::string& m) : Error(m) {}
};
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& m) : Error(m) {}
};
struct SignalTooShort : Error {
  explicit SignalTooShort(const std::string& m) : Error(m) {}
};
struct ConfigMismatch : Error {
  explicit ConfigMismatch(const std::string& m) : Error(m) {}
};
struct InvalidGrid : Error {
  explicit InvalidGrid(const std::string& m) : Error(m) {}
};
struct InvalidGeometry : Error {
  explicit InvalidGeometry(const std::string& m) : Error(m) {}
};
struct RefChannelOutOfRange : Error {
  explicit RefChannelOutOfRange(const std::string& m) : Error(m) {}
};
struct ZeroReference : Error {
  explicit ZeroReference(const std::string& m) : Error(m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error(m) {}
};
struct VersionMismatch : Error {
  explicit VersionMismatch(const std::string& m) : Error(m) {}
};
struct NotHermitian : Error {
  explicit NotHermitian(const std::string& m) : Error(m) {}
};
struct BadLength : Error {
  explicit BadLength(const std::string& m) : Error(m) {}
};
struct TooFewPoints : Error {
  explicit TooFewPoints(const std::string& m) : Error(m) {}
};
struct InsufficientTraining : Error {
  explicit InsufficientTraining(const std::string& m) : Error(m) {}
};
struct EmptyInput : Error {
  explicit EmptyInput(const std::string& m) : Error(m) {}
};
struct EmptyGrid : Error {
  explicit EmptyGrid(const std::string& m) : Error(m) {}
};
struct InvalidKappa : Error {
  explicit InvalidKappa(const std::string& m) : Error(m) {}
};
struct ZeroSteering : Error {
  explicit ZeroSteering(const std::string& m) : Error(m) {}
};
struct CoverageError : Error {
  explicit CoverageError(const std::string& m) : Error(m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(m) {}
};
struct FileError : Error {
  explicit FileError(const std::string& m) : Error(m) {}
};
struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& m) : Error(m) {}
};
struct SilentReference : Error {
  explicit SilentReference(const std::string& m) : Error(m) {}
};

namespace detail {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace detail

// Derives an independent stream seed from a base seed and a label, so that
// every consumer of randomness (scene, kmeans, per-direction noise, ...)
// gets its own deterministic stream.
inline uint64_t derive_seed(uint64_t base, const std::string& label, uint64_t index = 0) {
  uint64_t s = base ^ detail::fnv1a64(label) ^ (0x9e3779b97f4a7c15ull * (index + 1));
  detail::splitmix64(s);
  return detail::splitmix64(s);
}

// Deterministic random generator. Uniform and Gaussian draws are spelled out
// explicitly (instead of std::*_distribution) so the byte stream is identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Warm up so nearby seeds decorrelate.
    for (int i = 0; i < 4; ++i) detail::splitmix64(state_);
  }

  uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Circularly symmetric complex normal with unit variance.
  cplx cgaussian() {
    return cplx(gaussian(), gaussian()) * (1.0 / std::sqrt(2.0));
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {

// Compact SHA-256, used for content fingerprints in file headers.
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset() {
    h_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
          0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    len_ = 0;
    buf_fill_ = 0;
  }

  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    len_ += n;
    while (n > 0) {
      size_t take = std::min(n, size_t(64) - buf_fill_);
      std::memcpy(buf_ + buf_fill_, p, take);
      buf_fill_ += take;
      p += take;
      n -= take;
      if (buf_fill_ == 64) {
        compress(buf_);
        buf_fill_ = 0;
      }
    }
  }

  std::array<uint8_t, 32> digest() {
    uint64_t bits = len_ * 8;
    unsigned char pad = 0x80;
    update(&pad, 1);
    unsigned char zero = 0;
    while (buf_fill_ != 56) update(&zero, 1);
    unsigned char lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = (unsigned char)(bits >> (56 - 8 * i));
    // Length bytes must not re-enter the length counter.
    len_ -= 9;
    update(lenb, 8);
    std::array<uint8_t, 32> out{};
    for (int i = 0; i < 8; ++i) {
      out[4 * i + 0] = (uint8_t)(h_[i] >> 24);
      out[4 * i + 1] = (uint8_t)(h_[i] >> 16);
      out[4 * i + 2] = (uint8_t)(h_[i] >> 8);
      out[4 * i + 3] = (uint8_t)(h_[i]);
    }
    return out;
  }

 private:
  static uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void compress(const unsigned char* blk) {
    static constexpr uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
        0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
        0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
        0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
        0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(blk[4 * i]) << 24) | (uint32_t(blk[4 * i + 1]) << 16) |
             (uint32_t(blk[4 * i + 2]) << 8) | uint32_t(blk[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3];
    uint32_t e = h_[4], f = h_[5], g = h_[6], h = h_[7];
    for (int i = 0; i < 64; ++i) {
      uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      uint32_t ch = (e & f) ^ (~e & g);
      uint32_t t1 = h + s1 + ch + k[i] + w[i];
      uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      uint32_t t2 = s0 + maj;
      h = g; g = f; f = e; e = d + t1;
      d = c; c = b; b = a; a = t1 + t2;
    }
    h_[0] += a; h_[1] += b; h_[2] += c; h_[3] += d;
    h_[4] += e; h_[5] += f; h_[6] += g; h_[7] += h;
  }

  std::array<uint32_t, 8> h_;
  uint64_t len_ = 0;
  unsigned char buf_[64];
  size_t buf_fill_ = 0;
};

inline std::array<uint8_t, 32> sha256(const void* data, size_t n) {
  Sha256 s;
  s.update(data, n);
  return s.digest();
}

inline std::string hex(const uint8_t* p, size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (size_t i = 0; i < n; ++i) {
    out.push_back(digits[p[i] >> 4]);
    out.push_back(digits[p[i] & 0xF]);
  }
  return out;
}

}  // namespace detail

}  // namespace hybeam
