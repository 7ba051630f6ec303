#pragma once

#include <bit>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hybeam/beamformer.hpp"
#include "hybeam/noisemodels.hpp"
#include "hybeam/stft.hpp"

namespace hybeam {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and written via memcpy");

// [diag | upper-triangle real, row-major | upper-triangle imag, row-major].
// Exact bijection with the Hermitian matrix; length Q^2.
inline std::vector<double> vectorize(const HermitianMatrix& r) {
  const int q = r.dim();
  std::vector<double> v;
  v.reserve(size_t(q) * q);
  for (int i = 0; i < q; ++i) v.push_back(r(i, i).real());
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) v.push_back(r(i, j).real());
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) v.push_back(r(i, j).imag());
  return v;
}

inline HermitianMatrix devectorize(const std::vector<double>& v) {
  const int q = int(std::lround(std::sqrt(double(v.size()))));
  if (size_t(q) * q != v.size())
    throw BadLength("devectorize: length " + std::to_string(v.size()) + " is not Q^2");
  HermitianMatrix r(q);
  for (int i = 0; i < q; ++i) r.set(i, i, cplx(v[i], 0));
  size_t re = q, im = size_t(q) + size_t(q) * (q - 1) / 2;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) r.set(i, j, cplx(v[re++], v[im++]));
  return r;
}

// Per-bin pools of vectorized ground-truth NCM snapshots.
class TrainingSet {
 public:
  TrainingSet() = default;
  TrainingSet(int channels, int bins)
      : channels_(channels), bins_(bins), rows_(bins), counts_(bins, 0) {}

  int channels() const { return channels_; }
  int bins() const { return bins_; }
  int dim() const { return channels_ * channels_; }
  int count(int nu) const { return counts_[nu]; }
  const std::vector<double>& rows(int nu) const { return rows_[nu]; }

  void add(int nu, const HermitianMatrix& r) {
    std::vector<double> v = vectorize(r);
    rows_[nu].insert(rows_[nu].end(), v.begin(), v.end());
    ++counts_[nu];
  }

  void merge(const TrainingSet& other) {
    if (channels_ != other.channels_ || bins_ != other.bins_)
      throw DimensionMismatch("TrainingSet::merge: dimension mismatch");
    for (int nu = 0; nu < bins_; ++nu) {
      rows_[nu].insert(rows_[nu].end(), other.rows_[nu].begin(), other.rows_[nu].end());
      counts_[nu] += other.counts_[nu];
    }
  }

 private:
  int channels_ = 0;
  int bins_ = 0;
  std::vector<std::vector<double>> rows_;  // per bin, count*dim flat
  std::vector<int> counts_;
};

inline double ema_alpha(double t_seconds, double dt_seconds) {
  return std::exp(-dt_seconds / t_seconds);
}

// Exponentially averaged ground-truth NCM track:
// R(nu, l) = alpha R(nu, l-1) + (1 - alpha) y y^H, seeded with the first
// frame's outer product. Every frame's matrix lands in the training set.
// stride > 1 keeps every stride-th smoothed snapshot. The EMA still updates
// on every frame; adjacent snapshots share most of their horizon, so thinning
// mostly drops duplicates.
inline TrainingSet ema_gt_ncm(const StftTensor& gt_noise, double t_seconds,
                              int stride = 1) {
  if (gt_noise.frames == 0 || gt_noise.channels == 0)
    throw EmptyInput("ema_gt_ncm: empty tensor");
  if (stride < 1) throw ConfigError("ema_gt_ncm: stride must be at least 1");
  const double alpha = ema_alpha(t_seconds, gt_noise.config.hop_seconds());
  TrainingSet out(gt_noise.channels, gt_noise.bins);
  const int q = gt_noise.channels;
  std::vector<HermitianMatrix> state(gt_noise.bins, HermitianMatrix(q));
  ComplexVector y(q);
  for (int l = 0; l < gt_noise.frames; ++l) {
    for (int nu = 0; nu < gt_noise.bins; ++nu) {
      const cplx* snap = gt_noise.snapshot(nu, l);
      for (int i = 0; i < q; ++i) y[i] = snap[i];
      if (l == 0) {
        state[nu] = HermitianMatrix(q);
        state[nu].add_outer(y, 1.0);
      } else {
        state[nu].scale(alpha);
        state[nu].add_outer(y, 1.0 - alpha);
      }
      if (l % stride == stride - 1 || l + 1 == gt_noise.frames)
        out.add(nu, state[nu]);
    }
  }
  return out;
}

struct KmeansResult {
  std::vector<std::vector<double>> centroids;  // K x D
  std::vector<int> assignments;                // N
  std::vector<double> inertia_history;         // per iteration, nonincreasing
  int iterations = 0;
};

// Lloyd's algorithm, squared Euclidean metric, seeded random start on
// distinct input points. Ties go to the lower centroid index; an emptied
// cluster is reseeded to the point farthest from its own centroid.
inline KmeansResult kmeans_cluster(const std::vector<double>& points, int n, int d, int k,
                                   uint64_t seed, int max_iter = 100, double tol = 1e-9) {
  if (k < 1 || n < k) throw TooFewPoints("kmeans_cluster: need at least K points");
  if (size_t(n) * d != points.size())
    throw DimensionMismatch("kmeans_cluster: N*D does not match the data");
  const double* pts = points.data();
  auto point = [&](int i) { return pts + size_t(i) * d; };
  auto sq_dist = [&](const double* a, const double* b) {
    double s = 0;
    for (int j = 0; j < d; ++j) {
      double diff = a[j] - b[j];
      s += diff * diff;
    }
    return s;
  };

  KmeansResult res;
  Rng rng(seed);
  std::vector<int> chosen;
  while (int(chosen.size()) < k) {
    int cand = int(rng.below(uint64_t(n)));
    bool dup = false;
    for (int c : chosen)
      if (c == cand) dup = true;
    if (!dup) chosen.push_back(cand);
  }
  res.centroids.assign(k, std::vector<double>(d));
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) res.centroids[c][j] = point(chosen[c])[j];
  res.assignments.assign(n, 0);

  std::vector<double> next(size_t(k) * d);
  std::vector<int> sizes(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    double inertia = 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(point(i), res.centroids[0].data());
      for (int c = 1; c < k; ++c) {
        double dist = sq_dist(point(i), res.centroids[c].data());
        if (dist < best_d) {
          best = c;
          best_d = dist;
        }
      }
      res.assignments[i] = best;
      inertia += best_d;
      ++sizes[best];
      for (int j = 0; j < d; ++j) next[size_t(best) * d + j] += point(i)[j];
    }
    res.inertia_history.push_back(inertia);
    res.iterations = iter + 1;

    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      // Reseed to the point farthest from its current centroid. Donor
      // clusters must keep a member; one with >= 2 always exists while any
      // cluster is empty.
      int far = 0;
      double far_d = -1;
      for (int i = 0; i < n; ++i) {
        if (sizes[res.assignments[i]] < 2) continue;
        double dist = sq_dist(point(i), res.centroids[res.assignments[i]].data());
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      for (int j = 0; j < d; ++j) next[size_t(c) * d + j] = point(far)[j];
      sizes[c] = 1;
      sizes[res.assignments[far]] -= 1;
      for (int j = 0; j < d; ++j) next[size_t(res.assignments[far]) * d + j] -= point(far)[j];
      res.assignments[far] = c;
    }

    double shift = 0;
    for (int c = 0; c < k; ++c)
      for (int j = 0; j < d; ++j) {
        double mean = next[size_t(c) * d + j] / sizes[c];
        double delta = mean - res.centroids[c][j];
        shift = std::max(shift, std::abs(delta));
        res.centroids[c][j] = mean;
      }
    if (shift < tol) break;
  }
  return res;
}

struct ModelSpec {
  ModelKind kind = ModelKind::Iso;
  IsotropyFunction profile;

  static ModelSpec iso() { return {ModelKind::Iso, IsotropyFunction::iso()}; }
  static ModelSpec identity() { return {ModelKind::Identity, {}}; }
  static ModelSpec aniso(double phi_peak, double a_db) {
    return {ModelKind::Aniso, IsotropyFunction::aniso(phi_peak, a_db)};
  }
  static ModelSpec plane_wave(const Direction& d) {
    return {ModelKind::PlaneWave, IsotropyFunction::plane_wave(d)};
  }

  std::string label() const {
    return kind == ModelKind::Identity ? "identity" : profile.label();
  }
};

// Iso + Identity + 60 peak azimuths x 5 dynamic ranges = 302 models.
inline std::vector<ModelSpec> default_model_specs() {
  std::vector<ModelSpec> specs;
  specs.push_back(ModelSpec::iso());
  specs.push_back(ModelSpec::identity());
  for (int az = 0; az < 360; az += 6)
    for (double a : {8.0, 16.0, 24.0, 32.0, 40.0})
      specs.push_back(ModelSpec::aniso(deg2rad(az), a));
  return specs;
}

// Azimuth +-90 deg in 6 deg steps, elevation +-30 deg in 10 deg steps: 217
// steering directions.
inline GridSpec default_steering_patch() {
  GridSpec g;
  g.az_min_deg = -90;
  g.az_step_deg = 6;
  g.n_az = 31;
  g.incl_min_deg = 60;
  g.incl_step_deg = 10;
  g.n_incl = 7;
  g.validate();
  return g;
}

inline GridSpec default_atf_grid() { return GridSpec::full_sphere(6, 10); }

struct HybridFrameOutput {
  std::vector<cplx> z_iso;
  std::vector<cplx> z_hyb;
  std::vector<int> selected_model;
  int steering_index = -1;
  bool out_of_coverage = false;
};

// 4-D table of precalculated MVDR weights over models x bins x steering
// directions x channels. In memory the scan axis (models) is innermost-but-
// one so one (bin, steering) model sweep is contiguous; the on-disk order
// differs (see save_dict).
class WeightDictionary {
 public:
  WeightDictionary() = default;
  WeightDictionary(int models, int bins, int channels, std::vector<Direction> steering,
                   int iso_index)
      : m_(models), f_(bins), q_(channels), iso_index_(iso_index),
        steering_(std::move(steering)),
        weights_(size_t(models) * bins * channels * steering_.size(), cplx(0, 0)),
        model_ids_(models) {
    if (models < 1 || bins < 1 || channels < 1 || steering_.empty())
      throw DimensionMismatch("WeightDictionary: all dimensions must be positive");
    if (iso_index < 0 || iso_index >= models)
      throw DimensionMismatch("WeightDictionary: iso model index out of range");
    atf_fingerprint_.fill(0);
    init_coverage();
  }

  int models() const { return m_; }
  int bins() const { return f_; }
  int channels() const { return q_; }
  int steering_count() const { return int(steering_.size()); }
  int iso_index() const { return iso_index_; }
  const std::vector<Direction>& steering_dirs() const { return steering_; }
  const std::vector<std::string>& model_ids() const { return model_ids_; }
  std::vector<std::string>& model_ids() { return model_ids_; }
  std::optional<double> kappa0() const { return kappa0_; }
  void set_kappa0(std::optional<double> k) { kappa0_ = k; }
  const std::array<uint8_t, 32>& atf_fingerprint() const { return atf_fingerprint_; }
  void set_atf_fingerprint(const std::array<uint8_t, 32>& fp) { atf_fingerprint_ = fp; }

  size_t index(int m, int nu, int psi, int ch) const {
    return ((size_t(nu) * steering_.size() + psi) * m_ + m) * q_ + ch;
  }
  const cplx* weight(int m, int nu, int psi) const { return &weights_[index(m, nu, psi, 0)]; }
  void set_weight(int m, int nu, int psi, const ComplexVector& w) {
    if (int(w.size()) != q_) throw DimensionMismatch("set_weight: channel count");
    std::copy(w.begin(), w.end(), weights_.begin() + index(m, nu, psi, 0));
  }

  size_t entry_count() const { return weights_.size() / q_; }

  // Nearest steering direction; flags targets outside the table's angular
  // coverage (they are still served by the nearest edge direction).
  int steering_index(const Direction& target, bool* out_of_coverage = nullptr) const {
    int best = 0;
    double best_d = angular_distance(steering_[0], target);
    for (int i = 1; i < int(steering_.size()); ++i) {
      double dist = angular_distance(steering_[i], target);
      if (dist < best_d - 1e-15) {
        best = i;
        best_d = dist;
      }
    }
    if (out_of_coverage) {
      const double eps = 1e-9;
      bool outside = target.inclination < incl_lo_ - eps || target.inclination > incl_hi_ + eps;
      if (!az_full_circle_) {
        double rel = target.azimuth - az_lo_;
        while (rel < 0) rel += 2 * kPi;
        while (rel >= 2 * kPi) rel -= 2 * kPi;
        if (rel > az_span_ + eps) outside = true;
      }
      *out_of_coverage = outside;
    }
    return best;
  }

  // Per-bin minimum-power model selection against every stored model at the
  // steering direction closest to the target. The iso candidate is part of
  // the same scan, so |z_hyb|^2 <= |z_iso|^2 holds exactly, bin by bin.
  HybridFrameOutput process_frame(const StftTensor& y, int frame, const Direction& target) const {
    if (y.bins != f_ || y.channels != q_)
      throw DimensionMismatch("process_frame: tensor does not match dictionary dimensions");
    HybridFrameOutput out;
    out.z_iso.resize(f_);
    out.z_hyb.resize(f_);
    out.selected_model.assign(f_, 0);
    out.steering_index = steering_index(target, &out.out_of_coverage);
    for (int nu = 0; nu < f_; ++nu) {
      const cplx* snap = y.snapshot(nu, frame);
      const cplx* w = weight(0, nu, out.steering_index);
      cplx best_z = 0, iso_z = 0;
      double best_p = std::numeric_limits<double>::infinity();
      int best_m = 0;
      for (int m = 0; m < m_; ++m, w += q_) {
        cplx z = 0;
        for (int ch = 0; ch < q_; ++ch) z += std::conj(w[ch]) * snap[ch];
        double p = std::norm(z);
        if (p < best_p) {
          best_p = p;
          best_m = m;
          best_z = z;
        }
        if (m == iso_index_) iso_z = z;
      }
      out.z_iso[nu] = iso_z;
      out.z_hyb[nu] = best_z;
      out.selected_model[nu] = best_m;
    }
    return out;
  }

  bool operator==(const WeightDictionary& o) const {
    if (m_ != o.m_ || f_ != o.f_ || q_ != o.q_ || iso_index_ != o.iso_index_ ||
        atf_fingerprint_ != o.atf_fingerprint_ || steering_.size() != o.steering_.size())
      return false;
    for (size_t i = 0; i < steering_.size(); ++i)
      if (steering_[i].azimuth != o.steering_[i].azimuth ||
          steering_[i].inclination != o.steering_[i].inclination)
        return false;
    return weights_ == o.weights_;
  }

 private:
  void init_coverage() {
    incl_lo_ = kPi;
    incl_hi_ = 0;
    for (const Direction& s : steering_) {
      incl_lo_ = std::min(incl_lo_, s.inclination);
      incl_hi_ = std::max(incl_hi_, s.inclination);
    }
    // Azimuth span: walk sorted azimuths and drop the largest gap; if the
    // largest gap is no bigger than the others, the table wraps fully.
    std::vector<double> az;
    for (const Direction& s : steering_) az.push_back(wrap_angle(s.azimuth));
    std::sort(az.begin(), az.end());
    az.erase(std::unique(az.begin(), az.end()), az.end());
    if (az.size() < 2) {
      az_full_circle_ = false;
      az_lo_ = az.empty() ? 0 : az[0];
      az_span_ = 0;
      return;
    }
    double max_gap = 2 * kPi - (az.back() - az.front());
    size_t gap_at = az.size();  // gap between back() and front()+2pi
    double second_gap = 0;
    for (size_t i = 1; i < az.size(); ++i) {
      double gap = az[i] - az[i - 1];
      if (gap > max_gap) {
        second_gap = std::max(second_gap, max_gap);
        max_gap = gap;
        gap_at = i;
      } else {
        second_gap = std::max(second_gap, gap);
      }
    }
    az_full_circle_ = max_gap <= second_gap + 1e-9;
    if (az_full_circle_) {
      az_lo_ = az[0];
      az_span_ = 2 * kPi;
    } else if (gap_at == az.size()) {
      az_lo_ = az.front();
      az_span_ = az.back() - az.front();
    } else {
      az_lo_ = az[gap_at];
      az_span_ = 2 * kPi - max_gap;
    }
  }

  int m_ = 0, f_ = 0, q_ = 0, iso_index_ = 0;
  std::vector<Direction> steering_;
  std::vector<cplx> weights_;  // layout (nu, psi, m, q)
  std::vector<std::string> model_ids_;
  std::optional<double> kappa0_;
  std::array<uint8_t, 32> atf_fingerprint_{};
  double incl_lo_ = 0, incl_hi_ = kPi;
  double az_lo_ = 0, az_span_ = 2 * kPi;
  bool az_full_circle_ = true;
};

// MVDR weights for every (model, bin, steering) triple of a model list.
inline WeightDictionary build_parametric(const AtfSet& atfs,
                                         const std::vector<ModelSpec>& specs,
                                         const std::vector<Direction>& steering,
                                         std::optional<double> kappa0 = std::nullopt) {
  if (specs.empty()) throw ConfigError("build_parametric: empty model list");
  int iso_index = -1;
  for (size_t i = 0; i < specs.size(); ++i)
    if (specs[i].kind == ModelKind::Iso) {
      iso_index = int(i);
      break;
    }
  if (iso_index < 0)
    throw ConfigError("build_parametric: model list must include the isotropic model");

  WeightDictionary dict(int(specs.size()), atfs.bins(), atfs.channels(), steering, iso_index);
  dict.set_kappa0(kappa0);
  dict.set_atf_fingerprint(atfs.fingerprint());

  std::vector<SteeringVector> rtfs;
  rtfs.reserve(steering.size());
  for (const Direction& s : steering)
    rtfs.push_back(steering_lookup(atfs, s, atfs.ref_channel()));

  for (size_t m = 0; m < specs.size(); ++m) {
    NcmModel ncm = specs[m].kind == ModelKind::Identity
                       ? identity_model(atfs.channels(), atfs.bins())
                       : isotropy_to_ncm(specs[m].profile, atfs);
    dict.model_ids()[m] = specs[m].label();
    for (int nu = 0; nu < atfs.bins(); ++nu)
      for (size_t psi = 0; psi < steering.size(); ++psi) {
        try {
          dict.set_weight(int(m), nu, int(psi),
                          mvdr_weights_robust(ncm.per_bin[nu], rtfs[psi].rtf[nu], kappa0));
        } catch (const Error& e) {
          throw Error("build_parametric: model " + specs[m].label() + ", bin " +
                      std::to_string(nu) + ", steering " + std::to_string(psi) + ": " +
                      e.what());
        }
      }
  }
  return dict;
}

// Per-bin k-means over vectorized training NCMs, then MVDR weights from the
// PSD-repaired centroids; the isotropic model is appended as the last model.
inline WeightDictionary build_datadriven(const TrainingSet& training, int m_clusters,
                                         const AtfSet& atfs,
                                         const std::vector<Direction>& steering, uint64_t seed,
                                         std::optional<double> kappa0 = std::nullopt,
                                         int kmeans_max_iter = 100, double kmeans_tol = 1e-9) {
  if (training.bins() != atfs.bins() || training.channels() != atfs.channels())
    throw DimensionMismatch("build_datadriven: training set does not match the ATF set");
  for (int nu = 0; nu < training.bins(); ++nu)
    if (training.count(nu) < m_clusters)
      throw InsufficientTraining("build_datadriven: bin " + std::to_string(nu) + " has " +
                                 std::to_string(training.count(nu)) + " snapshots, need " +
                                 std::to_string(m_clusters));

  const int total = m_clusters + 1;  // + iso
  WeightDictionary dict(total, atfs.bins(), atfs.channels(), steering, m_clusters);
  dict.set_kappa0(kappa0);
  dict.set_atf_fingerprint(atfs.fingerprint());
  for (int m = 0; m < m_clusters; ++m)
    dict.model_ids()[m] = "cluster_" + std::to_string(m);
  dict.model_ids()[m_clusters] = "iso";

  std::vector<SteeringVector> rtfs;
  rtfs.reserve(steering.size());
  for (const Direction& s : steering)
    rtfs.push_back(steering_lookup(atfs, s, atfs.ref_channel()));

  NcmModel iso = isotropy_to_ncm(IsotropyFunction::iso(), atfs);
  for (int nu = 0; nu < atfs.bins(); ++nu) {
    KmeansResult km =
        kmeans_cluster(training.rows(nu), training.count(nu), training.dim(), m_clusters,
                       derive_seed(seed, "kmeans", uint64_t(nu)), kmeans_max_iter, kmeans_tol);
    for (int m = 0; m < m_clusters; ++m) {
      HermitianMatrix r = psd_project(devectorize(km.centroids[m]));
      for (size_t psi = 0; psi < steering.size(); ++psi)
        dict.set_weight(m, nu, int(psi), mvdr_weights_robust(r, rtfs[psi].rtf[nu], kappa0));
    }
    for (size_t psi = 0; psi < steering.size(); ++psi)
      dict.set_weight(m_clusters, nu, int(psi),
                      mvdr_weights_robust(iso.per_bin[nu], rtfs[psi].rtf[nu], kappa0));
  }
  return dict;
}

namespace detail {

inline void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}
template <typename T>
void put_pod(std::string& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, const std::string& what) : buf_(buf), what_(what) {}
  void read(void* p, size_t n) {
    if (pos_ + n > buf_.size())
      throw FormatError(what_ + ": truncated at byte offset " + std::to_string(buf_.size()) +
                        " (needed " + std::to_string(pos_ + n) + ")");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::string& buf_;
  std::string what_;
  size_t pos_ = 0;
};

}  // namespace detail

constexpr char kDictMagic[4] = {'H', 'Y', 'B', 'D'};
constexpr uint16_t kDictVersion = 1;

inline void save_dict(const WeightDictionary& d, const std::string& path) {
  std::string out;
  out.reserve(64 + size_t(d.models()) * d.bins() * d.steering_count() * d.channels() * 8);
  detail::put_bytes(out, kDictMagic, 4);
  detail::put_pod<uint16_t>(out, kDictVersion);
  detail::put_pod<uint32_t>(out, uint32_t(d.models()));
  detail::put_pod<uint32_t>(out, uint32_t(d.bins()));
  detail::put_pod<uint32_t>(out, uint32_t(d.channels()));
  detail::put_pod<uint32_t>(out, uint32_t(d.steering_count()));
  detail::put_pod<uint32_t>(out, uint32_t(d.iso_index()));
  for (const Direction& s : d.steering_dirs()) {
    detail::put_pod<double>(out, s.azimuth);
    detail::put_pod<double>(out, s.inclination);
  }
  detail::put_bytes(out, d.atf_fingerprint().data(), 32);
  for (int m = 0; m < d.models(); ++m)
    for (int nu = 0; nu < d.bins(); ++nu)
      for (int psi = 0; psi < d.steering_count(); ++psi) {
        const cplx* w = d.weight(m, nu, psi);
        for (int ch = 0; ch < d.channels(); ++ch) {
          detail::put_pod<float>(out, float(w[ch].real()));
          detail::put_pod<float>(out, float(w[ch].imag()));
        }
      }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_dict: cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("save_dict: short write to " + path);
}

inline WeightDictionary load_dict(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_dict: cannot open " + path);
  std::string buf(std::istreambuf_iterator<char>(f), {});
  detail::ByteReader r(buf, "load_dict");
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kDictMagic, 4) != 0)
    throw FormatError("load_dict: bad magic bytes (not a weight dictionary)");
  uint16_t version = r.pod<uint16_t>();
  if (version != kDictVersion)
    throw VersionMismatch("load_dict: format version " + std::to_string(version) +
                          ", expected " + std::to_string(kDictVersion));
  uint32_t m = r.pod<uint32_t>(), bins = r.pod<uint32_t>(), q = r.pod<uint32_t>(),
           psi = r.pod<uint32_t>(), iso = r.pod<uint32_t>();
  if (m < 1 || bins < 1 || q < 1 || psi < 1 || iso >= m)
    throw FormatError("load_dict: inconsistent header dimensions");
  std::vector<Direction> steering(psi);
  for (auto& s : steering) {
    s.azimuth = r.pod<double>();
    s.inclination = r.pod<double>();
  }
  WeightDictionary d(int(m), int(bins), int(q), std::move(steering), int(iso));
  std::array<uint8_t, 32> fp;
  r.read(fp.data(), 32);
  d.set_atf_fingerprint(fp);
  ComplexVector w(q);
  for (uint32_t mi = 0; mi < m; ++mi) {
    d.model_ids()[mi] = "model_" + std::to_string(mi);
    for (uint32_t nu = 0; nu < bins; ++nu)
      for (uint32_t p = 0; p < psi; ++p) {
        for (uint32_t ch = 0; ch < q; ++ch) {
          float re = r.pod<float>(), im = r.pod<float>();
          w[ch] = cplx(re, im);
        }
        d.set_weight(int(mi), int(nu), int(p), w);
      }
  }
  d.model_ids()[iso] = "iso";
  if (r.remaining() != 0)
    throw FormatError("load_dict: " + std::to_string(r.remaining()) +
                      " unexpected trailing bytes");
  return d;
}

inline bool fingerprint_matches(const WeightDictionary& d, const AtfSet& atfs) {
  return d.atf_fingerprint() == atfs.fingerprint();
}

}  // namespace hybeam
