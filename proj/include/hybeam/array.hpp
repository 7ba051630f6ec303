#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybeam/common.hpp"
#include "hybeam/numerics.hpp"
#include "hybeam/stft.hpp"

namespace hybeam {

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wraps into [-pi, pi).
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

// Spherical direction: azimuth in [-pi, pi) about +z, inclination in [0, pi]
// measured from +z. Elevation = pi/2 - inclination.
struct Direction {
  double azimuth = 0;
  double inclination = kPi / 2;

  static Direction from_degrees(double az_deg, double incl_deg) {
    return {wrap_angle(deg2rad(az_deg)), deg2rad(incl_deg)};
  }
  static Direction from_az_el_degrees(double az_deg, double el_deg) {
    return from_degrees(az_deg, 90.0 - el_deg);
  }

  std::array<double, 3> unit() const {
    double st = std::sin(inclination);
    return {st * std::cos(azimuth), st * std::sin(azimuth), std::cos(inclination)};
  }
};

inline double angular_distance(const Direction& a, const Direction& b) {
  auto ua = a.unit(), ub = b.unit();
  double dot = ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2];
  double cx = ua[1] * ub[2] - ua[2] * ub[1];
  double cy = ua[2] * ub[0] - ua[0] * ub[2];
  double cz = ua[0] * ub[1] - ua[1] * ub[0];
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

inline bool same_direction(const Direction& a, const Direction& b, double tol = 1e-9) {
  return angular_distance(a, b) <= tol;
}

// Uniform angular grid; azimuth-major direction order (inclination runs
// fastest). Steps must divide the sphere so nominal Driscoll-Healy counts are
// well defined even for partial coverage.
struct GridSpec {
  int n_az = 0;
  int n_incl = 0;
  double az_min_deg = 0;
  double az_step_deg = 0;
  double incl_min_deg = 0;
  double incl_step_deg = 0;

  static GridSpec full_sphere(double az_step_deg, double incl_step_deg) {
    GridSpec g;
    g.az_step_deg = az_step_deg;
    g.incl_step_deg = incl_step_deg;
    g.az_min_deg = -180.0;
    g.incl_min_deg = 0.0;
    g.n_az = int(std::lround(360.0 / az_step_deg));
    g.n_incl = int(std::lround(180.0 / incl_step_deg));
    g.validate();
    return g;
  }

  void validate() const {
    if (n_az < 1 || n_incl < 1) throw InvalidGrid("grid: counts must be positive");
    if (az_step_deg <= 0 || incl_step_deg <= 0) throw InvalidGrid("grid: steps must be positive");
    double np = 360.0 / az_step_deg, nt = 180.0 / incl_step_deg;
    if (std::abs(np - std::lround(np)) > 1e-9 || std::abs(nt - std::lround(nt)) > 1e-9)
      throw InvalidGrid("grid: steps must divide 360 / 180 degrees");
    double incl_max = incl_min_deg + (n_incl - 1) * incl_step_deg;
    if (incl_min_deg < -1e-9 || incl_max > 180.0 + 1e-9)
      throw InvalidGrid("grid: inclination outside [0, 180] degrees");
  }

  // Nominal full-sphere sampling counts implied by the steps.
  int nominal_n_phi() const { return int(std::lround(360.0 / az_step_deg)); }
  int nominal_n_theta() const { return int(std::lround(180.0 / incl_step_deg)); }

  int count() const { return n_az * n_incl; }

  Direction direction(int idx) const {
    int ia = idx / n_incl, ii = idx % n_incl;
    return Direction::from_degrees(az_min_deg + ia * az_step_deg,
                                   incl_min_deg + ii * incl_step_deg);
  }

  std::vector<Direction> directions() const {
    std::vector<Direction> out(count());
    for (int i = 0; i < count(); ++i) out[i] = direction(i);
    return out;
  }

  bool operator==(const GridSpec&) const = default;
};

// q_i = (2 sin(theta_i) / (N_phi N_theta)) * sum_p sin((2p+1) theta_i)/(2p+1),
// p = 0 .. ceil(N_theta/2 - 1). Over a full uniform grid these sum to ~1, so
// sums against them are averages over the sphere.
inline std::vector<double> quadrature_weights(int n_phi, int n_theta,
                                              const std::vector<double>& inclinations) {
  if (n_phi < 2 || n_theta < 2) throw InvalidGrid("quadrature_weights: counts must be >= 2");
  const int p_max = int(std::ceil(0.5 * n_theta - 1.0));
  std::vector<double> q(inclinations.size());
  for (size_t i = 0; i < inclinations.size(); ++i) {
    double th = inclinations[i];
    if (th < -1e-12 || th > kPi + 1e-12)
      throw InvalidGrid("quadrature_weights: inclination outside [0, pi]");
    double s = 0;
    for (int p = 0; p <= p_max; ++p) s += std::sin((2 * p + 1) * th) / (2 * p + 1);
    q[i] = 2.0 * std::sin(th) / (double(n_phi) * n_theta) * s;
  }
  return q;
}

// Directional array responses on a grid. Responses are stored at the file
// format's complex64 precision so import(export(a)) reproduces a exactly;
// math on top of them runs in double.
class AtfSet {
 public:
  AtfSet() = default;
  AtfSet(const GridSpec& grid, int channels, int bins, double sample_rate, int ref_channel)
      : grid_(grid), channels_(channels), bins_(bins), sample_rate_(sample_rate),
        ref_channel_(ref_channel), directions_(grid.directions()),
        responses_(size_t(grid.count()) * bins * channels, std::complex<float>(0, 0)) {
    grid_.validate();
    std::vector<double> incls(directions_.size());
    for (size_t i = 0; i < directions_.size(); ++i) incls[i] = directions_[i].inclination;
    quad_ = quadrature_weights(grid.nominal_n_phi(), grid.nominal_n_theta(), incls);
  }

  const GridSpec& grid() const { return grid_; }
  int channels() const { return channels_; }
  int bins() const { return bins_; }
  double sample_rate() const { return sample_rate_; }
  int ref_channel() const { return ref_channel_; }
  int count() const { return int(directions_.size()); }
  const std::vector<Direction>& directions() const { return directions_; }
  const std::vector<double>& quad_weights() const { return quad_; }
  double quad_weight(int d) const { return quad_[d]; }

  size_t index(int d, int nu, int q) const { return (size_t(d) * bins_ + nu) * channels_ + q; }
  cplx response(int d, int nu, int q) const { return cplx(responses_[index(d, nu, q)]); }
  void set_response(int d, int nu, int q, cplx v) {
    responses_[index(d, nu, q)] = std::complex<float>(float(v.real()), float(v.imag()));
  }

  ComplexVector response_vector(int d, int nu) const {
    ComplexVector h(channels_);
    for (int q = 0; q < channels_; ++q) h[q] = response(d, nu, q);
    return h;
  }

  const std::complex<float>* raw() const { return responses_.data(); }
  std::complex<float>* raw() { return responses_.data(); }
  size_t raw_count() const { return responses_.size(); }

  // Hash over grid, dimensions, and payload bits; identifies the ATF set a
  // dictionary was built against.
  std::array<uint8_t, 32> fingerprint() const {
    detail::Sha256 h;
    auto feed = [&](const void* p, size_t n) { h.update(p, n); };
    double meta[8] = {double(grid_.n_az),      double(grid_.n_incl), grid_.az_min_deg,
                      grid_.az_step_deg,       grid_.incl_min_deg,   grid_.incl_step_deg,
                      double(channels_),       sample_rate_};
    feed(meta, sizeof(meta));
    int32_t dims[2] = {int32_t(bins_), int32_t(ref_channel_)};
    feed(dims, sizeof(dims));
    feed(responses_.data(), responses_.size() * sizeof(std::complex<float>));
    return h.digest();
  }

  bool operator==(const AtfSet& o) const {
    return grid_ == o.grid_ && channels_ == o.channels_ && bins_ == o.bins_ &&
           sample_rate_ == o.sample_rate_ && ref_channel_ == o.ref_channel_ &&
           responses_ == o.responses_;
  }

 private:
  GridSpec grid_;
  int channels_ = 0;
  int bins_ = 0;
  double sample_rate_ = 0;
  int ref_channel_ = 0;
  std::vector<Direction> directions_;
  std::vector<double> quad_;
  std::vector<std::complex<float>> responses_;
};

constexpr double kSpeedOfSound = 343.0;

// Far-field plane-wave response: a sensor at p hears a wave from direction u
// earlier by (p . u)/c than the origin, so its phase leads by 2 pi f (p.u)/c.
inline cplx freefield_response(const std::array<double, 3>& pos, const Direction& dir,
                               double freq_hz, double c) {
  auto u = dir.unit();
  double lead = (pos[0] * u[0] + pos[1] * u[1] + pos[2] * u[2]) / c;
  return std::polar(1.0, 2.0 * kPi * freq_hz * lead);
}

inline AtfSet synth_freefield_atf(const std::vector<std::array<double, 3>>& geometry,
                                  const GridSpec& grid, const StftConfig& cfg,
                                  double speed_of_sound = kSpeedOfSound,
                                  int ref_channel = 1) {
  if (geometry.empty()) throw InvalidGeometry("synth_freefield_atf: no sensors");
  if (speed_of_sound <= 0) throw InvalidGeometry("synth_freefield_atf: speed of sound <= 0");
  if (geometry.size() == 1) ref_channel = 0;
  if (ref_channel < 0 || ref_channel >= int(geometry.size()))
    throw RefChannelOutOfRange("synth_freefield_atf: reference channel");
  AtfSet atfs(grid, int(geometry.size()), cfg.bins(), cfg.sample_rate, ref_channel);
  for (int d = 0; d < atfs.count(); ++d) {
    const Direction dir = atfs.directions()[d];
    for (int nu = 0; nu < cfg.bins(); ++nu) {
      double f = cfg.bin_hz(nu);
      for (int q = 0; q < atfs.channels(); ++q)
        atfs.set_response(d, nu, q, freefield_response(geometry[q], dir, f, speed_of_sound));
    }
  }
  return atfs;
}

// Default capture rig: six sensors in a glasses-like arrangement, four across
// the front frame and one at each temple. Channel 1 (mid front left) is the
// default reference.
inline std::vector<std::array<double, 3>> default_array_geometry() {
  return {{0.08, 0.07, 0.02},  {0.08, 0.025, 0.02}, {0.08, -0.025, 0.02},
          {0.08, -0.07, 0.02}, {0.0, 0.085, 0.0},   {0.0, -0.085, 0.0}};
}

struct SteeringVector {
  Direction direction;          // the grid direction actually used
  int grid_index = -1;
  std::vector<ComplexVector> rtf;  // [nu][q], rtf[nu][ref] == 1 exactly

  const ComplexVector& at_bin(int nu) const { return rtf[nu]; }
};

inline int nearest_direction(const AtfSet& atfs, const Direction& target) {
  if (atfs.count() == 0) throw EmptyGrid("steering_lookup: empty ATF set");
  int best = 0;
  double best_d = angular_distance(atfs.directions()[0], target);
  for (int d = 1; d < atfs.count(); ++d) {
    double dist = angular_distance(atfs.directions()[d], target);
    if (dist < best_d - 1e-15) {
      best = d;
      best_d = dist;
    }
  }
  return best;
}

// RTF toward the grid direction closest to target (great-circle metric, ties
// to the lower index).
inline SteeringVector steering_lookup(const AtfSet& atfs, const Direction& target,
                                      int ref_channel) {
  if (ref_channel < 0 || ref_channel >= atfs.channels())
    throw RefChannelOutOfRange("steering_lookup: reference channel");
  const int d = nearest_direction(atfs, target);
  SteeringVector sv;
  sv.direction = atfs.directions()[d];
  sv.grid_index = d;
  sv.rtf.assign(atfs.bins(), ComplexVector(atfs.channels()));
  for (int nu = 0; nu < atfs.bins(); ++nu) {
    cplx href = atfs.response(d, nu, ref_channel);
    if (std::abs(href) < 1e-12)
      throw ZeroReference("steering_lookup: reference response vanishes at a bin");
    for (int q = 0; q < atfs.channels(); ++q) sv.rtf[nu][q] = atfs.response(d, nu, q) / href;
    sv.rtf[nu][ref_channel] = cplx(1, 0);
  }
  return sv;
}

constexpr const char* kAtfPayloadLayout =
    "direction-major, then bin, then channel, complex64 little-endian interleaved re/im";

inline void export_atf(const AtfSet& atfs, const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path mpath(manifest_path);
  std::string payload_name = mpath.filename().string() + ".bin";
  nlohmann::json j;
  j["version"] = 1;
  j["Q"] = atfs.channels();
  j["F"] = atfs.bins();
  j["sample_rate"] = atfs.sample_rate();
  j["grid"] = {{"n_az", atfs.grid().n_az},
               {"n_incl", atfs.grid().n_incl},
               {"coverage",
                {{"az_min_deg", atfs.grid().az_min_deg},
                 {"az_step_deg", atfs.grid().az_step_deg},
                 {"incl_min_deg", atfs.grid().incl_min_deg},
                 {"incl_step_deg", atfs.grid().incl_step_deg}}}};
  j["ref_channel"] = atfs.ref_channel();
  j["payload_file"] = payload_name;
  j["payload_layout"] = kAtfPayloadLayout;
  std::ofstream mf(mpath, std::ios::binary);
  if (!mf) throw IoError("export_atf: cannot write " + manifest_path);
  mf << j.dump(2) << "\n";
  mf.close();

  fs::path ppath = mpath.parent_path() / payload_name;
  std::ofstream pf(ppath, std::ios::binary);
  if (!pf) throw IoError("export_atf: cannot write " + ppath.string());
  static_assert(sizeof(std::complex<float>) == 8);
  pf.write(reinterpret_cast<const char*>(atfs.raw()),
           std::streamsize(atfs.raw_count() * sizeof(std::complex<float>)));
  if (!pf) throw IoError("export_atf: short write to " + ppath.string());
}

inline AtfSet import_atf(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw IoError("import_atf: cannot open " + manifest_path);
  nlohmann::json j;
  try {
    mf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("import_atf: manifest parse failure: ") + e.what());
  }
  for (const char* key :
       {"version", "Q", "F", "sample_rate", "grid", "ref_channel", "payload_file",
        "payload_layout"})
    if (!j.contains(key)) throw FormatError(std::string("import_atf: manifest missing ") + key);
  if (j["version"].get<int>() != 1)
    throw VersionMismatch("import_atf: unsupported manifest version");
  if (j["payload_layout"].get<std::string>() != kAtfPayloadLayout)
    throw FormatError("import_atf: unknown payload layout");

  GridSpec grid;
  const auto& g = j["grid"];
  const auto& cov = g.at("coverage");
  grid.n_az = g.at("n_az").get<int>();
  grid.n_incl = g.at("n_incl").get<int>();
  grid.az_min_deg = cov.at("az_min_deg").get<double>();
  grid.az_step_deg = cov.at("az_step_deg").get<double>();
  grid.incl_min_deg = cov.at("incl_min_deg").get<double>();
  grid.incl_step_deg = cov.at("incl_step_deg").get<double>();
  grid.validate();

  int Q = j["Q"].get<int>();
  int F = j["F"].get<int>();
  if (Q < 1 || F < 1) throw FormatError("import_atf: nonpositive dimensions");
  AtfSet atfs(grid, Q, F, j["sample_rate"].get<double>(), j["ref_channel"].get<int>());
  if (atfs.ref_channel() < 0 || atfs.ref_channel() >= Q)
    throw FormatError("import_atf: ref_channel out of range");

  fs::path ppath = fs::path(manifest_path).parent_path() / j["payload_file"].get<std::string>();
  std::ifstream pf(ppath, std::ios::binary);
  if (!pf) throw IoError("import_atf: cannot open payload " + ppath.string());
  const size_t want = atfs.raw_count() * sizeof(std::complex<float>);
  pf.read(reinterpret_cast<char*>(atfs.raw()), std::streamsize(want));
  const size_t got = size_t(pf.gcount());
  if (got != want)
    throw FormatError("import_atf: payload truncated at byte offset " + std::to_string(got) +
                      " (expected " + std::to_string(want) + ")");
  char extra;
  if (pf.read(&extra, 1); pf.gcount() != 0)
    throw FormatError("import_atf: payload longer than manifest dimensions imply");
  return atfs;
}

}  // namespace hybeam
