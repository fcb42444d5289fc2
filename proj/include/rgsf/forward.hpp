#pragma once

// Scalar acoustic test device and its measurement model.
//
// Field outside the source: F(r, theta, phi) = sum A_n^m h_n(k r) Y_n^m(theta, phi).
// An ideal axisymmetric probe at (r_near, beta, alpha) with polarization gamma
// reads w(alpha, beta, gamma) = F(r_near, beta, alpha). Since
//   Y_n^m(beta, alpha) = (-1)^m sqrt(2 pi) D_n^{-m, 0}(alpha, beta, 0),
// the coefficient A_n^m lands on Wigner index (n, m_D = 0, mu = -m) with
//   a = (-1)^m sqrt(2 pi) h_n(k r_near) A_n^m.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgsf/errors.hpp"
#include "rgsf/rng.hpp"
#include "rgsf/sampling.hpp"
#include "rgsf/slepian.hpp"
#include "rgsf/specfun.hpp"
#include "rgsf/types.hpp"

namespace rgsf {

enum class DeviceProfile { axisymmetric_beam, random_sparse };

inline const char* to_string(DeviceProfile p) {
  return p == DeviceProfile::axisymmetric_beam ? "axisymmetric-beam" : "random-sparse";
}

inline DeviceProfile parse_profile(const std::string& s) {
  if (s == "axisymmetric-beam") return DeviceProfile::axisymmetric_beam;
  if (s == "random-sparse") return DeviceProfile::random_sparse;
  throw ParameterError("unknown device profile '" + s + "' (valid: axisymmetric-beam, random-sparse)");
}

/// Spherical-wave coefficients stored densely at n^2 + n + m.
inline std::size_t sw_index(int n, int m) { return static_cast<std::size_t>(n * n + n + m); }
inline std::size_t sw_count(int n_max) { return static_cast<std::size_t>((n_max + 1) * (n_max + 1)); }

struct DeviceModel {
  int n_max = 20;
  DeviceProfile profile = DeviceProfile::axisymmetric_beam;
  std::uint64_t seed = 0;
  CVec sw_coeffs;  // A_n^m at sw_index(n, m)
  double k = kTwoPi;
  double r_near = 7.0;
  double r_far = 2000.0;
  double beam_kappa = 0.0;  // taper parameter, axisymmetric-beam only

  cplx A(int n, int m) const { return sw_coeffs(static_cast<Eigen::Index>(sw_index(n, m))); }
};

struct GroundTruth {
  CVec a;
  CVec a_prime;
  double energy_Rc = 0.0;
  std::vector<std::size_t> support;
};

/// Bridge constant between A_n^m and the Wigner coefficient at (n, 0, -m).
inline double sw_normalization(int m) { return (m % 2 == 0 ? 1.0 : -1.0) * std::sqrt(kTwoPi); }

struct DeviceOptions {
  std::size_t sparsity = 5;  // random-sparse nonzero count
  double k = kTwoPi;
  double r_near = 7.0;
  double r_far = 2000.0;
  double kappa_lo = 4.0;  // axisymmetric-beam taper range
  double kappa_hi = 6.0;
};

namespace detail {

// Legendre coefficients c_n of exp(kappa (x - 1)) on [-1, 1].
inline std::vector<double> taper_legendre_coeffs(int n_max, double kappa) {
  const auto rule = gauss_legendre(std::max(64, 2 * n_max + 2));
  std::vector<double> c(static_cast<std::size_t>(n_max + 1), 0.0);
  for (int q = 0; q < rule.order(); ++q) {
    const double x = rule.nodes[static_cast<std::size_t>(q)];
    const double f = std::exp(kappa * (x - 1.0)) * rule.weights[static_cast<std::size_t>(q)];
    double p0 = 1.0, p1 = x;
    for (int n = 0; n <= n_max; ++n) {
      const double pn = n == 0 ? p0 : p1;
      c[static_cast<std::size_t>(n)] += 0.5 * (2 * n + 1) * f * pn;
      if (n >= 1) {
        const double p2 = ((2 * n + 1) * x * p1 - n * p0) / (n + 1);
        p0 = p1;
        p1 = p2;
      }
    }
  }
  return c;
}

}  // namespace detail

/// axisymmetric-beam: the near-field pattern is the band-limited projection of
/// exp(kappa (cos beta - 1)) times a global phase, kappa in [kappa_lo, kappa_hi] and the
/// phase drawn from the seed; the main lobe sits at beta = 0.
/// random-sparse: `sparsity` distinct (n, m) with complex Gaussian A_n^m.
inline DeviceModel make_device(int n_max, std::uint64_t seed, DeviceProfile profile, const DeviceOptions& opt = {}) {
  if (n_max < 0 || n_max > IndexMap::kMaxBandLimit) throw ParameterError("n_max out of range");
  if (!(opt.k > 0.0 && opt.r_near > 0.0 && opt.r_far > 0.0)) throw ParameterError("k, r_near, r_far must be > 0");
  DeviceModel dev;
  dev.n_max = n_max;
  dev.profile = profile;
  dev.seed = seed;
  dev.k = opt.k;
  dev.r_near = opt.r_near;
  dev.r_far = opt.r_far;
  dev.sw_coeffs = CVec::Zero(static_cast<Eigen::Index>(sw_count(n_max)));
  CounterRng rng(seed, stream_id::kDevice);

  if (profile == DeviceProfile::axisymmetric_beam) {
    dev.beam_kappa = rng.uniform(opt.kappa_lo, opt.kappa_hi);
    const cplx phase = std::polar(1.0, kTwoPi * rng.uniform());
    const auto c = detail::taper_legendre_coeffs(n_max, dev.beam_kappa);
    const auto h = spherical_hankel1_all(n_max, dev.k * dev.r_near);
    for (int n = 0; n <= n_max; ++n) {
      // w = sum c_n P_n(cos beta) and D_n^{00} = sqrt((2n+1)/2) P_n / (2 pi).
      const double a_n = c[static_cast<std::size_t>(n)] * kTwoPi / std::sqrt((2 * n + 1) / 2.0);
      dev.sw_coeffs(static_cast<Eigen::Index>(sw_index(n, 0))) =
          phase * a_n / (sw_normalization(0) * h[static_cast<std::size_t>(n)]);
    }
    return dev;
  }

  const std::size_t total = sw_count(n_max);
  if (opt.sparsity < 1 || opt.sparsity > total) throw ParameterError("random-sparse sparsity out of range");
  std::vector<char> used(total, 0);
  std::size_t placed = 0;
  while (placed < opt.sparsity) {
    const auto idx = static_cast<std::size_t>(rng.below(total));
    if (used[idx]) continue;
    used[idx] = 1;
    ++placed;
    const double re = rng.normal(), im = rng.normal();
    dev.sw_coeffs(static_cast<Eigen::Index>(idx)) = cplx(re, im) / std::sqrt(2.0);
  }
  return dev;
}

/// Near-field Wigner-D coefficients of the device, canonical flat order.
inline CVec wigner_coeffs(const DeviceModel& dev) {
  const IndexMap index(dev.n_max);
  CVec a = CVec::Zero(static_cast<Eigen::Index>(index.size()));
  const auto h = spherical_hankel1_all(dev.n_max, dev.k * dev.r_near);
  for (int n = 0; n <= dev.n_max; ++n)
    for (int m = -n; m <= n; ++m) {
      const cplx A = dev.A(n, m);
      if (A == cplx(0.0)) continue;
      a(static_cast<Eigen::Index>(index.flat(n, 0, -m))) = sw_normalization(m) * h[static_cast<std::size_t>(n)] * A;
    }
  return a;
}

/// Inverse of wigner_coeffs on the (m_D = 0) slice; other entries are outside
/// the ideal-probe model and are ignored.
inline CVec sw_from_wigner(const CVec& a, int n_max, double k, double r_near) {
  const IndexMap index(n_max);
  if (static_cast<std::size_t>(a.size()) != index.size()) throw ShapeError("coefficient vector length != N_D");
  const auto h = spherical_hankel1_all(n_max, k * r_near);
  CVec A = CVec::Zero(static_cast<Eigen::Index>(sw_count(n_max)));
  for (int n = 0; n <= n_max; ++n) {
    const cplx hn = h[static_cast<std::size_t>(n)];
    if (std::abs(hn) < 1e-12) throw NumericError("|h_n(k r_near)| < 1e-12 at n=" + std::to_string(n));
    for (int m = -n; m <= n; ++m)
      A(static_cast<Eigen::Index>(sw_index(n, m))) =
          a(static_cast<Eigen::Index>(index.flat(n, 0, -m))) / (sw_normalization(m) * hn);
  }
  return A;
}

inline double energy_in(const RgsfBasis& basis, const CVec& a, const RVec& weights) {
  const CVec t = to_rgsf_unscaled(basis, a);
  double e = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) e += weights(i) * std::norm(t(i));
  return e;
}

inline GroundTruth device_to_wigner_coeffs(const DeviceModel& dev, const RgsfBasis& basis) {
  if (basis.n_max() != dev.n_max) throw ShapeError("basis band-limit does not match device");
  GroundTruth gt;
  gt.a = wigner_coeffs(dev);
  gt.a_prime = to_rgsf_coeffs(basis, gt.a);
  gt.energy_Rc = energy_in(basis, gt.a, basis.complements());
  for (Eigen::Index i = 0; i < gt.a.size(); ++i)
    if (gt.a(i) != cplx(0.0)) gt.support.push_back(static_cast<std::size_t>(i));
  return gt;
}

/// Evaluates sum_k a_k D_k at each point, visiting only blocks with a nonzero entry.
inline CVec evaluate_wigner_series(const CVec& a, int n_max, const PointList& points) {
  const IndexMap index(n_max);
  if (static_cast<std::size_t>(a.size()) != index.size()) throw ShapeError("coefficient vector length != N_D");
  std::vector<std::size_t> active;
  for (std::size_t b = 0; b < index.block_count(); ++b) {
    const auto seg = a.segment(static_cast<Eigen::Index>(index.block_offset(b)), static_cast<Eigen::Index>(index.block_dim(b)));
    if (seg.cwiseAbs2().sum() > 0.0) active.push_back(b);
  }
  CVec w = CVec::Zero(static_cast<Eigen::Index>(points.size()));
  std::vector<double> col(static_cast<std::size_t>(n_max + 1));
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto& p = points[j];
    cplx acc = 0.0;
    for (const auto b : active) {
      const auto [mu, m] = index.block_orders(b);
      wigner_d_column(mu, m, n_max, p.beta, col.data());
      const auto off = static_cast<Eigen::Index>(index.block_offset(b));
      cplx s = 0.0;
      for (std::size_t k = 0; k < index.block_dim(b); ++k) s += a(off + static_cast<Eigen::Index>(k)) * col[k];
      acc += s * std::polar(1.0 / kTwoPi, -(mu * p.alpha + m * p.gamma));
    }
    w(static_cast<Eigen::Index>(j)) = acc;
  }
  return w;
}

/// w_j = sum a D(p_j) + eta_j, eta complex Gaussian with E|eta|^2 = sigma^2.
/// epsilon = 3 sigma (0 when noiseless).
inline MeasurementSet synthesize_measurements(const CVec& a, int n_max, const PointList& points, double noise_sigma,
                                              std::uint64_t seed, const BeltRegion& domain = BeltRegion::full()) {
  if (noise_sigma < 0.0) throw ParameterError("noise_sigma must be >= 0");
  MeasurementSet set;
  set.points = points;
  set.values = evaluate_wigner_series(a, n_max, points);
  set.weights = precondition_weights(points);
  set.seed = seed;
  set.domain = domain;
  set.epsilon = 3.0 * noise_sigma;
  if (noise_sigma > 0.0) {
    CounterRng rng(seed, stream_id::kNoise);
    const double s = noise_sigma / std::sqrt(2.0);
    for (Eigen::Index j = 0; j < set.values.size(); ++j) {
      const double re = rng.normal(), im = rng.normal();
      set.values(j) += cplx(s * re, s * im);
    }
  }
  return set;
}

inline MeasurementSet synthesize_measurements(const GroundTruth& truth, int n_max, const PointList& points,
                                              double noise_sigma, std::uint64_t seed,
                                              const BeltRegion& domain = BeltRegion::full()) {
  return synthesize_measurements(truth.a, n_max, points, noise_sigma, seed, domain);
}

/// F(r, theta, phi) = sum A_n^m h_n(k r) Y_n^m(theta, phi) on a theta grid.
inline CVec evaluate_field(const CVec& sw, int n_max, double k, double r, const std::vector<double>& thetas,
                           double phi) {
  if (!(r > 0.0)) throw DomainError("evaluate_field requires r > 0");
  if (static_cast<std::size_t>(sw.size()) != sw_count(n_max)) throw ShapeError("SW coefficient vector length mismatch");
  const auto h = spherical_hankel1_all(n_max, k * r);
  CVec out = CVec::Zero(static_cast<Eigen::Index>(thetas.size()));
  std::vector<double> col(static_cast<std::size_t>(n_max + 1));
  for (int m = -n_max; m <= n_max; ++m) {
    bool any = false;
    for (int n = std::abs(m); n <= n_max && !any; ++n) any = sw(static_cast<Eigen::Index>(sw_index(n, m))) != cplx(0.0);
    if (!any) continue;
    const cplx eph = std::polar(1.0, m * phi);
    const int n0 = std::abs(m);
    for (std::size_t t = 0; t < thetas.size(); ++t) {
      // Paper-normalized d_n^{m,0} = sqrt((2n+1)/2) d^n_{m0}; Y = sqrt((2n+1)/4pi) e^{im phi} d^n_{m0}.
      wigner_d_column(m, 0, n_max, thetas[t], col.data());
      cplx s = 0.0;
      for (int n = n0; n <= n_max; ++n) {
        const cplx A = sw(static_cast<Eigen::Index>(sw_index(n, m)));
        if (A == cplx(0.0)) continue;
        s += A * h[static_cast<std::size_t>(n)] * col[static_cast<std::size_t>(n - n0)];
      }
      out(static_cast<Eigen::Index>(t)) += s * eph / std::sqrt(kTwoPi);
    }
  }
  return out;
}

inline CVec evaluate_field(const DeviceModel& dev, double r, const std::vector<double>& thetas, double phi) {
  return evaluate_field(dev.sw_coeffs, dev.n_max, dev.k, r, thetas, phi);
}

// ---------------------------------------------------------------- JSON

inline nlohmann::json coeff_tuples(const CVec& a, int n_max) {
  const IndexMap index(n_max);
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) == cplx(0.0)) continue;
    const auto w = index.index(static_cast<std::size_t>(i));
    arr.push_back({w.n, w.m, w.mu, a(i).real(), a(i).imag()});
  }
  return arr;
}

inline CVec coeffs_from_tuples(const nlohmann::json& arr, int n_max) {
  const IndexMap index(n_max);
  CVec a = CVec::Zero(static_cast<Eigen::Index>(index.size()));
  for (const auto& t : arr)
    a(static_cast<Eigen::Index>(index.flat(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()))) =
        cplx(t.at(3).get<double>(), t.at(4).get<double>());
  return a;
}

/// Device JSON: SW coefficients as (n, m, mu = 0, re, im) tuples.
inline nlohmann::json device_json(const DeviceModel& dev) {
  auto sw = nlohmann::json::array();
  for (int n = 0; n <= dev.n_max; ++n)
    for (int m = -n; m <= n; ++m) {
      const cplx A = dev.A(n, m);
      if (A != cplx(0.0)) sw.push_back({n, m, 0, A.real(), A.imag()});
    }
  return {{"n_max", dev.n_max}, {"profile", to_string(dev.profile)}, {"seed", dev.seed},
          {"k", dev.k},         {"r_near", dev.r_near},               {"r_far", dev.r_far},
          {"beam_kappa", dev.beam_kappa}, {"sw_coeffs", sw}};
}

inline DeviceModel device_from_json(const nlohmann::json& j) {
  DeviceModel dev;
  dev.n_max = j.at("n_max").get<int>();
  dev.profile = parse_profile(j.at("profile").get<std::string>());
  dev.seed = j.at("seed").get<std::uint64_t>();
  dev.k = j.at("k").get<double>();
  dev.r_near = j.at("r_near").get<double>();
  dev.r_far = j.at("r_far").get<double>();
  dev.beam_kappa = j.value("beam_kappa", 0.0);
  dev.sw_coeffs = CVec::Zero(static_cast<Eigen::Index>(sw_count(dev.n_max)));
  for (const auto& t : j.at("sw_coeffs"))
    dev.sw_coeffs(static_cast<Eigen::Index>(sw_index(t.at(0).get<int>(), t.at(1).get<int>()))) =
        cplx(t.at(3).get<double>(), t.at(4).get<double>());
  return dev;
}

inline nlohmann::json truth_json(const GroundTruth& gt, int n_max) {
  return {{"n_max", n_max},
          {"energy_Rc", gt.energy_Rc},
          {"support_size", gt.support.size()},
          {"a", coeff_tuples(gt.a, n_max)},
          {"a_prime", coeff_tuples(gt.a_prime, n_max)}};
}

}  // namespace rgsf
