#pragma once

// Figures of merit: field SNR and relative magnitude profiles, coefficient
// errors, energies on R / R^c / SO(3), and the m != 0 spherical-wave energy
// fraction.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgsf/errors.hpp"
#include "rgsf/forward.hpp"
#include "rgsf/slepian.hpp"
#include "rgsf/types.hpp"

namespace rgsf {

inline constexpr double kDbSentinel = 1e9;

inline double db20(double ratio) {
  if (ratio == 0.0) return -std::numeric_limits<double>::infinity();
  if (std::isinf(ratio)) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(ratio);
}

/// 20 log10(|F_hat| / max |F|), pointwise.
inline std::vector<double> relative_magnitude(const CVec& f_hat, const CVec& f) {
  if (f_hat.size() != f.size()) throw ShapeError("relative_magnitude: length mismatch");
  const double peak = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  if (!(peak > 0.0)) throw NumericError("relative_magnitude: reference field is identically zero");
  std::vector<double> out(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) out[static_cast<std::size_t>(i)] = db20(std::abs(f_hat(i)) / peak);
  return out;
}

/// 20 log10(|F| / |F - F_hat|), pointwise; a perfect match is +inf.
inline std::vector<double> snr(const CVec& f, const CVec& f_hat) {
  if (f_hat.size() != f.size()) throw ShapeError("snr: length mismatch");
  std::vector<double> out(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double err = std::abs(f(i) - f_hat(i));
    const double ref = std::abs(f(i));
    out[static_cast<std::size_t>(i)] = err == 0.0 ? (ref == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                                                : std::numeric_limits<double>::infinity())
                                                  : db20(ref / err);
  }
  return out;
}

/// +-inf become +-1e9 dB; NaN (0/0) becomes 0 dB. The flag is 1 where a sentinel was used.
inline std::pair<double, int> db_serialized(double v) {
  if (std::isnan(v)) return {0.0, 1};
  if (std::isinf(v)) return {v > 0 ? kDbSentinel : -kDbSentinel, 1};
  return {v, 0};
}

enum class EnergyRegion { SO3, R, Rc };

inline EnergyRegion parse_region(const std::string& s) {
  if (s == "SO3") return EnergyRegion::SO3;
  if (s == "R") return EnergyRegion::R;
  if (s == "Rc") return EnergyRegion::Rc;
  throw ParameterError("unknown region '" + s + "' (valid: SO3, R, Rc)");
}

/// Energy of sum a_k D_k on the region, from coefficients alone:
/// SO3 = ||a||^2, R = sum lambda |U a|^2, Rc = sum (1 - lambda) |U a|^2.
inline double belt_energy(const CVec& a, const RgsfBasis& basis, EnergyRegion region) {
  detail::check_length(basis, a.size(), "belt_energy");
  switch (region) {
    case EnergyRegion::SO3: return a.squaredNorm();
    case EnergyRegion::R: return energy_in(basis, a, basis.concentrations());
    case EnergyRegion::Rc: return energy_in(basis, a, basis.complements());
  }
  return 0.0;
}

/// sum_{m != 0} |A_n^m|^2 / sum |A_n^m|^2 for SW coefficients at sw_index(n, m).
inline double m_nonzero_energy_fraction(const CVec& sw) {
  const int n_max = static_cast<int>(std::lround(std::sqrt(static_cast<double>(sw.size())))) - 1;
  if (static_cast<std::size_t>(sw.size()) != sw_count(n_max)) throw ShapeError("SW vector length is not (n_max+1)^2");
  double total = 0.0, off = 0.0;
  for (int n = 0; n <= n_max; ++n)
    for (int m = -n; m <= n; ++m) {
      const double e = std::norm(sw(static_cast<Eigen::Index>(sw_index(n, m))));
      total += e;
      if (m != 0) off += e;
    }
  if (!(total > 0.0)) throw NumericError("m_nonzero_energy_fraction: zero total energy");
  return off / total;
}

struct CoefficientErrors {
  double l2_error = 0.0;
  std::vector<double> snr_db;       // per coefficient
  std::vector<double> phase_error;  // radians in [0, pi]; NaN where |a| <= 1e-9 max |a|
};

inline double wrapped_phase_difference(cplx x, cplx y) {
  double d = std::remainder(std::arg(x) - std::arg(y), kTwoPi);
  return std::abs(d);
}

inline CoefficientErrors coefficient_errors(const CVec& a, const CVec& a_hat) {
  if (a.size() != a_hat.size()) throw ShapeError("coefficient_errors: length mismatch");
  CoefficientErrors out;
  out.l2_error = (a - a_hat).norm();
  const double peak = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
  out.snr_db = snr(a, a_hat);
  out.phase_error.resize(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.phase_error[static_cast<std::size_t>(i)] = std::abs(a(i)) > 1e-9 * peak && peak > 0.0
                                                       ? wrapped_phase_difference(a_hat(i), a(i))
                                                       : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------- windows

/// theta_i = i pi / (count - 1), i = 0..count-1.
inline std::vector<double> theta_grid(std::size_t count = 512) {
  if (count < 2) throw ParameterError("theta grid needs at least 2 points");
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) t[i] = kPi * static_cast<double>(i) / static_cast<double>(count - 1);
  return t;
}

/// The central `fraction` of the belt in beta, trimmed symmetrically from both edges.
inline std::pair<double, double> interior_window(const BeltRegion& belt, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("interior fraction must lie in (0, 1]");
  const double trim = 0.5 * (1.0 - fraction) * belt.width();
  return {belt.theta1 + trim, belt.theta2 - trim};
}

struct WindowStats {
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Statistics of a dB profile over thetas inside [lo, hi]. +inf entries count
/// as the sentinel value; NaN entries are skipped.
inline WindowStats window_stats(const std::vector<double>& thetas, const std::vector<double>& db, double lo, double hi) {
  if (thetas.size() != db.size()) throw ShapeError("window_stats: length mismatch");
  std::vector<double> v;
  for (std::size_t i = 0; i < thetas.size(); ++i)
    if (thetas[i] >= lo && thetas[i] <= hi && !std::isnan(db[i])) v.push_back(db_serialized(db[i]).first);
  WindowStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  return s;
}

// ---------------------------------------------------------------- bundle

struct MetricBundle {
  std::vector<double> thetas;
  std::vector<double> nf_snr;
  std::vector<double> ff_snr;
  std::vector<double> relative_magnitude;     // recovered far field vs true far-field peak
  std::vector<double> relative_magnitude_true;  // true far field vs its own peak
  double coeff_l2_error = 0.0;
  double sw_m_nonzero_energy_fraction = 0.0;
  std::vector<double> phase_error;  // per SW coefficient, sw_index layout
  double E_Rc = 0.0;
  double E_hat_Rc = 0.0;
  double interior_fraction = 0.9;
  WindowStats nf_interior;
  WindowStats ff_interior;
};

struct MetricInputs {
  const DeviceModel* device = nullptr;  // truth
  const CVec* a = nullptr;              // true Wigner coefficients
  const CVec* a_hat = nullptr;
  const CVec* sw_hat = nullptr;
  const RgsfBasis* basis = nullptr;     // for R^c energies; optional
  BeltRegion belt;
  double interior_fraction = 0.9;
  std::size_t theta_count = 512;
};

inline MetricBundle compute_metrics(const MetricInputs& in) {
  if (!in.device || !in.a || !in.a_hat || !in.sw_hat) throw ParameterError("compute_metrics: missing inputs");
  const auto& dev = *in.device;
  MetricBundle mb;
  mb.thetas = theta_grid(in.theta_count);
  mb.interior_fraction = in.interior_fraction;
  const CVec nf = evaluate_field(dev, dev.r_near, mb.thetas, 0.0);
  const CVec nf_hat = evaluate_field(*in.sw_hat, dev.n_max, dev.k, dev.r_near, mb.thetas, 0.0);
  const CVec ff = evaluate_field(dev, dev.r_far, mb.thetas, 0.0);
  const CVec ff_hat = evaluate_field(*in.sw_hat, dev.n_max, dev.k, dev.r_far, mb.thetas, 0.0);
  mb.nf_snr = snr(nf, nf_hat);
  mb.ff_snr = snr(ff, ff_hat);
  mb.relative_magnitude = relative_magnitude(ff_hat, ff);
  mb.relative_magnitude_true = relative_magnitude(ff, ff);
  mb.coeff_l2_error = (*in.a - *in.a_hat).norm();
  const double sw_energy = in.sw_hat->squaredNorm();
  mb.sw_m_nonzero_energy_fraction = sw_energy > 0.0 ? m_nonzero_energy_fraction(*in.sw_hat) : 0.0;
  mb.phase_error = coefficient_errors(dev.sw_coeffs, *in.sw_hat).phase_error;
  if (in.basis) {
    mb.E_Rc = belt_energy(*in.a, *in.basis, EnergyRegion::Rc);
    mb.E_hat_Rc = belt_energy(*in.a_hat, *in.basis, EnergyRegion::Rc);
  }
  const auto [lo, hi] = interior_window(in.belt, in.interior_fraction);
  mb.nf_interior = window_stats(mb.thetas, mb.nf_snr, lo, hi);
  mb.ff_interior = window_stats(mb.thetas, mb.ff_snr, lo, hi);
  return mb;
}

inline nlohmann::json to_json(const WindowStats& s) {
  return {{"min_db", s.min}, {"median_db", s.median}, {"mean_db", s.mean}, {"count", s.count}};
}

inline nlohmann::json to_json(const MetricBundle& mb) {
  auto nan_to_null = [](const std::vector<double>& v) {
    auto arr = nlohmann::json::array();
    for (double x : v) arr.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
    return arr;
  };
  return {{"coeff_l2_error", mb.coeff_l2_error},
          {"sw_m_nonzero_energy_fraction", mb.sw_m_nonzero_energy_fraction},
          {"E_Rc", mb.E_Rc},
          {"E_hat_Rc", mb.E_hat_Rc},
          {"interior_fraction", mb.interior_fraction},
          {"nf_interior_snr", to_json(mb.nf_interior)},
          {"ff_interior_snr", to_json(mb.ff_interior)},
          {"phase_error", nan_to_null(mb.phase_error)}};
}

/// Tidy per-theta CSV: theta, nf_snr_db, nf_flag, ff_snr_db, ff_flag, rel_mag_db, rel_mag_flag, rel_mag_true_db.
inline void write_theta_csv(const MetricBundle& mb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.precision(12);
  out << "theta,nf_snr_db,nf_snr_sentinel,ff_snr_db,ff_snr_sentinel,rel_mag_db,rel_mag_sentinel,rel_mag_true_db\n";
  for (std::size_t i = 0; i < mb.thetas.size(); ++i) {
    const auto nf = db_serialized(mb.nf_snr[i]);
    const auto ff = db_serialized(mb.ff_snr[i]);
    const auto rm = db_serialized(mb.relative_magnitude[i]);
    const auto rt = db_serialized(mb.relative_magnitude_true[i]);
    out << mb.thetas[i] << ',' << nf.first << ',' << nf.second << ',' << ff.first << ',' << ff.second << ','
        << rm.first << ',' << rm.second << ',' << rt.first << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace rgsf
