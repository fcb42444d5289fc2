#pragma once

// Sample sets on SO(3): random belt / full-domain draws, the equiangular grid
// used by the padded-FFT baseline, and the sqrt(sin beta) preconditioner.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgsf/errors.hpp"
#include "rgsf/rng.hpp"
#include "rgsf/slepian.hpp"
#include "rgsf/types.hpp"

namespace rgsf {

struct EulerPoint {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  bool operator==(const EulerPoint&) const = default;
};

using PointList = std::vector<EulerPoint>;

inline double precondition_weight(double beta) { return std::sqrt(std::max(0.0, std::sin(beta))); }

inline RVec precondition_weights(const PointList& points) {
  RVec w(static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) w(static_cast<Eigen::Index>(j)) = precondition_weight(points[j].beta);
  return w;
}

struct MeasurementSet {
  PointList points;
  CVec values;
  RVec weights;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  BeltRegion domain = BeltRegion::full();

  std::size_t size() const { return points.size(); }

  void validate() const {
    const auto m = static_cast<Eigen::Index>(points.size());
    if (values.size() != m || weights.size() != m) throw ShapeError("measurement set: points, values, weights differ in length");
    if (epsilon < 0.0) throw ParameterError("measurement set: epsilon must be >= 0");
  }
};

/// M i.i.d. triples, alpha and gamma uniform on [0, 2pi), beta uniform on the belt.
inline PointList sample_belt(const BeltRegion& belt, std::size_t count, std::uint64_t seed,
                             std::uint64_t stream = stream_id::kPositions) {
  belt.validate();
  if (count == 0) throw ParameterError("sample count must be >= 1");
  CounterRng rng(seed, stream);
  PointList out(count);
  for (auto& p : out) {
    p.alpha = kTwoPi * rng.uniform();
    p.beta = rng.uniform(belt.theta1, belt.theta2);
    p.gamma = kTwoPi * rng.uniform();
  }
  return out;
}

inline PointList sample_full(std::size_t count, std::uint64_t seed) {
  return sample_belt(BeltRegion::full(), count, seed);
}

/// Points on R^c = SO(3) minus the belt, beta uniform on [0, theta1) U (theta2, pi].
inline PointList sample_complement(const BeltRegion& belt, std::size_t count, std::uint64_t seed,
                                   std::uint64_t stream = stream_id::kPaddedPositions) {
  belt.validate();
  const double lower = belt.theta1;
  const double upper = kPi - belt.theta2;
  if (lower + upper <= 0.0) throw ParameterError("belt covers all of SO(3); R^c is empty");
  CounterRng rng(seed, stream);
  PointList out(count);
  for (auto& p : out) {
    p.alpha = kTwoPi * rng.uniform();
    const double u = rng.uniform() * (lower + upper);
    p.beta = u < lower ? u : belt.theta2 + (u - lower);
    p.gamma = kTwoPi * rng.uniform();
  }
  return out;
}

/// Number of R^c points that keeps the belt and complement draws at the same
/// density in beta as a uniform draw over [0, pi].
inline std::size_t complement_count_for(const BeltRegion& belt, std::size_t belt_count) {
  const double ratio = (kPi - belt.width()) / belt.width();
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(belt_count)));
}

/// Ring latitude of the equiangular grid: beta_j = (j + 1/2) pi / (n_max + 1).
inline double equiangular_beta(int j, int n_max) { return (j + 0.5) * kPi / (n_max + 1); }

/// (2 n_max + 1) azimuths times (n_max + 1) rings, gamma = 0. Ring-major order:
/// point (j, k) sits at position j * (2 n_max + 1) + k.
inline PointList equiangular_grid(int n_max) {
  if (n_max < 1) throw ParameterError("equiangular grid requires n_max >= 1");
  const int n_alpha = 2 * n_max + 1;
  PointList out;
  out.reserve(static_cast<std::size_t>(n_alpha * (n_max + 1)));
  for (int j = 0; j <= n_max; ++j)
    for (int k = 0; k < n_alpha; ++k) out.push_back({kTwoPi * k / n_alpha, equiangular_beta(j, n_max), 0.0});
  return out;
}

template <typename Derived>
auto precondition(const Eigen::MatrixBase<Derived>& rows, const RVec& weights) {
  if (rows.rows() != weights.size()) throw ShapeError("precondition: row count does not match weight count");
  using Scalar = typename Derived::Scalar;
  return (weights.cast<Scalar>().asDiagonal() * rows).eval();
}

// ---------------------------------------------------------------- file I/O

inline nlohmann::json measurement_header(const MeasurementSet& set) {
  return {{"epsilon", set.epsilon},
          {"seed", set.seed},
          {"count", set.size()},
          {"domain", {{"theta1", set.domain.theta1}, {"theta2", set.domain.theta2}, {"full", set.domain.is_full()}}}};
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

inline void write_measurements(const MeasurementSet& set, const std::string& csv_path, const std::string& json_path) {
  set.validate();
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path + " for writing");
  csv << "alpha,beta,gamma,re,im,weight\n";
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& p = set.points[j];
    const cplx v = set.values(static_cast<Eigen::Index>(j));
    csv << format_double(p.alpha) << ',' << format_double(p.beta) << ',' << format_double(p.gamma) << ','
        << format_double(v.real()) << ',' << format_double(v.imag()) << ','
        << format_double(set.weights(static_cast<Eigen::Index>(j))) << '\n';
  }
  if (!csv) throw IoError("write failed: " + csv_path);
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot open " + json_path + " for writing");
  js << measurement_header(set).dump(2) << '\n';
}

inline MeasurementSet read_measurements(const std::string& csv_path, const std::string& json_path) {
  MeasurementSet set;
  {
    std::ifstream js(json_path);
    if (!js) throw IoError("cannot open " + json_path);
    const auto h = nlohmann::json::parse(js);
    set.epsilon = h.at("epsilon").get<double>();
    set.seed = h.at("seed").get<std::uint64_t>();
    set.domain = {h.at("domain").at("theta1").get<double>(), h.at("domain").at("theta2").get<double>()};
  }
  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);
  if (line != "alpha,beta,gamma,re,im,weight") throw IoError(csv_path + ": unexpected header '" + line + "'");
  std::vector<cplx> vals;
  std::vector<double> wts;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    double f[6];
    for (int i = 0; i < 6; ++i) {
      std::string cell;
      if (!std::getline(is, cell, ',')) throw IoError(csv_path + ": short row");
      f[i] = std::stod(cell);
    }
    set.points.push_back({f[0], f[1], f[2]});
    vals.emplace_back(f[3], f[4]);
    wts.push_back(f[5]);
  }
  set.values = Eigen::Map<const CVec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  set.weights = Eigen::Map<const RVec>(wts.data(), static_cast<Eigen::Index>(wts.size()));
  set.validate();
  return set;
}

}  // namespace rgsf
