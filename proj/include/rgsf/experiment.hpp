#pragma once

// One simulated measurement campaign shared by every method: a device, its
// Wigner coefficients, and the three sample sets the methods draw from
// (random belt samples, random SO(3) samples, the zero-padded grid).

#include <cstdint>

#include "rgsf/forward.hpp"
#include "rgsf/methods.hpp"
#include "rgsf/metrics.hpp"
#include "rgsf/sampling.hpp"
#include "rgsf/slepian.hpp"

namespace rgsf {

struct ScenarioSpec {
  int n_max = 20;
  BeltRegion belt{0.0, kPi / 2};
  std::size_t M = 300;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  DeviceProfile profile = DeviceProfile::axisymmetric_beam;
  DeviceOptions device;
};

struct Scenario {
  ScenarioSpec spec;
  DeviceModel device;
  CVec a;
  MeasurementSet belt_set;
  MeasurementSet full_set;
  MeasurementSet grid_set;
};

inline Scenario simulate_scenario(const ScenarioSpec& spec) {
  spec.belt.validate();
  if (spec.M == 0) throw ParameterError("measurement count must be >= 1");
  Scenario sc;
  sc.spec = spec;
  sc.device = make_device(spec.n_max, spec.seed, spec.profile, spec.device);
  sc.a = wigner_coeffs(sc.device);
  sc.belt_set = synthesize_measurements(sc.a, spec.n_max, sample_belt(spec.belt, spec.M, spec.seed), spec.noise_sigma,
                                        spec.seed, spec.belt);
  sc.full_set = synthesize_measurements(sc.a, spec.n_max, sample_full(spec.M, spec.seed), spec.noise_sigma, spec.seed);
  sc.grid_set = zero_pad_grid(
      synthesize_measurements(sc.a, spec.n_max, equiangular_grid(spec.n_max), spec.noise_sigma, spec.seed), spec.belt);
  return sc;
}

/// The sample set a method consumes.
inline const MeasurementSet& measurements_for(const Scenario& sc, Method method) {
  switch (method) {
    case Method::wd_cs_full: return sc.full_set;
    case Method::padded_fft: return sc.grid_set;
    default: return sc.belt_set;
  }
}

/// Runs `cfg.method` on the scenario and attaches metrics against the truth.
/// `basis` must be built for (n_max, belt); its cutoff must equal cfg.lambda_c
/// for rgsf-cs.
inline ReconstructionReport run_method(const MethodConfig& cfg, const Scenario& sc, const RgsfBasis& basis) {
  const auto& meas = measurements_for(sc, cfg.method);
  ReconstructionReport rep;
  switch (cfg.method) {
    case Method::rgsf_cs: rep = run_rgsf_cs(cfg, basis, meas); break;
    case Method::wd_cs_full: rep = run_wd_cs(cfg, meas, WdVariant::full); break;
    case Method::wd_cs_dropped: rep = run_wd_cs(cfg, meas, WdVariant::dropped); break;
    case Method::wd_cs_padded: rep = run_wd_cs(cfg, meas, WdVariant::padded); break;
    case Method::padded_fft: rep = run_padded_fft(cfg, meas); break;
  }
  MetricInputs in;
  in.device = &sc.device;
  in.a = &sc.a;
  in.a_hat = &rep.a_hat;
  in.sw_hat = &rep.sw_hat;
  in.basis = &basis;
  in.belt = cfg.belt;
  rep.metrics = compute_metrics(in);
  return rep;
}

inline MethodConfig method_config(const ScenarioSpec& spec, Method method, double lambda_c) {
  MethodConfig cfg;
  cfg.method = method;
  cfg.n_max = spec.n_max;
  cfg.belt = spec.belt;
  cfg.lambda_c = lambda_c;
  cfg.M = spec.M;
  cfg.seed = spec.seed;
  cfg.epsilon = 3.0 * spec.noise_sigma;
  cfg.k = spec.device.k;
  cfg.r_near = spec.device.r_near;
  return cfg;
}

/// The lambda_c grid of the sweep: 0.05 to 0.95 in steps of 0.025.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 36; ++i) g.push_back(0.05 + 0.025 * i);
  return g;
}

}  // namespace rgsf
