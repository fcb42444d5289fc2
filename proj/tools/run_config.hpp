#pragma once

// Resolved run configuration for the rgsf command-line tool: defaults, then a
// JSON config file, then flags. JSON keys are the flag names with '-' -> '_'.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "rgsf/errors.hpp"
#include "rgsf/experiment.hpp"
#include "rgsf/hash.hpp"

namespace rgsf::cli {

/// Radians, or a multiple of pi: "1.2", "pi", "pi/2", "35pi/36", "0.5pi".
inline double parse_angle(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto number = [&](const std::string& t) {
    if (t.empty()) throw ParameterError("bad angle '" + text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ParameterError("bad angle '" + text + "'");
    }
    if (used != t.size()) throw ParameterError("bad angle '" + text + "'");
    return v;
  };
  const auto p = s.find("pi");
  if (p == std::string::npos) return number(s);
  const std::string head = s.substr(0, p);
  std::string tail = s.substr(p + 2);
  double v = (head.empty() ? 1.0 : number(head.back() == '*' ? head.substr(0, head.size() - 1) : head)) * kPi;
  if (!tail.empty()) {
    if (tail[0] != '/') throw ParameterError("bad angle '" + text + "'");
    const double d = number(tail.substr(1));
    if (d == 0.0) throw ParameterError("bad angle '" + text + "'");
    v /= d;
  }
  return v;
}

struct RunConfig {
  int n_max = 20;
  double theta1 = 0.0;
  double theta2 = kPi / 2;
  double lambda_c = 0.05;
  std::string method = "rgsf-cs";
  std::size_t measurements = 300;  // CS methods; padded-fft always uses the grid
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  std::string profile = "axisymmetric-beam";
  std::size_t sparsity = 5;
  double kappa_lo = 4.0;
  double kappa_hi = 6.0;
  double r_near = 7.0;
  double r_far = 2000.0;
  std::string out = "rgsf_out";
  int jobs = 1;
  std::vector<double> lambda_grid = default_lambda_grid();
  SolverOptions solver;

  BeltRegion belt() const { return {theta1, theta2}; }

  void validate() const {
    if (n_max < 1 || n_max > IndexMap::kMaxBandLimit)
      throw ParameterError("n_max must lie in [1, " + std::to_string(IndexMap::kMaxBandLimit) + "]");
    belt().validate();
    if (!(lambda_c > 0.0 && lambda_c < 1.0)) throw ParameterError("lambda_c must lie in (0, 1)");
    parse_method(method);
    parse_profile(profile);
    if (measurements == 0) throw ParameterError("measurements must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ParameterError("noise_sigma must be >= 0");
    if (!(r_near > 0.0 && r_far > 0.0)) throw ParameterError("r_near and r_far must be > 0");
    if (!(kappa_lo > 0.0 && kappa_lo <= kappa_hi)) throw ParameterError("need 0 < kappa_lo <= kappa_hi");
    if (jobs < 1) throw ParameterError("jobs must be >= 1");
    if (lambda_grid.empty()) throw ParameterError("lambda_grid is empty");
    for (double l : lambda_grid)
      if (!(l > 0.0 && l < 1.0)) throw ParameterError("lambda_grid entries must lie in (0, 1)");
    if (solver.max_iters < 1 || solver.max_newton < 1) throw ParameterError("solver iteration limits must be >= 1");
    if (out.empty()) throw ParameterError("out must not be empty");
  }

  ScenarioSpec scenario() const {
    ScenarioSpec s;
    s.n_max = n_max;
    s.belt = belt();
    s.M = measurements;
    s.noise_sigma = noise_sigma;
    s.seed = seed;
    s.profile = parse_profile(profile);
    s.device.sparsity = sparsity;
    s.device.kappa_lo = kappa_lo;
    s.device.kappa_hi = kappa_hi;
    s.device.r_near = r_near;
    s.device.r_far = r_far;
    return s;
  }

  MethodConfig method_config(Method m, double lc) const {
    auto cfg = rgsf::method_config(scenario(), m, lc);
    cfg.solver = solver;
    return cfg;
  }
  MethodConfig method_config() const { return method_config(parse_method(method), lambda_c); }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"n_max", c.n_max},
          {"theta1", c.theta1},
          {"theta2", c.theta2},
          {"lambda_c", c.lambda_c},
          {"method", c.method},
          {"measurements", c.measurements},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed},
          {"profile", c.profile},
          {"sparsity", c.sparsity},
          {"kappa_lo", c.kappa_lo},
          {"kappa_hi", c.kappa_hi},
          {"r_near", c.r_near},
          {"r_far", c.r_far},
          {"out", c.out},
          {"jobs", c.jobs},
          {"lambda_grid", c.lambda_grid},
          {"solver",
           {{"feasibility_tol", c.solver.feasibility_tol},
            {"optimality_tol", c.solver.optimality_tol},
            {"bp_tol", c.solver.bp_tol},
            {"max_iters", c.solver.max_iters},
            {"max_newton", c.solver.max_newton},
            {"newton_gap", c.solver.newton_gap}}}};
}

namespace detail {

template <typename T>
T field(const nlohmann::json& v, const std::string& key) {
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && v.get<std::int64_t>() < 0) throw ParameterError(key + " must be >= 0");
    }
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ParameterError(key + " must be an integer");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError("config key '" + key + "' has the wrong type");
  }
}

inline double angle_field(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_angle(v.get<std::string>());
  throw ParameterError("config key '" + key + "' must be a number or an angle string");
}

}  // namespace detail

/// Overlays the keys present in `j`. Unknown keys are errors so typos do not
/// silently fall back to defaults.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    using detail::field;
    if (key == "n_max") c.n_max = field<int>(v, key);
    else if (key == "theta1") c.theta1 = detail::angle_field(v, key);
    else if (key == "theta2") c.theta2 = detail::angle_field(v, key);
    else if (key == "lambda_c") c.lambda_c = field<double>(v, key);
    else if (key == "method") c.method = field<std::string>(v, key);
    else if (key == "measurements") c.measurements = field<std::size_t>(v, key);
    else if (key == "noise_sigma") c.noise_sigma = field<double>(v, key);
    else if (key == "seed") c.seed = field<std::uint64_t>(v, key);
    else if (key == "profile") c.profile = field<std::string>(v, key);
    else if (key == "sparsity") c.sparsity = field<std::size_t>(v, key);
    else if (key == "kappa_lo") c.kappa_lo = field<double>(v, key);
    else if (key == "kappa_hi") c.kappa_hi = field<double>(v, key);
    else if (key == "r_near") c.r_near = field<double>(v, key);
    else if (key == "r_far") c.r_far = field<double>(v, key);
    else if (key == "out") c.out = field<std::string>(v, key);
    else if (key == "jobs") c.jobs = field<int>(v, key);
    else if (key == "lambda_grid") c.lambda_grid = field<std::vector<double>>(v, key);
    else if (key == "solver") {
      if (!v.is_object()) throw ParameterError("config key 'solver' must be an object");
      for (const auto& [sk, sv] : v.items()) {
        const std::string name = "solver." + sk;
        if (sk == "feasibility_tol") c.solver.feasibility_tol = field<double>(sv, name);
        else if (sk == "optimality_tol") c.solver.optimality_tol = field<double>(sv, name);
        else if (sk == "bp_tol") c.solver.bp_tol = field<double>(sv, name);
        else if (sk == "max_iters") c.solver.max_iters = field<int>(sv, name);
        else if (sk == "max_newton") c.solver.max_newton = field<int>(sv, name);
        else if (sk == "newton_gap") c.solver.newton_gap = field<double>(sv, name);
        else throw ParameterError("unknown config key '" + name + "'");
      }
    } else {
      throw ParameterError("unknown config key '" + key + "'");
    }
  }
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config " + path + " is not valid JSON: " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

/// Hash of the configuration, without the keys that do not change results.
inline std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("out");
  j.erase("jobs");
  return hash_hex(j.dump());
}

/// RGSF_CACHE_DIR if set, else .rgsf_cache under the working directory.
inline std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("RGSF_CACHE_DIR"); env && *env) return env;
  return ".rgsf_cache";
}

}  // namespace rgsf::cli
