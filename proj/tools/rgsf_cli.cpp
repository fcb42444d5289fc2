// rgsf: build bases, simulate campaigns, reconstruct, sweep lambda_c, compare methods.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 a solver did not converge
// (outputs are still written).

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgsf/basis_io.hpp"
#include "rgsf/experiment.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rgsf;
using rgsf::cli::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNotConverged = 2;

// ---------------------------------------------------------------- flags

struct FlagSet {
  std::map<std::string, std::string> values;  // config key -> raw flag text
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
  std::string input_dir;
  CLI::Option* config_opt = nullptr;
  CLI::Option* input_opt = nullptr;
};

void add_flag(CLI::App* app, FlagSet& f, const std::string& key, const std::string& help) {
  std::string flag = "--" + key;
  for (auto& c : flag)
    if (c == '_') c = '-';
  f.options[key] = app->add_option(flag, f.values[key], help);
}

void add_run_flags(CLI::App* app, FlagSet& f, bool with_input) {
  f.config_opt = app->add_option("--config", f.config_path, "JSON config file; flags override it");
  add_flag(app, f, "n_max", "band limit (default 20)");
  add_flag(app, f, "theta1", "belt start, radians or multiple of pi (default 0)");
  add_flag(app, f, "theta2", "belt end, radians or multiple of pi (default pi/2)");
  add_flag(app, f, "lambda_c", "concentration cutoff (default 0.05)");
  add_flag(app, f, "method", "rgsf-cs | wd-cs-full | wd-cs-dropped | wd-cs-padded | padded-fft");
  add_flag(app, f, "measurements", "random sample count M (default 300)");
  add_flag(app, f, "seed", "master seed (default 1)");
  add_flag(app, f, "noise_sigma", "complex Gaussian noise level (default 0)");
  add_flag(app, f, "profile", "axisymmetric-beam | random-sparse");
  add_flag(app, f, "sparsity", "random-sparse nonzero count (default 5)");
  add_flag(app, f, "kappa_lo", "beam taper range, low end (default 4)");
  add_flag(app, f, "kappa_hi", "beam taper range, high end (default 6)");
  add_flag(app, f, "r_near", "measurement radius in wavelengths (default 7)");
  add_flag(app, f, "r_far", "far-field radius in wavelengths (default 2000)");
  add_flag(app, f, "out", "output directory (default rgsf_out)");
  add_flag(app, f, "jobs", "worker threads for sweep/compare (default 1)");
  add_flag(app, f, "lambda_grid", "comma-separated lambda_c values for sweep-lambda");
  add_flag(app, f, "max_iters", "solver iteration budget (default 10000)");
  if (with_input) f.input_opt = app->add_option("--input", f.input_dir, "directory written by `simulate`");
}

json flag_value(const std::string& key, const std::string& raw) {
  static const std::set<std::string> text_keys{"method", "profile", "out", "theta1", "theta2"};
  if (text_keys.count(key)) return raw;
  if (key == "lambda_grid") {
    json arr = json::array();
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
      arr.push_back(flag_value("lambda_c", item));
    return arr;
  }
  try {
    json v = json::parse(raw);
    if (!v.is_number()) throw ParameterError("");
    return v;
  } catch (const std::exception&) {
    throw ParameterError("--" + key + ": '" + raw + "' is not a number");
  }
}

RunConfig resolve(const FlagSet& f) {
  RunConfig cfg = f.config_opt && f.config_opt->count() ? cli::load_config_file(f.config_path) : RunConfig{};
  json overrides = json::object();
  for (const auto& [key, opt] : f.options) {
    if (!opt->count()) continue;
    const json v = flag_value(key, f.values.at(key));
    if (key == "max_iters") overrides["solver"]["max_iters"] = v;
    else overrides[key] = v;
  }
  cli::apply_json(cfg, overrides);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------- files

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

void write_sw_csv(const CVec& sw, int n_max, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "n,m,re,im\n";
  for (int n = 0; n <= n_max; ++n)
    for (int m = -n; m <= n; ++m) {
      const cplx v = sw(static_cast<Eigen::Index>(sw_index(n, m)));
      out << n << ',' << m << ',' << v.real() << ',' << v.imag() << '\n';
    }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------- basis cache

RgsfBasis load_or_build_basis(const RunConfig& cfg) {
  const auto dir = cli::cache_dir();
  const auto key = basis_cache_key(cfg.n_max, cfg.belt());
  const auto bin = dir / (key + ".bin");
  if (fs::exists(bin)) {
    try {
      auto basis = read_basis(bin.string());
      if (basis.n_max() == cfg.n_max && basis.belt().theta1 == cfg.theta1 && basis.belt().theta2 == cfg.theta2)
        return basis.with_cutoff(cfg.lambda_c);
      std::cerr << "warning: " << bin.string() << " does not match its key; rebuilding\n";
    } catch (const IoError& e) {
      std::cerr << "warning: " << e.what() << "; rebuilding\n";
    }
  }
  auto basis = build_basis(cfg.belt(), cfg.n_max, cfg.lambda_c);
  make_dir(dir);
  write_basis(basis, bin.string());
  write_basis_sidecar(basis, (dir / (key + ".json")).string());
  return basis;
}

// ---------------------------------------------------------------- scenario files

const char* const kSetNames[] = {"belt", "full", "grid"};

json scenario_keys(const RunConfig& c) {
  auto j = cli::to_json(c);
  for (const char* k : {"lambda_c", "method", "out", "jobs", "lambda_grid", "solver"}) j.erase(k);
  return j;
}

void write_scenario(const RunConfig& cfg, const Scenario& sc, const RgsfBasis& basis, const fs::path& dir) {
  make_dir(dir);
  write_json(dir / "device.json", device_json(sc.device));
  write_json(dir / "truth.json", truth_json(device_to_wigner_coeffs(sc.device, basis), cfg.n_max));
  const MeasurementSet* sets[] = {&sc.belt_set, &sc.full_set, &sc.grid_set};
  for (int i = 0; i < 3; ++i) {
    const std::string base = std::string("measurements_") + kSetNames[i];
    write_measurements(*sets[i], (dir / (base + ".csv")).string(), (dir / (base + ".json")).string());
  }
  json files = json::object();
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name != "manifest.json" && entry.is_regular_file()) files[name] = hash_file(entry.path().string());
  }
  write_json(dir / "manifest.json", {{"config", cli::to_json(cfg)},
                                     {"scenario", scenario_keys(cfg)},
                                     {"config_hash", cli::config_hash(cfg)},
                                     {"files", files}});
}

// Loads a `simulate` directory, checking it against cfg and its own hashes.
// Returns the scenario and the manifest hash.
std::pair<Scenario, std::string> read_scenario(const RunConfig& cfg, const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const json manifest = read_json(manifest_path);
  const json want = scenario_keys(cfg);
  const json have = manifest.at("scenario");
  for (const auto& [key, v] : want.items()) {
    if (!have.contains(key) || have.at(key) != v)
      throw ConsistencyError("input " + dir.string() + " was simulated with " + key + "=" +
                             (have.contains(key) ? have.at(key).dump() : "<missing>") + ", config has " + v.dump());
  }
  for (const auto& [name, h] : manifest.at("files").items()) {
    const auto path = dir / name;
    if (!fs::exists(path)) throw IoError("input file missing: " + path.string());
    if (hash_file(path.string()) != h.get<std::string>())
      throw ConsistencyError("input file " + path.string() + " does not match its manifest hash");
  }
  Scenario sc;
  sc.spec = cfg.scenario();
  sc.device = device_from_json(read_json(dir / "device.json"));
  if (sc.device.n_max != cfg.n_max) throw ConsistencyError("device band limit does not match n_max");
  sc.a = wigner_coeffs(sc.device);
  MeasurementSet* sets[] = {&sc.belt_set, &sc.full_set, &sc.grid_set};
  for (int i = 0; i < 3; ++i) {
    const std::string base = std::string("measurements_") + kSetNames[i];
    *sets[i] = read_measurements((dir / (base + ".csv")).string(), (dir / (base + ".json")).string());
  }
  return {std::move(sc), hash_file(manifest_path.string())};
}

// --input if given, else a fresh simulation written under <out>/inputs.
std::pair<Scenario, std::string> scenario_for(const RunConfig& cfg, const FlagSet& f, const RgsfBasis& basis) {
  if (f.input_opt && f.input_opt->count()) return read_scenario(cfg, f.input_dir);
  const fs::path dir = fs::path(cfg.out) / "inputs";
  write_scenario(cfg, simulate_scenario(cfg.scenario()), basis, dir);
  return read_scenario(cfg, dir);
}

// ---------------------------------------------------------------- runs

struct RunRecord {
  ReconstructionReport report;
  MethodConfig method_cfg;
};

json run_json(const RunRecord& r, const RunConfig& cfg, const std::string& input_hash) {
  auto j = report_json(r.report, r.method_cfg);
  j["config"] = cli::to_json(cfg);
  j["config_hash"] = cli::config_hash(cfg);
  j["input_hash"] = input_hash;
  return j;
}

void write_run(const RunRecord& r, const RunConfig& cfg, const std::string& input_hash, const fs::path& dir) {
  make_dir(dir);
  write_json(dir / "report.json", run_json(r, cfg, input_hash));
  write_coeff_csv(r.report.a_hat, cfg.n_max, (dir / "a_hat.csv").string());
  if (r.report.method == Method::rgsf_cs)
    write_coeff_csv(r.report.a_prime_hat, cfg.n_max, (dir / "a_prime_hat.csv").string());
  write_sw_csv(r.report.sw_hat, cfg.n_max, dir / "sw_hat.csv");
  write_theta_csv(*r.report.metrics, (dir / "theta_metrics.csv").string());
}

/// Runs fn(i) for i in [0, n) on `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string csv_db(double v) { return fmt(db_serialized(v).first, 6); }

// ---------------------------------------------------------------- commands

int cmd_build_basis(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto basis = build_basis(cfg.belt(), cfg.n_max, cfg.lambda_c);
  const auto dir = cli::cache_dir();
  make_dir(dir);
  const auto key = basis_cache_key(cfg.n_max, cfg.belt());
  write_basis(basis, (dir / (key + ".bin")).string());
  write_basis_sidecar(basis, (dir / (key + ".json")).string());
  std::cout << "basis " << (dir / (key + ".bin")).string() << ": " << basis.blocks().size() << " blocks, "
            << basis.size() << " eigenpairs, " << basis.kept_count() << " kept at lambda_c=" << cfg.lambda_c << " ("
            << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3) << " s)\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto basis = load_or_build_basis(cfg);
  const auto sc = simulate_scenario(cfg.scenario());
  write_scenario(cfg, sc, basis, cfg.out);
  std::cout << "simulated " << to_string(sc.device.profile) << " device (seed " << cfg.seed << ") into " << cfg.out
            << ": " << sc.belt_set.size() << " belt, " << sc.full_set.size() << " full, " << sc.grid_set.size()
            << " grid samples\n";
  return kExitOk;
}

int cmd_reconstruct(const RunConfig& cfg, const FlagSet& f) {
  const auto basis = load_or_build_basis(cfg);
  const auto [sc, input_hash] = scenario_for(cfg, f, basis);
  RunRecord r;
  r.method_cfg = cfg.method_config();
  r.report = run_method(r.method_cfg, sc, basis);
  write_run(r, cfg, input_hash, cfg.out);
  const auto& mb = *r.report.metrics;
  std::cout << cfg.method << ": nf interior SNR min/median " << fmt(mb.nf_interior.min) << "/"
            << fmt(mb.nf_interior.median) << " dB, ||a - a_hat|| " << fmt(mb.coeff_l2_error) << ", m!=0 fraction "
            << fmt(mb.sw_m_nonzero_energy_fraction, 3);
  if (r.report.solver) std::cout << ", solver " << to_string(r.report.solver->status);
  std::cout << " -> " << cfg.out << '\n';
  return r.report.solved() ? kExitOk : kExitNotConverged;
}

int cmd_sweep(const RunConfig& cfg, const FlagSet& f) {
  const auto basis = load_or_build_basis(cfg);
  const auto [sc, input_hash] = scenario_for(cfg, f, basis);
  std::vector<RunRecord> runs(cfg.lambda_grid.size());
  parallel_for(runs.size(), cfg.jobs, [&](std::size_t i) {
    const double lc = cfg.lambda_grid[i];
    RunRecord& r = runs[i];
    r.method_cfg = cfg.method_config(Method::rgsf_cs, lc);
    r.report = run_method(r.method_cfg, sc, basis.with_cutoff(lc));
    RunConfig run_cfg = cfg;
    run_cfg.method = "rgsf-cs";
    run_cfg.lambda_c = lc;
    write_run(r, run_cfg, input_hash, fs::path(cfg.out) / ("lambda_" + fmt(lc, 6)));
  });

  std::ofstream csv(fs::path(cfg.out) / "sweep.csv");
  if (!csv) throw IoError("cannot write sweep.csv");
  csv << "lambda_c,kept_count,nf_min_db,nf_median_db,nf_mean_db,ff_median_db,coeff_l2_error,status,iterations,seconds\n";
  json rows = json::array();
  bool all_converged = true;
  std::cout << "lambda_c  kept   nf_min  nf_med  ||a-a_hat||  status\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& rep = runs[i].report;
    const auto& mb = *rep.metrics;
    const char* status = to_string(rep.solver->status);
    all_converged = all_converged && rep.solved();
    csv << fmt(cfg.lambda_grid[i], 6) << ',' << rep.kept_count << ',' << csv_db(mb.nf_interior.min) << ','
        << csv_db(mb.nf_interior.median) << ',' << csv_db(mb.nf_interior.mean) << ',' << csv_db(mb.ff_interior.median)
        << ',' << fmt(mb.coeff_l2_error, 10) << ',' << status << ',' << rep.solver->iterations << ','
        << fmt(rep.seconds, 4) << '\n';
    rows.push_back({{"lambda_c", cfg.lambda_grid[i]},
                    {"kept_count", rep.kept_count},
                    {"nf_interior_snr", {{"min", mb.nf_interior.min}, {"median", mb.nf_interior.median}}},
                    {"coeff_l2_error", mb.coeff_l2_error},
                    {"status", status}});
    std::printf("%8.3f %5zu %8.2f %7.2f %12.4g  %s\n", cfg.lambda_grid[i], rep.kept_count, mb.nf_interior.min,
                mb.nf_interior.median, mb.coeff_l2_error, status);
  }
  write_json(fs::path(cfg.out) / "sweep.json", {{"config", cli::to_json(cfg)},
                                                {"config_hash", cli::config_hash(cfg)},
                                                {"input_hash", input_hash},
                                                {"rows", rows}});
  return all_converged ? kExitOk : kExitNotConverged;
}

int cmd_compare(const RunConfig& cfg, const FlagSet& f) {
  const auto basis = load_or_build_basis(cfg);
  const auto [sc, input_hash] = scenario_for(cfg, f, basis);
  std::vector<RunRecord> runs(std::size(kMethodNames));
  parallel_for(runs.size(), cfg.jobs, [&](std::size_t i) {
    RunRecord& r = runs[i];
    r.method_cfg = cfg.method_config(static_cast<Method>(i), cfg.lambda_c);
    r.report = run_method(r.method_cfg, sc, basis);
    RunConfig run_cfg = cfg;
    run_cfg.method = kMethodNames[i];
    write_run(r, run_cfg, input_hash, fs::path(cfg.out) / kMethodNames[i]);
  });

  std::ofstream csv(fs::path(cfg.out) / "compare.csv");
  if (!csv) throw IoError("cannot write compare.csv");
  csv << "method,measurements,nonzero_measurements,unknowns,nf_min_db,nf_median_db,ff_median_db,coeff_l2_error,"
         "sw_m_nonzero_fraction,status,iterations,seconds\n";
  json rows = json::array();
  bool all_converged = true;
  std::cout << "method          M  nonzero  nf_min  nf_med  ff_med  ||a-a_hat||  m!=0 frac  status\n";
  for (const auto& r : runs) {
    const auto& rep = r.report;
    const auto& mb = *rep.metrics;
    const std::string status = rep.solver ? to_string(rep.solver->status) : "direct";
    all_converged = all_converged && rep.solved();
    csv << to_string(rep.method) << ',' << rep.measurements << ',' << rep.nonzero_measurements << ',' << rep.unknowns
        << ',' << csv_db(mb.nf_interior.min) << ',' << csv_db(mb.nf_interior.median) << ','
        << csv_db(mb.ff_interior.median) << ',' << fmt(mb.coeff_l2_error, 10) << ','
        << fmt(mb.sw_m_nonzero_energy_fraction, 6) << ',' << status << ','
        << (rep.solver ? rep.solver->iterations : 0) << ',' << fmt(rep.seconds, 4) << '\n';
    rows.push_back(run_json(r, cfg, input_hash));
    std::printf("%-13s %4zu %8zu %7.2f %7.2f %7.2f %12.4g %10.3g  %s\n", to_string(rep.method), rep.measurements,
                rep.nonzero_measurements, mb.nf_interior.min, mb.nf_interior.median, mb.ff_interior.median,
                mb.coeff_l2_error, mb.sw_m_nonzero_energy_fraction, status.c_str());
  }
  write_json(fs::path(cfg.out) / "compare.json", {{"config", cli::to_json(cfg)},
                                                  {"config_hash", cli::config_hash(cfg)},
                                                  {"input_hash", input_hash},
                                                  {"runs", rows}});
  return all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Restricted-domain compressive sensing for spherical near-field measurements"};
  app.require_subcommand(1);
  FlagSet build_flags, sim_flags, rec_flags, sweep_flags, cmp_flags;
  auto* build = app.add_subcommand("build-basis", "build and cache the RGSF basis for (n_max, belt)");
  auto* sim = app.add_subcommand("simulate", "simulate a device and its belt, SO(3) and grid samples");
  auto* rec = app.add_subcommand("reconstruct", "run one method and write its report");
  auto* sweep = app.add_subcommand("sweep-lambda", "rgsf-cs over a grid of lambda_c values");
  auto* cmp = app.add_subcommand("compare", "run all five methods on shared inputs");
  add_run_flags(build, build_flags, false);
  add_run_flags(sim, sim_flags, false);
  add_run_flags(rec, rec_flags, true);
  add_run_flags(sweep, sweep_flags, true);
  add_run_flags(cmp, cmp_flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*build) return cmd_build_basis(resolve(build_flags));
    if (*sim) return cmd_simulate(resolve(sim_flags));
    if (*rec) return cmd_reconstruct(resolve(rec_flags), rec_flags);
    if (*sweep) return cmd_sweep(resolve(sweep_flags), sweep_flags);
    if (*cmp) return cmd_compare(resolve(cmp_flags), cmp_flags);
  } catch (const rgsf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}
