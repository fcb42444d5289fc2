#pragma once

// The five reconstruction pipelines:
//   rgsf-cs        QCBP in the lambda_c-truncated, lambda^{-1/2}-scaled RGSF basis
//   wd-cs-full     QCBP in the Wigner-D basis, samples over all of SO(3)
//   wd-cs-dropped  QCBP in the Wigner-D basis, belt samples only
//   wd-cs-padded   belt samples plus zero-valued samples on R^c
//   padded-fft     equiangular grid, zeros on R^c, DFT in alpha then
//                  per-order weighted least squares in beta

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgsf/errors.hpp"
#include "rgsf/forward.hpp"
#include "rgsf/metrics.hpp"
#include "rgsf/sampling.hpp"
#include "rgsf/slepian.hpp"
#include "rgsf/solver.hpp"
#include "rgsf/specfun.hpp"

namespace rgsf {

enum class Method { rgsf_cs, wd_cs_full, wd_cs_dropped, wd_cs_padded, padded_fft };

inline constexpr const char* kMethodNames[] = {"rgsf-cs", "wd-cs-full", "wd-cs-dropped", "wd-cs-padded", "padded-fft"};

inline const char* to_string(Method m) { return kMethodNames[static_cast<int>(m)]; }

inline Method parse_method(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (s == kMethodNames[i]) return static_cast<Method>(i);
  throw ParameterError("unknown method '" + s +
                       "' (valid: rgsf-cs, wd-cs-full, wd-cs-dropped, wd-cs-padded, padded-fft)");
}

struct MethodConfig {
  Method method = Method::rgsf_cs;
  int n_max = 20;
  BeltRegion belt{0.0, kPi / 2};
  double lambda_c = 0.05;
  std::size_t M = 300;
  std::uint64_t seed = 1;
  double epsilon = 0.0;
  double k = kTwoPi;       // for the spherical-wave back-out
  double r_near = 7.0;
  SolverOptions solver;
};

struct ReconstructionReport {
  Method method = Method::rgsf_cs;
  int n_max = 0;
  CVec a_hat;
  CVec a_prime_hat;  // rgsf-cs only
  CVec sw_hat;
  std::size_t measurements = 0;       // rows in the solved system
  std::size_t nonzero_measurements = 0;
  std::size_t unknowns = 0;
  std::size_t kept_count = 0;         // rgsf-cs only
  double sigma = 0.0;
  std::optional<QcbpSolution> solver;  // absent for padded-fft
  double seconds = 0.0;
  std::optional<MetricBundle> metrics;

  bool solved() const { return !solver || solver->status == SolveStatus::converged; }
};

/// sqrt(N_D) s ln^4(N_D) / lambda_c, the measurement scaling with C_2 omitted.
inline double predict_recovery_budget(int n_max, double lambda_c, double s) {
  if (!(s >= 1.0)) throw ParameterError("target sparsity must be >= 1");
  if (!(lambda_c > 0.0 && lambda_c <= 1.0)) throw ParameterError("lambda_c must lie in (0, 1]");
  const double nd = static_cast<double>(wigner_count(n_max));
  return std::sqrt(nd) * s * std::pow(std::log(nd), 4) / lambda_c;
}

// ---------------------------------------------------------------- matrices

/// Entry (j, k) = D_{n(k)}^{mu(k) m(k)}(alpha_j, beta_j, gamma_j), canonical flat order.
inline CMat assemble_wd_matrix(const PointList& points, int n_max) {
  const IndexMap index(n_max);
  CMat A(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(index.size()));
  std::vector<double> col(static_cast<std::size_t>(n_max + 1));
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto& p = points[j];
    const auto row = static_cast<Eigen::Index>(j);
    for (std::size_t b = 0; b < index.block_count(); ++b) {
      const auto [mu, m] = index.block_orders(b);
      wigner_d_column(mu, m, n_max, p.beta, col.data());
      const cplx phase = std::polar(1.0 / kTwoPi, -(mu * p.alpha + m * p.gamma));
      const auto off = static_cast<Eigen::Index>(index.block_offset(b));
      for (std::size_t k = 0; k < index.block_dim(b); ++k) A(row, off + static_cast<Eigen::Index>(k)) = phase * col[k];
    }
  }
  return A;
}

/// Columns are lambda^{-1/2} g evaluated at the points, for kept RGSFs only,
/// in ascending flat RGSF order (basis.kept()).
inline CMat assemble_rgsf_matrix(const PointList& points, const RgsfBasis& basis) {
  const auto& index = basis.index();
  const int n_max = basis.n_max();
  std::vector<Eigen::Index> column_of(basis.size(), -1);
  for (std::size_t c = 0; c < basis.kept().size(); ++c) column_of[basis.kept()[c]] = static_cast<Eigen::Index>(c);
  RVec inv_sqrt(static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i) {
    const double lam = basis.concentrations()(i);
    inv_sqrt(i) = lam > 0.0 ? 1.0 / std::sqrt(lam) : 0.0;
  }

  CMat A(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(basis.kept_count()));
  RVec d(n_max + 1);
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto& p = points[j];
    const auto row = static_cast<Eigen::Index>(j);
    for (std::size_t b = 0; b < index.block_count(); ++b) {
      const auto off = index.block_offset(b);
      const auto dim = static_cast<Eigen::Index>(index.block_dim(b));
      bool any = false;
      for (Eigen::Index i = 0; i < dim && !any; ++i) any = column_of[off + static_cast<std::size_t>(i)] >= 0;
      if (!any) continue;
      const auto [mu, m] = index.block_orders(b);
      wigner_d_column(mu, m, n_max, p.beta, d.data());
      const RVec g = basis.blocks()[b].eigenvectors.transpose() * d.head(dim);
      const cplx phase = std::polar(1.0 / kTwoPi, -(mu * p.alpha + m * p.gamma));
      for (Eigen::Index i = 0; i < dim; ++i) {
        const auto flat = off + static_cast<std::size_t>(i);
        const auto c = column_of[flat];
        if (c >= 0) A(row, c) = phase * (g(i) * inv_sqrt(static_cast<Eigen::Index>(flat)));
      }
    }
  }
  return A;
}

// ---------------------------------------------------------------- operator

/// A matrix whose column runs share one (mu, m) and hence one phase per row:
/// A(j, c) = exp(-i(mu alpha_j + m gamma_j)) R(j, c) with R real. Stores R and
/// applies the phases on the fly, which halves the memory traffic of the dense
/// complex product inside the solver.
class PhasedBlockOperator {
public:
  struct Run {
    int mu = 0, m = 0;
    Eigen::Index col0 = 0, cols = 0;
  };

  PhasedBlockOperator(const CMat& a, const PointList& points, int n_max, std::vector<Run> runs)
      : n_max_(n_max), runs_(std::move(runs)), r_(a.rows(), a.cols()) {
    const auto M = a.rows();
    const auto width = 2 * n_max + 1;
    ear_.resize(M, width), eai_.resize(M, width), egr_.resize(M, width), egi_.resize(M, width);
    for (Eigen::Index j = 0; j < M; ++j)
      for (int k = -n_max; k <= n_max; ++k) {
        const auto& p = points[static_cast<std::size_t>(j)];
        ear_(j, k + n_max) = std::cos(k * p.alpha), eai_(j, k + n_max) = -std::sin(k * p.alpha);
        egr_(j, k + n_max) = std::cos(k * p.gamma), egi_(j, k + n_max) = -std::sin(k * p.gamma);
      }
    for (const auto& run : runs_)
      for (Eigen::Index j = 0; j < M; ++j) {
        const auto& p = points[static_cast<std::size_t>(j)];
        const cplx unphase = std::polar(1.0, run.mu * p.alpha + run.m * p.gamma);
        for (Eigen::Index c = run.col0; c < run.col0 + run.cols; ++c) r_(j, c) = (a(j, c) * unphase).real();
      }
  }

  Eigen::Index rows() const { return r_.rows(); }
  Eigen::Index cols() const { return r_.cols(); }

  CVec apply(const CVec& x) const {
    const auto M = rows();
    RVec yr = RVec::Zero(M), yi = RVec::Zero(M), tr(M), ti(M), er(M), ei(M);
    for (const auto& run : runs_) {
      tr.setZero(), ti.setZero();
      for (Eigen::Index c = run.col0; c < run.col0 + run.cols; ++c) {
        tr += r_.col(c) * x(c).real();
        ti += r_.col(c) * x(c).imag();
      }
      phase(run, er, ei);
      yr += er.cwiseProduct(tr) - ei.cwiseProduct(ti);
      yi += er.cwiseProduct(ti) + ei.cwiseProduct(tr);
    }
    CVec y(M);
    y.real() = yr, y.imag() = yi;
    return y;
  }

  CVec adjoint(const CVec& res) const {
    const auto M = rows();
    const RVec rr = res.real(), ri = res.imag();
    RVec ur(M), ui(M), er(M), ei(M);
    CVec z(cols());
    for (const auto& run : runs_) {
      phase(run, er, ei);
      ur = er.cwiseProduct(rr) + ei.cwiseProduct(ri);
      ui = er.cwiseProduct(ri) - ei.cwiseProduct(rr);
      for (Eigen::Index c = run.col0; c < run.col0 + run.cols; ++c) z(c) = cplx(r_.col(c).dot(ur), r_.col(c).dot(ui));
    }
    return z;
  }

  RVec column_norms() const { return r_.colwise().norm().transpose(); }

private:
  void phase(const Run& run, RVec& er, RVec& ei) const {
    const auto ar = ear_.col(run.mu + n_max_), ai = eai_.col(run.mu + n_max_);
    const auto gr = egr_.col(run.m + n_max_), gi = egi_.col(run.m + n_max_);
    er = ar.cwiseProduct(gr) - ai.cwiseProduct(gi);
    ei = ar.cwiseProduct(gi) + ai.cwiseProduct(gr);
  }

  int n_max_;
  std::vector<Run> runs_;
  RMat r_;
  RMat ear_, eai_, egr_, egi_;
};

inline PhasedBlockOperator wd_operator(const CMat& a, const PointList& points, int n_max) {
  const IndexMap index(n_max);
  std::vector<PhasedBlockOperator::Run> runs;
  for (std::size_t b = 0; b < index.block_count(); ++b) {
    const auto [mu, m] = index.block_orders(b);
    runs.push_back({mu, m, static_cast<Eigen::Index>(index.block_offset(b)), static_cast<Eigen::Index>(index.block_dim(b))});
  }
  return PhasedBlockOperator(a, points, n_max, std::move(runs));
}

inline PhasedBlockOperator rgsf_operator(const CMat& a, const PointList& points, const RgsfBasis& basis) {
  const auto& index = basis.index();
  const auto& kept = basis.kept();
  std::vector<PhasedBlockOperator::Run> runs;
  std::size_t c = 0;
  for (std::size_t b = 0; b < index.block_count(); ++b) {
    const std::size_t c0 = c;
    while (c < kept.size() && kept[c] < index.block_offset(b) + index.block_dim(b)) ++c;
    if (c == c0) continue;
    const auto [mu, m] = index.block_orders(b);
    runs.push_back({mu, m, static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(c - c0)});
  }
  return PhasedBlockOperator(a, points, basis.n_max(), std::move(runs));
}

// ---------------------------------------------------------------- helpers

namespace detail {

inline double qcbp_sigma(std::size_t M, double epsilon, const CVec& y) {
  return std::max(std::sqrt(static_cast<double>(M)) * epsilon, 1e-10 * y.norm());
}

inline std::size_t count_nonzero(const CVec& v) {
  std::size_t c = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) c += v(i) != cplx(0.0);
  return c;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Appends zero-valued samples on R^c at the same beta density as the belt
/// samples (so the union is uniform over [0, pi] in beta).
inline MeasurementSet pad_measurements(const MeasurementSet& belt_set, const BeltRegion& belt, std::uint64_t seed) {
  belt_set.validate();
  MeasurementSet out = belt_set;
  const std::size_t extra = complement_count_for(belt, belt_set.size());
  if (extra == 0) return out;
  const auto pts = sample_complement(belt, extra, seed);
  const auto m0 = static_cast<Eigen::Index>(belt_set.size());
  out.points.insert(out.points.end(), pts.begin(), pts.end());
  out.values.conservativeResize(m0 + static_cast<Eigen::Index>(extra));
  out.values.tail(static_cast<Eigen::Index>(extra)).setZero();
  out.weights = precondition_weights(out.points);
  out.domain = BeltRegion::full();
  return out;
}

/// Zeroes grid values at points outside the belt.
inline MeasurementSet zero_pad_grid(const MeasurementSet& grid, const BeltRegion& belt) {
  MeasurementSet out = grid;
  for (std::size_t j = 0; j < out.size(); ++j)
    if (!belt.contains(out.points[j].beta)) out.values(static_cast<Eigen::Index>(j)) = 0.0;
  return out;
}

// ---------------------------------------------------------------- pipelines

inline ReconstructionReport run_rgsf_cs(const MethodConfig& cfg, const RgsfBasis& basis, const MeasurementSet& meas) {
  meas.validate();
  if (basis.n_max() != cfg.n_max || basis.belt().theta1 != cfg.belt.theta1 || basis.belt().theta2 != cfg.belt.theta2)
    throw ConsistencyError("rgsf-cs: basis does not match (n_max, belt) of the configuration");
  if (basis.lambda_c() != cfg.lambda_c) throw ConsistencyError("rgsf-cs: basis lambda_c does not match configuration");
  const auto t0 = std::chrono::steady_clock::now();

  const CMat A = precondition(assemble_rgsf_matrix(meas.points, basis), meas.weights);
  const CVec rhs = precondition(meas.values, meas.weights);
  const double sigma = detail::qcbp_sigma(meas.size(), meas.epsilon, rhs);
  auto sol = solve_qcbp(rgsf_operator(A, meas.points, basis), rhs, sigma, cfg.solver);

  ReconstructionReport rep;
  rep.method = Method::rgsf_cs;
  rep.n_max = cfg.n_max;
  rep.a_prime_hat = CVec::Zero(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t c = 0; c < basis.kept().size(); ++c)
    rep.a_prime_hat(static_cast<Eigen::Index>(basis.kept()[c])) = sol.z(static_cast<Eigen::Index>(c));
  rep.a_hat = from_rgsf_coeffs(basis, rep.a_prime_hat);
  rep.sw_hat = sw_from_wigner(rep.a_hat, cfg.n_max, cfg.k, cfg.r_near);
  rep.measurements = meas.size();
  rep.nonzero_measurements = detail::count_nonzero(meas.values);
  rep.unknowns = basis.kept_count();
  rep.kept_count = basis.kept_count();
  rep.sigma = sigma;
  rep.solver = std::move(sol);
  rep.seconds = detail::seconds_since(t0);
  return rep;
}

enum class WdVariant { full, dropped, padded };

/// Wigner-D basis QCBP. For the padded variant `meas` holds the belt samples
/// and the zero-valued R^c samples are appended here.
inline ReconstructionReport run_wd_cs(const MethodConfig& cfg, const MeasurementSet& meas, WdVariant variant) {
  meas.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const MeasurementSet used = variant == WdVariant::padded ? pad_measurements(meas, cfg.belt, cfg.seed) : meas;

  const CMat A = precondition(assemble_wd_matrix(used.points, cfg.n_max), used.weights);
  const CVec rhs = precondition(used.values, used.weights);
  const double sigma = detail::qcbp_sigma(used.size(), used.epsilon, rhs);
  auto sol = solve_qcbp(wd_operator(A, used.points, cfg.n_max), rhs, sigma, cfg.solver);

  ReconstructionReport rep;
  rep.method = variant == WdVariant::full ? Method::wd_cs_full
               : variant == WdVariant::dropped ? Method::wd_cs_dropped
                                                : Method::wd_cs_padded;
  rep.n_max = cfg.n_max;
  rep.a_hat = sol.z;
  rep.sw_hat = sw_from_wigner(rep.a_hat, cfg.n_max, cfg.k, cfg.r_near);
  rep.measurements = used.size();
  rep.nonzero_measurements = detail::count_nonzero(used.values);
  rep.unknowns = static_cast<std::size_t>(A.cols());
  rep.sigma = sigma;
  rep.solver = std::move(sol);
  rep.seconds = detail::seconds_since(t0);
  return rep;
}

/// Classical transform on the equiangular grid (zeros already in place on
/// R^c). A DFT over each ring separates mu; then for every mu the ideal-probe
/// coefficients a_n^{0 mu}, n = |mu|..n_max, are fit by least squares over the
/// rings with row weights sqrt(sin beta_j).
inline ReconstructionReport run_padded_fft(const MethodConfig& cfg, const MeasurementSet& grid) {
  grid.validate();
  const int n_max = cfg.n_max;
  const auto expected = equiangular_grid(n_max);
  if (grid.points.size() != expected.size()) throw ParameterError("padded-fft: measurements are not the equiangular grid");
  for (std::size_t j = 0; j < expected.size(); ++j) {
    const auto& p = grid.points[j];
    const auto& q = expected[j];
    if (std::abs(p.alpha - q.alpha) > 1e-12 || std::abs(p.beta - q.beta) > 1e-12 || std::abs(p.gamma) > 1e-12)
      throw ParameterError("padded-fft: measurement " + std::to_string(j) + " is off the equiangular grid");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int n_alpha = 2 * n_max + 1;
  const int rings = n_max + 1;

  // ring_coeff(j, mu + n_max) = (1/N_alpha) sum_k w_jk e^{+i mu alpha_k}
  CMat ring_coeff(rings, n_alpha);
  for (int j = 0; j < rings; ++j)
    for (int mu = -n_max; mu <= n_max; ++mu) {
      cplx s = 0.0;
      for (int k = 0; k < n_alpha; ++k)
        s += grid.values(j * n_alpha + k) * std::polar(1.0, kTwoPi * mu * k / n_alpha);
      ring_coeff(j, mu + n_max) = s / static_cast<double>(n_alpha);
    }

  const IndexMap index(n_max);
  ReconstructionReport rep;
  rep.method = Method::padded_fft;
  rep.n_max = n_max;
  rep.a_hat = CVec::Zero(static_cast<Eigen::Index>(index.size()));
  std::vector<double> col(static_cast<std::size_t>(n_max + 1));
  for (int mu = -n_max; mu <= n_max; ++mu) {
    const int n0 = std::abs(mu);
    const int unknowns = n_max - n0 + 1;
    RMat G(rings, unknowns);
    CVec rhs(rings);
    for (int j = 0; j < rings; ++j) {
      const double beta = equiangular_beta(j, n_max);
      const double w = precondition_weight(beta);
      wigner_d_column(mu, 0, n_max, beta, col.data());
      for (int i = 0; i < unknowns; ++i) G(j, i) = w * col[static_cast<std::size_t>(i)] / kTwoPi;
      rhs(j) = w * ring_coeff(j, mu + n_max);
    }
    const auto qr = G.colPivHouseholderQr();
    const RVec re = qr.solve(RVec(rhs.real()));
    const RVec im = qr.solve(RVec(rhs.imag()));
    for (int i = 0; i < unknowns; ++i)
      rep.a_hat(static_cast<Eigen::Index>(index.flat(n0 + i, 0, mu))) = cplx(re(i), im(i));
  }
  rep.sw_hat = sw_from_wigner(rep.a_hat, n_max, cfg.k, cfg.r_near);
  rep.measurements = grid.size();
  rep.nonzero_measurements = detail::count_nonzero(grid.values);
  rep.unknowns = index.size();
  rep.seconds = detail::seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------- output

inline nlohmann::json solver_json(const QcbpSolution& s, const SolverOptions& opt) {
  return {{"status", to_string(s.status)},
          {"iterations", s.iterations},
          {"newton_steps", s.newton_steps},
          {"residual_norm", s.residual_norm},
          {"l1_norm", s.l1_norm},
          {"tolerances",
           {{"feasibility", opt.feasibility_tol},
            {"optimality", opt.optimality_tol},
            {"bp", opt.bp_tol},
            {"newton_gap", opt.newton_gap},
            {"max_iters", opt.max_iters},
            {"max_newton", opt.max_newton}}}};
}

inline nlohmann::json report_json(const ReconstructionReport& rep, const MethodConfig& cfg) {
  nlohmann::json j = {{"method", to_string(rep.method)},
                      {"n_max", rep.n_max},
                      {"theta1", cfg.belt.theta1},
                      {"theta2", cfg.belt.theta2},
                      {"measurements", rep.measurements},
                      {"nonzero_measurements", rep.nonzero_measurements},
                      {"unknowns", rep.unknowns},
                      {"sigma", rep.sigma},
                      {"seconds", rep.seconds}};
  if (rep.method == Method::rgsf_cs) {
    j["lambda_c"] = cfg.lambda_c;
    j["kept_count"] = rep.kept_count;
  }
  if (rep.solver) j["solver"] = solver_json(*rep.solver, cfg.solver);
  if (rep.metrics) j["metrics"] = to_json(*rep.metrics);
  return j;
}

/// Coefficient CSV: flat, n, m, mu, re, im (all N_D rows).
inline void write_coeff_csv(const CVec& a, int n_max, const std::string& path) {
  const IndexMap index(n_max);
  if (static_cast<std::size_t>(a.size()) != index.size()) throw ShapeError("coefficient vector length != N_D");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.precision(17);
  out << "flat,n,m,mu,re,im\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto w = index.index(i);
    const cplx v = a(static_cast<Eigen::Index>(i));
    out << i << ',' << w.n << ',' << w.m << ',' << w.mu << ',' << v.real() << ',' << v.imag() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace rgsf
