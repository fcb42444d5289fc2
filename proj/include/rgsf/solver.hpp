#pragma once

// Quadratically constrained basis pursuit,
//   minimize ||z||_1  subject to  ||y - A z||_2 <= sigma,
// by Pareto-curve root finding: Newton steps on
//   phi(tau) = min_{||z||_1 <= tau} ||y - A z||_2
// toward phi(tau) = sigma, each LASSO subproblem solved by spectral projected
// gradient with a nonmonotone Armijo line search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rgsf/errors.hpp"
#include "rgsf/types.hpp"

namespace rgsf {

inline CVec matvec(const CMat& a, const CVec& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector " +
                                             std::to_string(x.size()));
  return a * x;
}

inline CVec adjoint_matvec(const CMat& a, const CVec& y) {
  if (a.rows() != y.size()) throw ShapeError("adjoint_matvec: matrix has " + std::to_string(a.rows()) +
                                             " rows, vector " + std::to_string(y.size()));
  return a.adjoint() * y;
}

struct SolverOptions {
  double feasibility_tol = 1e-6;  // relative slack on the residual constraint
  double optimality_tol = 1e-6;   // relative primal-dual gap of the l1 norm at termination
  double bp_tol = 1e-6;           // residual <= bp_tol ||y|| counts as an exact fit
  int max_iters = 10000;          // total projected-gradient iterations
  int max_newton = 40;
  int line_search_memory = 10;
  // Duality gap, relative to the subproblem objective, required before tau
  // moves. Looser subproblem solves let Newton overshoot the root.
  double newton_gap = 1e-2;
};

struct QcbpProblem {
  CMat matrix;
  CVec rhs;
  double sigma = 0.0;
  SolverOptions options;
};

enum class SolveStatus { converged, iteration_limit, infeasible_detected };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::iteration_limit: return "iteration-limit";
    case SolveStatus::infeasible_detected: return "infeasible-detected";
  }
  return "?";
}

struct QcbpSolution {
  CVec z;
  double residual_norm = 0.0;
  double l1_norm = 0.0;
  int iterations = 0;
  int newton_steps = 0;
  SolveStatus status = SolveStatus::iteration_limit;
  std::vector<double> tau_history;  // tau at each Newton update
  std::vector<double> phi_history;  // phi(tau) reached before each update
};

inline double l1_norm(const CVec& z) { return z.cwiseAbs().sum(); }

/// Euclidean projection onto {z : sum |z_i| <= tau}: shrink moduli by the
/// simplex threshold, keep phases. The threshold comes from Michelot's
/// fixed-point iteration (drop entries below the running estimate, re-average),
/// which takes a handful of linear passes instead of a sort.
inline CVec project_l1_ball(const CVec& x, double tau) {
  const RVec v = x.cwiseAbs();
  if (v.sum() <= tau) return x;
  if (tau <= 0.0) return CVec::Zero(x.size());
  std::vector<double> active(v.data(), v.data() + v.size());
  double sum = v.sum();
  double theta = (sum - tau) / static_cast<double>(active.size());
  for (;;) {
    std::size_t keep = 0;
    double kept_sum = 0.0;
    for (const double a : active)
      if (a > theta) {
        active[keep++] = a;
        kept_sum += a;
      }
    const bool changed = keep != active.size();
    active.resize(keep);
    sum = kept_sum;
    theta = (sum - tau) / static_cast<double>(keep);
    if (!changed) break;
  }
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double mag = v(i) - theta;
    out(i) = mag > 0.0 ? x(i) * (mag / v(i)) : cplx(0.0);
  }
  return out;
}

/// Dense matrix as a solver operator. Any type with rows(), cols(), apply(x),
/// adjoint(r) and column_norms() can stand in for it.
class DenseOperator {
public:
  explicit DenseOperator(const CMat& a) : a_(a) {}
  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index cols() const { return a_.cols(); }
  CVec apply(const CVec& x) const { return a_ * x; }
  CVec adjoint(const CVec& r) const { return a_.adjoint() * r; }
  RVec column_norms() const { return a_.colwise().norm().transpose(); }

private:
  const CMat& a_;
};

template <typename Op>
QcbpSolution solve_qcbp(const Op& op, const CVec& rhs, double sigma_in, const SolverOptions& opt) {
  if (op.rows() < 1 || op.cols() < 1) throw ShapeError("solve_qcbp: empty matrix");
  if (op.rows() != rhs.size()) throw ShapeError("solve_qcbp: rhs length does not match matrix rows");
  if (!(sigma_in >= 0.0)) throw ParameterError("solve_qcbp: sigma must be >= 0");

  QcbpSolution sol;
  sol.z = CVec::Zero(op.cols());
  const double b_norm = rhs.norm();
  if (b_norm <= sigma_in || b_norm == 0.0) {
    sol.residual_norm = b_norm;
    sol.status = SolveStatus::converged;
    return sol;
  }

  // Work with unit-norm data and unit largest column so every tolerance is
  // relative and the iterates do not depend on the overall scale of (A, y).
  const double a_scale = op.column_norms().maxCoeff();
  if (!(a_scale > 0.0)) {
    sol.residual_norm = b_norm;
    sol.status = SolveStatus::infeasible_detected;
    return sol;
  }
  const double inv_a = 1.0 / a_scale;
  auto A_mul = [&](const CVec& v) -> CVec { return op.apply(v) * inv_a; };
  auto A_adj = [&](const CVec& v) -> CVec { return op.adjoint(v) * inv_a; };
  const CVec b = rhs / b_norm;
  const double sigma = sigma_in / b_norm;
  const double z_scale = b_norm / a_scale;
  const double target = std::max(sigma, opt.bp_tol);

  CVec x = CVec::Zero(op.cols());
  CVec r = b;
  CVec g = -A_adj(r);
  double f = 0.5 * r.squaredNorm();
  double tau = 0.0;
  double alpha = 1.0;
  std::deque<double> f_hist{f};
  int iter = 0;

  auto reset_state = [&]() {
    r = b - A_mul(x);
    g = -A_adj(r);
    f = 0.5 * r.squaredNorm();
    f_hist.assign(1, f);
  };

  sol.status = SolveStatus::iteration_limit;
  for (;;) {
    const double r_norm = std::sqrt(2.0 * f);
    const double g_norm = g.cwiseAbs().maxCoeff();
    const double gap = (r.dot(r - b)).real() + tau * g_norm;
    // ||b|| = 1, so these are relative to the data scale.

    const bool exact_fit = r_norm <= opt.bp_tol * (1.0 + opt.feasibility_tol);
    if (exact_fit) {
      sol.status = SolveStatus::converged;
      break;
    }
    if (r_norm <= sigma * (1.0 + opt.feasibility_tol) && g_norm > 0.0) {
      // Feasible. y = r / ||A^H r||_inf is dual feasible, so this lower-bounds
      // the optimal l1 norm. Inside the feasibility slack the primal can sit
      // below the optimum too, hence the two-sided test.
      const double dual = (b.dot(r).real() - sigma * r_norm) / g_norm;
      const double primal = l1_norm(x);
      if (std::abs(primal - dual) <= opt.optimality_tol * primal) {
        sol.status = SolveStatus::converged;
        break;
      }
    }
    if (g_norm <= 1e-14 * r_norm && r_norm > target * (1.0 + opt.feasibility_tol)) {
      // r is orthogonal to the range of A: no tau reaches sigma.
      sol.status = SolveStatus::infeasible_detected;
      break;
    }
    if (iter >= opt.max_iters) break;

    // Near the root the QCBP gap is the Newton correction plus gap / ||A^H r||_inf,
    // so the subproblem must be solved to the final tolerance before tau moves.
    const bool near_root = std::abs(r_norm - sigma) <= opt.feasibility_tol * sigma;
    const bool subproblem_done =
        gap <= (near_root ? 0.5 * opt.optimality_tol * tau * g_norm : opt.newton_gap * f);
    if (subproblem_done || tau == 0.0) {
      if (sol.newton_steps >= opt.max_newton) break;
      sol.phi_history.push_back(r_norm * b_norm);
      const double tau_old = tau;
      tau = std::max(0.0, tau + r_norm * (r_norm - target) / g_norm);
      sol.tau_history.push_back(tau * z_scale);
      ++sol.newton_steps;
      if (tau < tau_old) {
        x = project_l1_ball(x, tau);
        reset_state();
      } else {
        f_hist.assign(1, f);
      }
    }

    // Projected gradient step with nonmonotone backtracking.
    const CVec dx = project_l1_ball(x - alpha * g, tau) - x;
    const CVec adx = A_mul(dx);
    const double gtd = (g.dot(dx)).real();
    if (dx.squaredNorm() == 0.0 || gtd >= 0.0) {
      // Stationary for this tau; force a Newton update next round.
      if (sol.newton_steps >= opt.max_newton) break;
      sol.phi_history.push_back(r_norm * b_norm);
      const double step_tau = r_norm * (r_norm - target) / g_norm;
      if (!(step_tau > 0.0)) {
        ++iter;
        break;
      }
      tau += step_tau;
      sol.tau_history.push_back(tau * z_scale);
      ++sol.newton_steps;
      ++iter;
      continue;
    }
    const double f_max = *std::max_element(f_hist.begin(), f_hist.end());
    double step = 1.0;
    CVec r_new;
    double f_new = f;
    for (int ls = 0; ls < 40; ++ls) {
      r_new = r - step * adx;
      f_new = 0.5 * r_new.squaredNorm();
      if (f_new <= f_max + 1e-4 * step * gtd) break;
      step *= 0.5;
    }
    const CVec x_new = x + step * dx;
    const CVec g_new = -A_adj(r_new);
    const CVec s = x_new - x;
    const CVec y = g_new - g;
    const double sts = s.squaredNorm();
    const double sty = (s.dot(y)).real();
    alpha = sty <= 0.0 ? 1e16 : std::clamp(sts / sty, 1e-16, 1e16);

    x = x_new;
    r = r_new;
    g = g_new;
    f = f_new;
    f_hist.push_back(f);
    if (static_cast<int>(f_hist.size()) > opt.line_search_memory) f_hist.pop_front();
    ++iter;
    if (iter % 200 == 0) {
      // Refresh the residual to stop drift from the incremental update.
      r = b - A_mul(x);
      g = -A_adj(r);
      f = 0.5 * r.squaredNorm();
    }
  }

  sol.z = x * z_scale;
  sol.residual_norm = (rhs - op.apply(sol.z)).norm();
  sol.l1_norm = l1_norm(sol.z);
  sol.iterations = iter;
  return sol;
}

inline QcbpSolution solve_qcbp(const QcbpProblem& prob) {
  return solve_qcbp(DenseOperator(prob.matrix), prob.rhs, prob.sigma, prob.options);
}

}  // namespace rgsf
