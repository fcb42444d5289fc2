#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "rgsf/solver.hpp"
#include "support.hpp"

using namespace rgsf;
using rgsf::test::for_all;
using rgsf::test::random_cvec;
using rgsf::test::uniform_int;

namespace {

CMat gaussian_matrix(CounterRng& rng, Eigen::Index m, Eigen::Index n) {
  CMat a(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0 * static_cast<double>(m));
  return a;
}

CVec sparse_vector(CounterRng& rng, Eigen::Index n, int k) {
  CVec x = CVec::Zero(n);
  int placed = 0;
  while (placed < k) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    if (x(i) != cplx(0.0)) continue;
    x(i) = cplx(rng.normal(), rng.normal());
    ++placed;
  }
  return x;
}

// min ||z||_1 s.t. ||y - z|| <= sigma is complex soft thresholding at the
// level lambda with sum min(|y_i|, lambda)^2 = sigma^2.
double soft_threshold_l1(const CVec& y, double sigma) {
  auto resid = [&](double lam) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += std::pow(std::min(std::abs(y(i)), lam), 2);
    return std::sqrt(s);
  };
  double lo = 0.0, hi = y.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (resid(mid) < sigma ? lo : hi) = mid;
  }
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) l1 += std::max(std::abs(y(i)) - lo, 0.0);
  return l1;
}

QcbpProblem problem(CMat a, CVec y, double sigma) {
  QcbpProblem p;
  p.matrix = std::move(a);
  p.rhs = std::move(y);
  p.sigma = sigma;
  return p;
}

}  // namespace

TEST(MatvecTest, Examples) {
  CounterRng rng(1, 100);
  const CVec x = random_cvec(rng, 6);
  EXPECT_EQ(matvec(CMat::Identity(6, 6), x), x);
  EXPECT_EQ(matvec(CMat::Zero(4, 6), x).norm(), 0.0);
  EXPECT_EQ(adjoint_matvec(CMat::Zero(4, 6), random_cvec(rng, 4)).norm(), 0.0);
  EXPECT_THROW(matvec(CMat::Zero(4, 5), x), ShapeError);
  EXPECT_THROW(adjoint_matvec(CMat::Zero(4, 6), x), ShapeError);
}

TEST(MatvecTest, AdjointIdentity) {
  for_all(50, 51, [](CounterRng& rng, int c) {
    const auto m = c == 0 ? 5 : uniform_int(rng, 1, 30), n = c == 0 ? 3 : uniform_int(rng, 1, 30);
    const CMat a = gaussian_matrix(rng, m, n);
    const CVec x = random_cvec(rng, n), y = random_cvec(rng, m);
    const cplx lhs = y.dot(matvec(a, x));           // <Ax, y>
    const cplx rhs = adjoint_matvec(a, y).dot(x);   // <x, A* y>
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs)));
  });
}

TEST(ProjectionTest, ComplexL1Ball) {
  for_all(50, 52, [](CounterRng& rng, int) {
    const CVec x = random_cvec(rng, uniform_int(rng, 1, 40));
    const double tau = rng.uniform(0.0, 1.5) * l1_norm(x);
    const CVec p = project_l1_ball(x, tau);
    EXPECT_LE(l1_norm(p), std::max(tau, 0.0) * (1 + 1e-12) + 1e-15);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (p(i) == cplx(0.0)) continue;
      EXPECT_NEAR(std::arg(p(i)), std::arg(x(i)), 1e-12);  // phases kept
      EXPECT_LE(std::abs(p(i)), std::abs(x(i)) + 1e-15);
    }
    // Optimality: no random point of the ball is closer.
    for (int t = 0; t < 20; ++t) {
      CVec q = project_l1_ball(p + 0.1 * random_cvec(rng, x.size()), tau);
      EXPECT_GE((x - q).norm(), (x - p).norm() - 1e-12);
    }
  });
  CVec x(2);
  x << cplx(3, 4), cplx(0, 1);
  EXPECT_EQ(project_l1_ball(x, 10.0), x);
  EXPECT_EQ(project_l1_ball(x, 0.0).norm(), 0.0);
  const CVec p = project_l1_ball(x, 4.0);
  EXPECT_NEAR(std::abs(p(0)), 4.0, 1e-14);
  EXPECT_EQ(p(1), cplx(0.0));
}

TEST(ProjectionTest, ThresholdMatchesSortedReference) {
  // Reference threshold from the sorted moduli.
  for_all(100, 53, [](CounterRng& rng, int) {
    const CVec x = random_cvec(rng, uniform_int(rng, 1, 300));
    const double tau = rng.uniform(0.01, 0.99) * l1_norm(x);
    std::vector<double> s(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) s[static_cast<std::size_t>(i)] = std::abs(x(i));
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      cum += s[k];
      const double t = (cum - tau) / static_cast<double>(k + 1);
      if (k + 1 == s.size() || s[k + 1] <= t) {
        theta = t;
        break;
      }
    }
    const CVec p = project_l1_ball(x, tau);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      EXPECT_NEAR(std::abs(p(i)), std::max(0.0, std::abs(x(i)) - theta), 1e-12);
    EXPECT_NEAR(l1_norm(p), tau, 1e-10 * tau);
  });
}

TEST(SolveQcbpTest, HandExamples) {
  {
    CMat a = CMat::Zero(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 1.0;
    CVec y(2);
    y << 2.0, 1.0;
    const auto s = solve_qcbp(problem(a, y, 0.0));
    EXPECT_EQ(s.status, SolveStatus::converged);
    EXPECT_NEAR(std::abs(s.z(0) - 1.0), 0.0, 1e-5);
    EXPECT_NEAR(std::abs(s.z(1) - 1.0), 0.0, 1e-5);
  }
  {
    CMat a(1, 2);
    a << 1.0, 2.0;
    CVec y(1);
    y << 2.0;
    const auto s = solve_qcbp(problem(a, y, 0.0));
    EXPECT_EQ(s.status, SolveStatus::converged);
    EXPECT_NEAR(std::abs(s.z(0)), 0.0, 1e-5);
    EXPECT_NEAR(std::abs(s.z(1) - 1.0), 0.0, 1e-5);
    EXPECT_NEAR(s.l1_norm, 1.0, 1e-5);
  }
  {
    CounterRng rng(3, 100);
    const auto s = solve_qcbp(problem(gaussian_matrix(rng, 7, 12), CVec::Zero(7), 0.0));
    EXPECT_EQ(s.status, SolveStatus::converged);
    EXPECT_EQ(s.z.norm(), 0.0);
  }
}

TEST(SolveQcbpTest, RejectsMalformedProblems) {
  EXPECT_THROW(solve_qcbp(problem(CMat::Zero(0, 3), CVec::Zero(0), 0.0)), ShapeError);
  EXPECT_THROW(solve_qcbp(problem(CMat::Identity(3, 3), CVec::Ones(2), 0.0)), ShapeError);
  EXPECT_THROW(solve_qcbp(problem(CMat::Identity(3, 3), CVec::Ones(3), -1.0)), ParameterError);
}

TEST(SolveQcbpTest, ZeroIsFeasibleExactlyWhenRhsFitsInSigma) {
  CounterRng rng(4, 100);
  const CMat a = gaussian_matrix(rng, 10, 20);
  const CVec y = random_cvec(rng, 10);
  const auto inside = solve_qcbp(problem(a, y, y.norm() * 1.01));
  EXPECT_EQ(inside.z.norm(), 0.0);
  EXPECT_EQ(inside.status, SolveStatus::converged);
  const auto outside = solve_qcbp(problem(a, y, y.norm() * 0.5));
  EXPECT_GT(outside.z.norm(), 0.0);
}

TEST(SolveQcbpTest, IdentityMatchesSoftThresholdOracle) {
  for_all(20, 53, [](CounterRng& rng, int) {
    const CVec y = random_cvec(rng, 8);
    const double sigma = y.norm() / 2.0;
    const auto s = solve_qcbp(problem(CMat::Identity(8, 8), y, sigma));
    EXPECT_EQ(s.status, SolveStatus::converged);
    EXPECT_LE(s.residual_norm, sigma * (1 + 1e-6));
    EXPECT_NEAR(s.l1_norm, soft_threshold_l1(y, sigma), 1e-6 * std::max(1.0, s.l1_norm));
  });
}

TEST(SolveQcbpTest, RecoversGaussianSparseInstances) {
  int recovered = 0;
  for_all(100, 54, [&](CounterRng& rng, int) {
    const CMat a = gaussian_matrix(rng, 40, 100);
    const CVec x = sparse_vector(rng, 100, 5);
    const auto s = solve_qcbp(problem(a, a * x, 0.0));
    const double err = (s.z - x).norm() / x.norm();
    EXPECT_LE(err, 1e-5);
    EXPECT_EQ(s.status, SolveStatus::converged);
    recovered += err <= 1e-5;
  });
  EXPECT_EQ(recovered, 100);
}

TEST(SolveQcbpTest, ConvergedSolutionsAreFeasible) {
  for_all(30, 55, [](CounterRng& rng, int) {
    const auto m = uniform_int(rng, 5, 30), n = uniform_int(rng, 5, 60);
    const CMat a = gaussian_matrix(rng, m, n);
    const CVec y = a * sparse_vector(rng, n, uniform_int(rng, 1, 4)) + 0.05 * random_cvec(rng, m);
    // sigma above the exact-fit tolerance, so convergence means the QCBP constraint.
    const double sigma = rng.uniform(1e-3, 0.9) * y.norm();
    const auto s = solve_qcbp(problem(a, y, sigma));
    if (s.status == SolveStatus::converged) EXPECT_LE(s.residual_norm, sigma * (1 + 1e-6));
    EXPECT_NEAR(s.residual_norm, (y - a * s.z).norm(), 1e-12 * y.norm());
    EXPECT_NEAR(s.l1_norm, l1_norm(s.z), 1e-12 * std::max(1.0, s.l1_norm));
  });
}

TEST(SolveQcbpTest, ExactFitCountsAsConvergedAtBpTolerance) {
  CounterRng rng(6, 100);
  const CMat a = gaussian_matrix(rng, 20, 50);
  const CVec y = a * sparse_vector(rng, 50, 3);
  const auto s = solve_qcbp(problem(a, y, 0.0));
  EXPECT_EQ(s.status, SolveStatus::converged);
  EXPECT_LE(s.residual_norm, 1e-6 * y.norm() * (1 + 1e-6));
}

TEST(SolveQcbpTest, ValueFunctionIsMonotoneAcrossNewtonSteps) {
  for_all(30, 56, [](CounterRng& rng, int) {
    const CMat a = gaussian_matrix(rng, 30, 80);
    const CVec y = a * sparse_vector(rng, 80, uniform_int(rng, 1, 8)) + 0.01 * random_cvec(rng, 30);
    const auto s = solve_qcbp(problem(a, y, rng.uniform(0.0, 0.1) * y.norm()));
    ASSERT_EQ(s.tau_history.size(), s.phi_history.size());
    // phi_history[i] is reached at the tau in force before update i.
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 1; i < s.phi_history.size(); ++i) pts.emplace_back(s.tau_history[i - 1], s.phi_history[i]);
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LE(pts[i].second, pts[i - 1].second * (1 + 1e-6));
  });
}

TEST(SolveQcbpTest, ScalingEquivariance) {
  for_all(15, 57, [](CounterRng& rng, int) {
    const CMat a = gaussian_matrix(rng, 30, 70);
    const CVec x = sparse_vector(rng, 70, 4);
    const CVec y = a * x + 0.01 * random_cvec(rng, 30);
    const double sigma = 0.02 * y.norm();
    const auto base = solve_qcbp(problem(a, y, sigma));
    for (double c : {1e-3, 7.0, 1e4}) {
      const auto scaled = solve_qcbp(problem(c * a, c * y, c * sigma));
      EXPECT_LE((scaled.z - base.z).norm(), 1e-5 * base.z.norm());
      EXPECT_EQ(scaled.status, base.status);
    }
  });
}

TEST(SolveQcbpTest, DetectsInfeasibleTargets) {
  // rhs orthogonal to the range of A cannot be fit below its norm.
  CMat a = CMat::Zero(3, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  CVec y(3);
  y << 1.0, 0.5, 2.0;
  const auto s = solve_qcbp(problem(a, y, 0.5));
  EXPECT_EQ(s.status, SolveStatus::infeasible_detected);
  EXPECT_NEAR(s.residual_norm, 2.0, 1e-6);
  EXPECT_EQ(solve_qcbp(problem(CMat::Zero(3, 2), y, 0.5)).status, SolveStatus::infeasible_detected);
}

TEST(SolveQcbpTest, IterationBudgetIsRespected) {
  CounterRng rng(8, 100);
  const CMat a = gaussian_matrix(rng, 40, 100);
  const CVec y = a * sparse_vector(rng, 100, 12);
  auto p = problem(a, y, 0.0);
  p.options.max_iters = 5;
  const auto s = solve_qcbp(p);
  EXPECT_EQ(s.status, SolveStatus::iteration_limit);
  EXPECT_LE(s.iterations, 5);
  EXPECT_LT(s.residual_norm, y.norm());
  EXPECT_STREQ(to_string(SolveStatus::iteration_limit), "iteration-limit");
  EXPECT_STREQ(to_string(SolveStatus::infeasible_detected), "infeasible-detected");
}
