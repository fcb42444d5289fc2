#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "rgsf/forward.hpp"
#include "support.hpp"

using namespace rgsf;
using rgsf::test::for_all;
using rgsf::test::uniform_int;

namespace {

// Y_n^m with the Condon-Shortley phase, from the standard library's associated
// Legendre function (which omits that phase).
cplx ylm(int n, int m, double theta, double phi) {
  const int am = std::abs(m);
  const double norm = std::sqrt((2 * n + 1) / (4.0 * kPi) * std::exp(std::lgamma(n - am + 1) - std::lgamma(n + am + 1)));
  const double p = (am % 2 ? -1.0 : 1.0) * std::assoc_legendre(static_cast<unsigned>(n), static_cast<unsigned>(am), std::cos(theta));
  const cplx y = norm * p * std::polar(1.0, am * phi);
  return m >= 0 ? y : (am % 2 ? -1.0 : 1.0) * std::conj(y);
}

cplx hankel_oracle(int n, double x) {
  return {std::sph_bessel(static_cast<unsigned>(n), x), std::sph_neumann(static_cast<unsigned>(n), x)};
}

cplx field_oracle(const DeviceModel& dev, double r, double theta, double phi) {
  cplx f = 0.0;
  for (int n = 0; n <= dev.n_max; ++n)
    for (int m = -n; m <= n; ++m)
      if (dev.A(n, m) != cplx(0.0)) f += dev.A(n, m) * hankel_oracle(n, dev.k * r) * ylm(n, m, theta, phi);
  return f;
}

// Tensor rule on SO(3): Gauss-Legendre in cos(beta), uniform in alpha, gamma.
struct So3Rule {
  PointList points;
  std::vector<double> weights;
};

So3Rule so3_rule(int n_max, double x_lo = -1.0, double x_hi = 1.0) {
  So3Rule r;
  const auto gl = gauss_legendre(n_max + 2).mapped(x_lo, x_hi);
  const int na = 2 * n_max + 2;
  for (int q = 0; q < gl.order(); ++q)
    for (int i = 0; i < na; ++i)
      for (int k = 0; k < na; ++k) {
        r.points.push_back({kTwoPi * i / na, std::acos(gl.nodes[static_cast<std::size_t>(q)]), kTwoPi * k / na});
        r.weights.push_back(gl.weights[static_cast<std::size_t>(q)] * (kTwoPi / na) * (kTwoPi / na));
      }
  return r;
}

double quadrature_energy(const So3Rule& rule, const CVec& w) {
  double e = 0.0;
  for (std::size_t j = 0; j < rule.weights.size(); ++j) e += rule.weights[j] * std::norm(w(static_cast<Eigen::Index>(j)));
  return e;
}

}  // namespace

TEST(DeviceTest, ProfileParsing) {
  EXPECT_EQ(parse_profile("axisymmetric-beam"), DeviceProfile::axisymmetric_beam);
  EXPECT_EQ(parse_profile("random-sparse"), DeviceProfile::random_sparse);
  EXPECT_STREQ(to_string(DeviceProfile::random_sparse), "random-sparse");
  try {
    parse_profile("dipole");
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("axisymmetric-beam"), std::string::npos);
  }
}

TEST(DeviceTest, AxisymmetricBeamHasOnlyZeroOrder) {
  for (std::uint64_t seed : {1u, 2u, 77u}) {
    const auto dev = make_device(20, seed, DeviceProfile::axisymmetric_beam);
    for (int n = 0; n <= 20; ++n)
      for (int m = -n; m <= n; ++m)
        if (m != 0) EXPECT_EQ(dev.A(n, m), cplx(0.0));
    EXPECT_GE(dev.beam_kappa, 4.0);
    EXPECT_LE(dev.beam_kappa, 6.0);
    EXPECT_EQ(dev.r_near, 7.0);
    EXPECT_EQ(dev.r_far, 2000.0);
  }
}

TEST(DeviceTest, BeamPointsTowardTheNorthPole) {
  const auto dev = make_device(20, 5, DeviceProfile::axisymmetric_beam);
  std::vector<double> thetas;
  for (int i = 0; i <= 180; ++i) thetas.push_back(kPi * i / 180.0);
  for (double r : {dev.r_near, dev.r_far}) {
    const CVec f = evaluate_field(dev, r, thetas, 0.0);
    Eigen::Index arg;
    f.cwiseAbs().maxCoeff(&arg);
    EXPECT_EQ(arg, 0);
    // Smoothly decaying low-order spectrum.
    EXPECT_GT(std::abs(dev.A(0, 0)) * std::abs(hankel_oracle(0, dev.k * dev.r_near)),
              std::abs(dev.A(15, 0)) * std::abs(hankel_oracle(15, dev.k * dev.r_near)));
  }
}

TEST(DeviceTest, DeterministicAndSparse) {
  for (auto profile : {DeviceProfile::axisymmetric_beam, DeviceProfile::random_sparse}) {
    const auto a = make_device(12, 42, profile), b = make_device(12, 42, profile);
    EXPECT_EQ(a.sw_coeffs, b.sw_coeffs);
    EXPECT_NE(a.sw_coeffs, make_device(12, 43, profile).sw_coeffs);
  }
  for_all(20, 41, [](CounterRng& rng, int) {
    DeviceOptions opt;
    opt.sparsity = 1 + rng.below(20);
    const auto dev = make_device(uniform_int(rng, 4, 12), rng.next_u64(), DeviceProfile::random_sparse, opt);
    EXPECT_EQ(static_cast<std::size_t>((dev.sw_coeffs.array() != cplx(0.0)).count()), opt.sparsity);
  });
  DeviceOptions bad;
  bad.sparsity = 0;
  EXPECT_THROW(make_device(3, 1, DeviceProfile::random_sparse, bad), ParameterError);
  bad.sparsity = 17;
  EXPECT_THROW(make_device(3, 1, DeviceProfile::random_sparse, bad), ParameterError);
}

TEST(WignerCoeffsTest, SingleZonalModeLandsInTheZeroBlock) {
  DeviceModel dev;
  dev.n_max = 6;
  dev.sw_coeffs = CVec::Zero(static_cast<Eigen::Index>(sw_count(6)));
  dev.sw_coeffs(static_cast<Eigen::Index>(sw_index(3, 0))) = cplx(0.3, -1.2);
  const CVec a = wigner_coeffs(dev);
  const IndexMap index(6);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto w = index.index(static_cast<std::size_t>(i));
    if (w.n == 3 && w.m == 0 && w.mu == 0) {
      EXPECT_NEAR(std::abs(a(i) - std::sqrt(kTwoPi) * hankel_oracle(3, kTwoPi * 7.0) * cplx(0.3, -1.2)), 0.0, 1e-12);
    } else {
      EXPECT_EQ(a(i), cplx(0.0));
    }
  }
  dev.sw_coeffs.setZero();
  EXPECT_EQ(wigner_coeffs(dev).norm(), 0.0);
}

TEST(WignerCoeffsTest, SynthesisMatchesDirectFieldEvaluation) {
  for_all(8, 42, [](CounterRng& rng, int) {
    DeviceOptions opt;
    opt.sparsity = 6;
    const int n_max = uniform_int(rng, 2, 8);
    const auto dev = make_device(n_max, rng.next_u64(), DeviceProfile::random_sparse, opt);
    const CVec a = wigner_coeffs(dev);
    auto pts = sample_full(20, rng.next_u64());
    for (auto& p : pts) p.gamma = 0.0;
    const CVec w = evaluate_wigner_series(a, n_max, pts);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const cplx ref = field_oracle(dev, dev.r_near, pts[j].beta, pts[j].alpha);
      EXPECT_LE(std::abs(w(static_cast<Eigen::Index>(j)) - ref), 1e-8 * std::abs(ref) + 1e-14);
    }
    // gamma does not enter the ideal-probe measurement
    auto shifted = pts;
    for (auto& p : shifted) p.gamma = rng.uniform(0.0, kTwoPi);
    EXPECT_LT((evaluate_wigner_series(a, n_max, shifted) - w).norm(), 1e-12 * w.norm());
  });
}

TEST(WignerCoeffsTest, SphericalWaveBackOutInvertsTheMap) {
  for_all(10, 43, [](CounterRng& rng, int) {
    DeviceOptions opt;
    opt.sparsity = 8;
    const auto dev = make_device(uniform_int(rng, 3, 15), rng.next_u64(), DeviceProfile::random_sparse, opt);
    const CVec back = sw_from_wigner(wigner_coeffs(dev), dev.n_max, dev.k, dev.r_near);
    EXPECT_LT(rgsf::test::rel_err(back, dev.sw_coeffs), 1e-13);
  });
  EXPECT_THROW(sw_from_wigner(CVec::Zero(3), 2, kTwoPi, 7.0), ShapeError);
}

TEST(GroundTruthTest, RgsfCoefficientsAndComplementEnergy) {
  for (const BeltRegion belt : {BeltRegion{0.0, kPi / 2}, BeltRegion{0.4, 2.1}}) {
    const int n_max = 6;
    const auto basis = build_basis(belt, n_max, 0.5);
    for (std::uint64_t seed : {3u, 4u}) {
      DeviceOptions opt;
      opt.sparsity = 7;
      for (auto profile : {DeviceProfile::axisymmetric_beam, DeviceProfile::random_sparse}) {
        const auto dev = make_device(n_max, seed, profile, opt);
        const auto gt = device_to_wigner_coeffs(dev, basis);
        EXPECT_EQ(gt.a_prime, to_rgsf_coeffs(basis, gt.a));
        for (std::size_t i : gt.support) EXPECT_NE(gt.a(static_cast<Eigen::Index>(i)), cplx(0.0));
        // Complement energy by quadrature of |w|^2 over the two caps.
        double e = 0.0;
        for (auto [lo, hi] : {std::pair{std::cos(belt.theta1), 1.0}, std::pair{-1.0, std::cos(belt.theta2)}}) {
          if (hi - lo <= 0.0) continue;
          const auto rule = so3_rule(n_max, lo, hi);
          e += quadrature_energy(rule, evaluate_wigner_series(gt.a, n_max, rule.points));
        }
        EXPECT_NEAR(gt.energy_Rc, e, 1e-7 * gt.a.squaredNorm());
      }
    }
  }
  const auto basis = build_basis(BeltRegion{0.0, 1.0}, 4, 0.5);
  EXPECT_THROW(device_to_wigner_coeffs(make_device(5, 1, DeviceProfile::axisymmetric_beam), basis), ShapeError);
}

TEST(SynthesisTest, NoiselessSingleCoefficient) {
  const IndexMap index(4);
  CVec a = CVec::Zero(static_cast<Eigen::Index>(index.size()));
  const auto w = index.at(3, -1, 2);
  a(static_cast<Eigen::Index>(w.flat)) = cplx(0.7, 0.2);
  const auto pts = sample_full(30, 6);
  const auto set = synthesize_measurements(a, 4, pts, 0.0, 6);
  EXPECT_EQ(set.epsilon, 0.0);
  EXPECT_NO_THROW(set.validate());
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const cplx ref = cplx(0.7, 0.2) * wigner_D(w, pts[j].alpha, pts[j].beta, pts[j].gamma);
    EXPECT_NEAR(std::abs(set.values(static_cast<Eigen::Index>(j)) - ref), 0.0, 1e-14);
    EXPECT_EQ(set.weights(static_cast<Eigen::Index>(j)), precondition_weight(pts[j].beta));
  }
  EXPECT_THROW(synthesize_measurements(a, 4, pts, -1.0, 6), ParameterError);
}

TEST(SynthesisTest, NoiseIsSeededAndCalibrated) {
  const int n_max = 3;
  const CVec a = CVec::Zero(static_cast<Eigen::Index>(wigner_count(n_max)));
  const auto pts = sample_full(20000, 2);
  const auto s1 = synthesize_measurements(a, n_max, pts, 0.25, 10);
  const auto s2 = synthesize_measurements(a, n_max, pts, 0.25, 10);
  EXPECT_EQ(s1.values, s2.values);
  EXPECT_NE(s1.values, synthesize_measurements(a, n_max, pts, 0.25, 11).values);
  EXPECT_DOUBLE_EQ(s1.epsilon, 0.75);
  const double power = s1.values.squaredNorm() / 20000.0;
  EXPECT_NEAR(power, 0.0625, 4.0 * 0.0625 / std::sqrt(20000.0));
  double re = 0.0;
  for (Eigen::Index j = 0; j < s1.values.size(); ++j) re += s1.values(j).real() * s1.values(j).real();
  EXPECT_NEAR(re / 20000.0, 0.0625 / 2, 4.0 * 0.0625 / std::sqrt(20000.0));
}

TEST(SynthesisTest, ParsevalOverSO3) {
  for_all(6, 44, [](CounterRng& rng, int) {
    const int n_max = uniform_int(rng, 1, 8);
    const CVec a = rgsf::test::random_cvec(rng, static_cast<Eigen::Index>(wigner_count(n_max)));
    const auto rule = so3_rule(n_max);
    const auto set = synthesize_measurements(a, n_max, rule.points, 0.0, 1);
    EXPECT_NEAR(quadrature_energy(rule, set.values), a.squaredNorm(), 1e-8 * a.squaredNorm());
  });
}

TEST(FieldTest, MonopoleScaling) {
  DeviceModel dev;
  dev.n_max = 3;
  dev.sw_coeffs = CVec::Zero(16);
  dev.sw_coeffs(0) = 1.0;
  const std::vector<double> thetas{0.0, 0.4, 1.5, 2.9, kPi};
  const CVec nf = evaluate_field(dev, 7.0, thetas, 0.3);
  const CVec ff = evaluate_field(dev, 2000.0, thetas, 0.3);
  for (Eigen::Index i = 0; i < nf.size(); ++i) {
    EXPECT_NEAR(std::abs(nf(i)), 1.0 / (kTwoPi * 7.0) / std::sqrt(4 * kPi), 1e-15);
    EXPECT_NEAR(std::abs(ff(i)) / std::abs(nf(i)), 7.0 / 2000.0, 1e-13);
  }
  EXPECT_THROW(evaluate_field(dev, 0.0, thetas, 0.0), DomainError);
  EXPECT_THROW(evaluate_field(dev, -1.0, thetas, 0.0), DomainError);
}

TEST(FieldTest, MatchesSphericalHarmonicSeries) {
  for_all(6, 45, [](CounterRng& rng, int) {
    DeviceOptions opt;
    opt.sparsity = 10;
    const auto dev = make_device(uniform_int(rng, 2, 20), rng.next_u64(), DeviceProfile::random_sparse, opt);
    std::vector<double> thetas;
    for (int i = 0; i < 15; ++i) thetas.push_back(rng.uniform(0.0, kPi));
    const double phi = rng.uniform(0.0, kTwoPi);
    for (double r : {7.0, 2000.0}) {
      const CVec f = evaluate_field(dev, r, thetas, phi);
      for (std::size_t t = 0; t < thetas.size(); ++t) {
        const cplx ref = field_oracle(dev, r, thetas[t], phi);
        EXPECT_LE(std::abs(f(static_cast<Eigen::Index>(t)) - ref), 1e-8 * std::abs(ref) + 1e-15);
      }
    }
  });
}

TEST(FieldTest, AxisymmetricFieldIgnoresAzimuth) {
  const auto dev = make_device(20, 8, DeviceProfile::axisymmetric_beam);
  const auto thetas = std::vector<double>{0.1, 0.8, 1.6, 2.5};
  const CVec f0 = evaluate_field(dev, dev.r_near, thetas, 0.0);
  for (double phi : {0.5, 2.0, 5.5}) EXPECT_LT((evaluate_field(dev, dev.r_near, thetas, phi) - f0).norm(), 1e-15 * f0.norm());
}

TEST(SerializationTest, DeviceAndCoefficientJsonRoundTrip) {
  DeviceOptions opt;
  opt.sparsity = 9;
  for (auto profile : {DeviceProfile::axisymmetric_beam, DeviceProfile::random_sparse}) {
    const auto dev = make_device(10, 19, profile, opt);
    const auto back = device_from_json(nlohmann::json::parse(device_json(dev).dump()));
    EXPECT_EQ(back.sw_coeffs, dev.sw_coeffs);
    EXPECT_EQ(back.profile, dev.profile);
    EXPECT_EQ(back.seed, dev.seed);
    EXPECT_EQ(back.beam_kappa, dev.beam_kappa);
    const CVec a = wigner_coeffs(dev);
    const auto tuples = coeff_tuples(a, 10);
    for (const auto& t : tuples) EXPECT_EQ(t.size(), 5u);
    EXPECT_EQ(coeffs_from_tuples(nlohmann::json::parse(tuples.dump()), 10), a);
  }
}
