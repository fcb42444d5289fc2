#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "rgsf/sampling.hpp"
#include "support.hpp"

using namespace rgsf;
using rgsf::test::for_all;
using rgsf::test::uniform_int;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / ("rgsf_sampling_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(SampleBeltTest, DeterministicPerSeedAndStream) {
  const BeltRegion belt{0.2, 1.4};
  EXPECT_EQ(sample_belt(belt, 50, 9), sample_belt(belt, 50, 9));
  EXPECT_NE(sample_belt(belt, 50, 9), sample_belt(belt, 50, 10));
  EXPECT_NE(sample_belt(belt, 50, 9, 0), sample_belt(belt, 50, 9, 7));
  // A longer draw extends a shorter one.
  const auto a = sample_belt(belt, 20, 3), b = sample_belt(belt, 40, 3);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
}

TEST(SampleBeltTest, RejectsEmptyDraws) {
  EXPECT_THROW(sample_belt(BeltRegion{0.0, 1.0}, 0, 1), ParameterError);
  EXPECT_THROW(sample_belt(BeltRegion{1.0, 0.5}, 3, 1), ParameterError);
}

TEST(SampleBeltTest, PointsStayInDomain) {
  for_all(40, 31, [](CounterRng& rng, int) {
    const double t1 = rng.uniform(0.0, 3.0);
    const BeltRegion belt{t1, rng.uniform(t1 + 1e-3, kPi)};
    const auto pts = sample_belt(belt, 1 + rng.below(300), rng.next_u64());
    for (const auto& p : pts) {
      ASSERT_GE(p.beta, belt.theta1);
      ASSERT_LE(p.beta, belt.theta2);
      ASSERT_GE(p.alpha, 0.0);
      ASSERT_LT(p.alpha, kTwoPi);
      ASSERT_GE(p.gamma, 0.0);
      ASSERT_LT(p.gamma, kTwoPi);
    }
  });
}

TEST(SampleBeltTest, HemisphereMeanBeta) {
  const std::size_t m = 100000;
  const auto pts = sample_belt(BeltRegion{0.0, kPi / 2}, m, 4);
  double mean = 0.0;
  for (const auto& p : pts) mean += p.beta;
  mean /= static_cast<double>(m);
  const double se = (kPi / 2) / std::sqrt(12.0) / std::sqrt(static_cast<double>(m));
  EXPECT_LT(std::abs(mean - kPi / 4), 3.0 * se);
}

TEST(SampleBeltTest, FullDomainMoments) {
  const std::size_t m = 100000;
  const auto pts = sample_full(m, 8);
  double mb = 0.0, ma = 0.0, mg = 0.0;
  for (const auto& p : pts) {
    mb += p.beta;
    ma += p.alpha;
    mg += p.gamma;
  }
  const double n = static_cast<double>(m);
  EXPECT_LT(std::abs(mb / n - kPi / 2), 3.0 * kPi / std::sqrt(12.0 * n));
  EXPECT_LT(std::abs(ma / n - kPi), 3.0 * kTwoPi / std::sqrt(12.0 * n));
  EXPECT_LT(std::abs(mg / n - kPi), 3.0 * kTwoPi / std::sqrt(12.0 * n));
  EXPECT_EQ(pts, sample_belt(BeltRegion::full(), m, 8));
}

TEST(SampleComplementTest, PointsAvoidTheBelt) {
  const BeltRegion belt{0.5, 2.0};
  const auto pts = sample_complement(belt, 2000, 12);
  std::size_t below = 0;
  for (const auto& p : pts) {
    ASSERT_TRUE(p.beta < belt.theta1 || p.beta > belt.theta2) << p.beta;
    ASSERT_LE(p.beta, kPi);
    below += p.beta < belt.theta1;
  }
  // Lower cap holds 0.5 / (pi - 1.5) of the beta length.
  const double frac = 0.5 / (kPi - 1.5);
  EXPECT_NEAR(static_cast<double>(below) / 2000.0, frac, 4.0 * std::sqrt(frac * (1 - frac) / 2000.0));
  EXPECT_THROW(sample_complement(BeltRegion::full(), 5, 1), ParameterError);
}

TEST(SampleComplementTest, MatchesBeltDensity) {
  EXPECT_EQ(complement_count_for(BeltRegion{0.0, kPi / 2}, 300), 300u);
  EXPECT_EQ(complement_count_for(BeltRegion{0.0, kPi / 3}, 300), 600u);
  EXPECT_EQ(complement_count_for(BeltRegion::full(), 300), 0u);
}

TEST(EquiangularGridTest, Counts) {
  EXPECT_EQ(equiangular_grid(20).size(), 861u);
  EXPECT_EQ(equiangular_grid(1).size(), 6u);
  std::size_t upper = 0;
  for (const auto& p : equiangular_grid(20)) upper += p.beta <= kPi / 2;
  EXPECT_EQ(upper, 451u);
  EXPECT_THROW(equiangular_grid(0), ParameterError);
}

TEST(EquiangularGridTest, LayoutIsRingMajor) {
  for (int n_max : {1, 4, 9}) {
    const auto g = equiangular_grid(n_max);
    const int na = 2 * n_max + 1;
    for (int j = 0; j <= n_max; ++j)
      for (int k = 0; k < na; ++k) {
        const auto& p = g[static_cast<std::size_t>(j * na + k)];
        EXPECT_DOUBLE_EQ(p.alpha, kTwoPi * k / na);
        EXPECT_DOUBLE_EQ(p.beta, equiangular_beta(j, n_max));
        EXPECT_EQ(p.gamma, 0.0);
        EXPECT_GT(p.beta, 0.0);
        EXPECT_LT(p.beta, kPi);
      }
  }
}

TEST(PreconditionTest, Examples) {
  EXPECT_EQ(precondition_weight(kPi / 2), 1.0);
  EXPECT_NEAR(precondition_weight(kPi / 6), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(precondition_weight(0.0), 0.0);
  EXPECT_NEAR(precondition_weight(kPi), 0.0, 2e-8);  // sqrt of sin(fl(pi)) ~ 1.2e-16
  CMat rows(3, 2);
  rows << cplx(1, 2), cplx(3, -1), cplx(0.5, 0), cplx(-2, 1), cplx(4, 4), cplx(1, 1);
  RVec w(3);
  w << precondition_weight(kPi / 2), precondition_weight(kPi / 6), precondition_weight(1.1);
  const CMat once = precondition(rows, w);
  EXPECT_EQ(once.row(0), rows.row(0));
  EXPECT_LT((once.row(1) - std::sqrt(0.5) * rows.row(1)).norm(), 1e-15);
  const CMat twice = precondition(once, w);
  for (int j = 0; j < 3; ++j) EXPECT_LT((twice.row(j) - w(j) * w(j) * rows.row(j)).norm(), 1e-14);
  const CVec v = precondition(CVec(rows.col(0)), w);
  EXPECT_LT((v - once.col(0)).norm(), 1e-15);
  EXPECT_THROW(precondition(rows, RVec::Ones(2)), ShapeError);
}

TEST(PreconditionTest, WeightsArePositiveInsideTheOpenInterval) {
  for_all(20, 32, [](CounterRng& rng, int) {
    const auto pts = sample_full(200, rng.next_u64());
    const RVec w = precondition_weights(pts);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      ASSERT_EQ(w(i), std::sqrt(std::sin(pts[j].beta)));
      if (pts[j].beta > 0.0 && pts[j].beta < kPi) ASSERT_GT(w(i), 0.0);
    }
  });
}

TEST(MeasurementSetTest, ValidateChecksShapes) {
  MeasurementSet set;
  set.points = sample_full(4, 1);
  set.values = CVec::Zero(4);
  set.weights = precondition_weights(set.points);
  EXPECT_NO_THROW(set.validate());
  set.values = CVec::Zero(3);
  EXPECT_THROW(set.validate(), ShapeError);
  set.values = CVec::Zero(4);
  set.epsilon = -1.0;
  EXPECT_THROW(set.validate(), ParameterError);
}

TEST(MeasurementSetTest, FileRoundTripIsExact) {
  const auto dir = scratch_dir();
  for_all(5, 33, [&](CounterRng& rng, int c) {
    MeasurementSet set;
    set.domain = BeltRegion{0.0, rng.uniform(0.5, kPi)};
    set.points = sample_belt(set.domain, 1 + rng.below(50), rng.next_u64());
    set.values = rgsf::test::random_cvec(rng, static_cast<Eigen::Index>(set.points.size()));
    set.weights = precondition_weights(set.points);
    set.epsilon = rng.uniform();
    set.seed = rng.next_u64();
    const auto csv = (dir / ("m" + std::to_string(c) + ".csv")).string();
    const auto js = (dir / ("m" + std::to_string(c) + ".json")).string();
    write_measurements(set, csv, js);
    const auto back = read_measurements(csv, js);
    EXPECT_EQ(back.points, set.points);
    EXPECT_EQ(back.values, set.values);
    EXPECT_EQ(back.weights, set.weights);
    EXPECT_EQ(back.epsilon, set.epsilon);
    EXPECT_EQ(back.seed, set.seed);
    EXPECT_EQ(back.domain.theta2, set.domain.theta2);
  });
  std::ifstream in(dir / "m0.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "alpha,beta,gamma,re,im,weight");
  fs::remove_all(dir);
}

TEST(MeasurementSetTest, ReadRejectsMalformedFiles) {
  const auto dir = scratch_dir();
  const auto csv = (dir / "bad.csv").string(), js = (dir / "bad.json").string();
  std::ofstream(js) << R"({"epsilon": 0, "seed": 1, "domain": {"theta1": 0, "theta2": 1}})";
  std::ofstream(csv) << "a,b,c\n1,2,3\n";
  EXPECT_THROW(read_measurements(csv, js), IoError);
  std::ofstream(csv) << "alpha,beta,gamma,re,im,weight\n1,2,3\n";
  EXPECT_THROW(read_measurements(csv, js), IoError);
  EXPECT_THROW(read_measurements((dir / "missing.csv").string(), js), IoError);
  fs::remove_all(dir);
}
