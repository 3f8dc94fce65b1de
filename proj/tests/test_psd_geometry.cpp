#include <cmath>

#include <gtest/gtest.h>

#include "hcw/psd_geometry.hpp"
#include "hcw/random.hpp"
#include "oracles.hpp"

namespace {

using hcw::HessianState;
using hcw::Matrix;
using hcw::Vector;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_unit(Eigen::Index d, hcw::RandomStream& rng) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v / v.norm();
}

TEST(MahalanobisNorm, IdentityMetric) {
  HessianState s(2, 1.0);
  EXPECT_DOUBLE_EQ(hcw::mahalanobis_norm(s, vec({3, 4}), false), 5.0);
  EXPECT_DOUBLE_EQ(hcw::mahalanobis_norm(s, vec({3, 4}), true), 5.0);
  EXPECT_EQ(hcw::mahalanobis_norm(s, Vector::Zero(2), false), 0.0);
}

TEST(MahalanobisNorm, DiagonalMetric) {
  HessianState s(2, 1.0);
  s.rank_one_update(vec({1, 0}), 3.0);  // H = diag(4, 1)
  EXPECT_NEAR(hcw::mahalanobis_norm(s, vec({1, 1}), false), std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(hcw::mahalanobis_norm(s, vec({1, 1}), true), std::sqrt(1.25), 1e-15);
}

TEST(MahalanobisNorm, DimensionMismatch) {
  HessianState s(2, 1.0);
  EXPECT_THROW(hcw::mahalanobis_norm(s, vec({1, 2, 3}), true), hcw::ShapeError);
}

TEST(HessianState, RankOneOnIdentity) {
  HessianState s(2, 1.0);
  s.rank_one_update(vec({1, 0}), 1.0);
  EXPECT_TRUE(s.H().isApprox(vec({2, 1}).asDiagonal().toDenseMatrix()));
  EXPECT_NEAR((s.H_inv() - Matrix(vec({0.5, 1}).asDiagonal())).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(HessianState, ZeroCoefficientLeavesStateUnchanged) {
  HessianState s(3, 2.0);
  s.rank_one_update(vec({0.1, 0.2, 0.3}), 0.5);
  const Matrix h = s.H(), hi = s.H_inv();
  const auto rounds = s.potential().rounds;
  s.rank_one_update(vec({1, 0, 0}), 0.0);
  EXPECT_EQ(s.H(), h);
  EXPECT_EQ(s.H_inv(), hi);
  EXPECT_EQ(s.potential().rounds, rounds);
}

TEST(HessianState, NegativeCoefficientThrows) {
  HessianState s(2, 1.0);
  EXPECT_THROW(s.rank_one_update(vec({1, 0}), -0.1), hcw::InvalidCoefficient);
}

TEST(HessianState, BadConstruction) {
  EXPECT_THROW(HessianState(0, 1.0), hcw::ShapeError);
  EXPECT_THROW(HessianState(2, 0.0), hcw::InvalidCoefficient);
}

TEST(HessianState, ThousandUpdatesAgreeWithDirectInverse) {
  hcw::RandomStream rng(31);
  HessianState s(5, 0.5);
  for (int i = 0; i < 1000; ++i) s.rank_one_update(random_unit(5, rng) * rng.uniform(), 3.0 * rng.uniform());
  const Matrix direct = s.H().fullPivLu().inverse();
  EXPECT_LE((direct - s.H_inv()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(HessianState, PeriodicRefactorResetsCounter) {
  hcw::RandomStream rng(32);
  HessianState s(3, 1.0);
  for (int i = 0; i < HessianState::kRefactorCadence - 1; ++i) s.rank_one_update(random_unit(3, rng), 0.1);
  EXPECT_EQ(s.updates_since_refactor(), HessianState::kRefactorCadence - 1);
  s.rank_one_update(random_unit(3, rng), 0.1);
  EXPECT_EQ(s.updates_since_refactor(), 0);
}

TEST(HessianStateProperty, InverseNormOfUnitVectorsStaysBelowInverseRootLambda) {
  hcw::RandomStream rng(33);
  for (double lambda : {0.1, 1.0, 25.0}) {
    HessianState s(4, lambda);
    for (int i = 0; i < 300; ++i) {
      s.rank_one_update(random_unit(4, rng) * rng.uniform(), 2.0 * rng.uniform());
      const Vector v = random_unit(4, rng);
      ASSERT_LE(hcw::mahalanobis_norm(s, v, true), 1.0 / std::sqrt(lambda) + 1e-12);
    }
  }
}

TEST(HessianStateProperty, InverseNormIsMonotoneUnderUpdates) {
  hcw::RandomStream rng(34);
  HessianState s(6, 0.7);
  for (int i = 0; i < 500; ++i) {
    const Vector v = random_unit(6, rng) * (3.0 * rng.uniform());
    const double before = hcw::mahalanobis_norm(s, v, true);
    s.rank_one_update(random_unit(6, rng) * rng.uniform(), 4.0 * rng.uniform());
    ASSERT_LE(hcw::mahalanobis_norm(s, v, true), before + 1e-10);
  }
}

TEST(HessianStateProperty, EllipticalPotentialStaysUnderItsBound) {
  hcw::RandomStream rng(35);
  for (double lambda : {0.05, 1.0, 10.0}) {
    HessianState s(3, lambda);
    for (int i = 0; i < 2000; ++i) s.rank_one_update(random_unit(3, rng), 1.0 + rng.uniform());
    const auto& p = s.potential();
    EXPECT_LE(p.sum, p.bound(3, lambda)) << "lambda=" << lambda;
    EXPECT_EQ(p.rounds, 2000);
  }
}

TEST(ProjectToBall, EuclideanCase) {
  const Vector p = hcw::project_to_ball(Matrix::Identity(2, 2), vec({2, 0}), 1.0);
  EXPECT_NEAR(p[0], 1.0, 1e-9);
  EXPECT_NEAR(p[1], 0.0, 1e-12);
}

TEST(ProjectToBall, InteriorCenterIsReturned) {
  Matrix m(2, 2);
  m << 3, 1, 1, 2;
  EXPECT_EQ(hcw::project_to_ball(m, vec({0.3, 0.2}), 1.0), vec({0.3, 0.2}));
}

TEST(ProjectToBall, AnisotropicMetricAgainstGrid) {
  const Matrix m = vec({4, 1}).asDiagonal();
  const Vector c = vec({2, 2});
  const Vector p = hcw::project_to_ball(m, c, 1.0);
  const auto grid = oracle::grid_projection(m, c, 1.0);
  EXPECT_NEAR(p[0], 0.933, 1e-3);
  EXPECT_NEAR(p[1], 0.359, 1e-3);
  EXPECT_NEAR(p[0], grid.coarse.theta[0], 1e-3);
  EXPECT_NEAR(p[1], grid.coarse.theta[1], 1e-3);
  EXPECT_LE(oracle::quad(m, p, c), grid.coarse.value + 1e-6);
}

TEST(ProjectToBall, Errors) {
  EXPECT_THROW(hcw::project_to_ball(Matrix::Identity(2, 2), vec({1, 2, 3}), 1.0), hcw::ShapeError);
  EXPECT_THROW(hcw::project_to_ball(Matrix::Identity(2, 2), vec({1, 2}), 0.0), hcw::DomainError);
  Matrix indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  EXPECT_THROW(hcw::project_to_ball(indefinite, vec({2, 2}), 1.0), hcw::SingularMetric);
}

TEST(ProjectToBallProperty, FeasibleAndOptimalAgainstGrid) {
  hcw::RandomStream rng(36);
  for (int k = 0; k < 40; ++k) {
    Matrix a(2, 2);
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = 2.0 * rng.uniform() - 1.0;
    const Matrix m = a.transpose() * a + 0.1 * Matrix::Identity(2, 2);
    const Vector c = vec({6.0 * rng.uniform() - 3.0, 6.0 * rng.uniform() - 3.0});
    const double S = 0.5 + 1.5 * rng.uniform();
    const Vector p = hcw::project_to_ball(m, c, S);
    ASSERT_LE(p.norm(), S + 1e-9);
    const auto grid = oracle::grid_projection(m, c, S);
    ASSERT_NEAR(oracle::quad(m, p, c), grid.refined.value, 1e-6);
  }
}

TEST(ProjectToBallProperty, SatisfiesKktInHigherDimension) {
  // At a boundary solution M (theta - c) = -nu theta with nu >= 0.
  hcw::RandomStream rng(37);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index d = 3 + k % 6;
    Matrix a = Matrix::Random(d, d);
    const Matrix m = a.transpose() * a + 0.05 * Matrix::Identity(d, d);
    const Vector c = random_unit(d, rng) * (2.0 + 3.0 * rng.uniform());
    const Vector p = hcw::project_to_ball(m, c, 1.0);
    ASSERT_NEAR(p.norm(), 1.0, 1e-9);
    const Vector g = m * (p - c);
    const double nu = -g.dot(p) / p.squaredNorm();
    ASSERT_GE(nu, -1e-9);
    ASSERT_LE((g + nu * p).norm(), 1e-6 * (1.0 + g.norm()));
  }
}

}  // namespace
