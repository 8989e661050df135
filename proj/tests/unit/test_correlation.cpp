#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ega/correlation.hpp"
#include "ega/datagen.hpp"
#include "helpers.hpp"

using namespace ega;
using ega::testing::random_correlation;

namespace {

// P(X <= h, Y <= k) = int_{-inf}^{h} phi(x) Phi((k - rho x) / sqrt(1 - rho^2)) dx
double bvn_oracle(double h, double k, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  auto f = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * norm_cdf((k - rho * x) / s);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -40.0, h, 25, 1e-14);
}

// Expected counts of a dichotomized standard bivariate normal.
ContingencyTable2x2 exact_table(double tx, double ty, double rho, double total) {
  const double p00 = bivariate_normal_cdf(tx, ty, rho);
  const double px0 = norm_cdf(tx), py0 = norm_cdf(ty);
  return {total * p00, total * (px0 - p00), total * (py0 - p00), total * (1.0 - px0 - py0 + p00)};
}

void expect_correlation_invariants(const CorrelationMatrix& r) {
  const Matrix& m = r.values;
  EXPECT_LE((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE((m.diagonal().array() == 1.0).all());
  EXPECT_LE(m.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(), -1e-8);
}

}  // namespace

TEST(SymEigen, AnalyticCases) {
  EXPECT_TRUE(sym_eigen(Matrix::Identity(3, 3)).values.isApprox(Vector::Ones(3)));
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const auto e = sym_eigen(m);
  EXPECT_NEAR(e.values(0), 3.0, 1e-14);
  EXPECT_NEAR(e.values(1), 1.0, 1e-14);
}

TEST(SymEigen, ReconstructsRandomSymmetricMatrices) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    const auto e = sym_eigen(a);
    EXPECT_LE((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - a).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
    for (int i = 1; i < 8; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
  }
}

TEST(SymEigen, RejectsAsymmetricInput) {
  Matrix m(2, 2);
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(sym_eigen(m), InputError);
}

TEST(BivariateNormal, ClosedForms) {
  for (double h : {-2.0, -0.3, 0.0, 1.7})
    for (double k : {-1.1, 0.0, 0.4, 2.5}) EXPECT_NEAR(bivariate_normal_cdf(h, k, 0.0), norm_cdf(h) * norm_cdf(k), 1e-15);
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, 0.5), 0.25 + std::asin(0.5) / (2 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(bivariate_normal_cdf(-1, 0, 1.0), 0.158655253931457, 1e-12);
  EXPECT_NEAR(bivariate_normal_cdf(0.5, -0.5, -1.0), norm_cdf(0.5) + norm_cdf(-0.5) - 1.0, 1e-15);
}

TEST(BivariateNormal, MatchesOneDimensionalIntegralOracle) {
  double worst = 0.0;
  for (double h = -3.5; h <= 3.5; h += 0.7)
    for (double k = -3.2; k <= 3.2; k += 0.8)
      for (double rho : {-0.999, -0.95, -0.93, -0.8, -0.5, -0.29, 0.1, 0.31, 0.6, 0.74, 0.76, 0.92, 0.926, 0.99, 0.999})
        worst = std::max(worst, std::abs(bivariate_normal_cdf(h, k, rho) - bvn_oracle(h, k, rho)));
  EXPECT_LE(worst, 1e-7);
}

TEST(Pearson, IdenticalAndNegatedColumns) {
  Matrix x(5, 3);
  x << 1, 1, -1, 2, 2, -2, 4, 4, -4, 3, 3, -3, 7, 7, -7;
  const auto r = pearson_matrix(x);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(r(0, 2), -1.0, 1e-15);
}

TEST(Pearson, PopulationCheck) {
  Matrix sigma(2, 2);
  sigma << 1, 0.5, 0.5, 1;
  const auto data = sample_dataset(sigma, 100000, 17);
  EXPECT_NEAR(pearson_matrix(data.values)(0, 1), 0.5, 0.01);
}

TEST(Pearson, ConstantColumnIsNamed) {
  Matrix x(4, 3);
  x << 1, 5, 0, 2, 5, 1, 3, 5, 0, 4, 5, 1;
  try {
    pearson_matrix(x);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
  EXPECT_THROW(pearson_matrix(Matrix::Ones(2, 2)), InputError);
}

TEST(Tetrachoric, SymmetricTableSigns) {
  const auto pos = tetrachoric_pair({40, 10, 10, 40});
  const auto neg = tetrachoric_pair({10, 40, 40, 10});
  EXPECT_GT(pos.rho, 0.0);
  EXPECT_EQ(neg.rho, -pos.rho);
  EXPECT_NEAR(tetrachoric_pair({25, 25, 25, 25}).rho, 0.0, 1e-6);
}

TEST(Tetrachoric, QuadrantFormulaRecovery) {
  // (1/3, 1/6, 1/6, 1/3): p00 = 1/4 + asin(rho)/(2 pi) gives rho = sin(pi/6) = 0.5
  EXPECT_NEAR(tetrachoric_pair({1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3}).rho, 0.5, 1e-2);
  EXPECT_NEAR(tetrachoric_pair({400, 200, 200, 400}).rho, 0.5, 1e-6);
}

TEST(Tetrachoric, ExactTablesRecoverRho) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const double tx = 2.0 * rng.uniform() - 1.0;
    const double ty = 2.4 * rng.uniform() - 1.2;
    const double rho = 1.8 * rng.uniform() - 0.9;
    const auto est = tetrachoric_pair(exact_table(tx, ty, rho, 1000.0));
    EXPECT_NEAR(est.rho, rho, 1e-3) << tx << ' ' << ty;
    EXPECT_NEAR(est.threshold_x, tx, 1e-9);
    EXPECT_NEAR(est.threshold_y, ty, 1e-9);
  }
}

TEST(Tetrachoric, RelabelingNegatesExactly) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    ContingencyTable2x2 t{double(1 + rng.below(80)), double(1 + rng.below(80)), double(1 + rng.below(80)),
                          double(1 + rng.below(80))};
    const double rho = tetrachoric_pair(t).rho;
    EXPECT_EQ(tetrachoric_pair(t.flip_x()).rho, -rho);
    EXPECT_EQ(tetrachoric_pair(t.flip_y()).rho, -rho);
    EXPECT_EQ(tetrachoric_pair(t.transposed()).rho, rho);
    EXPECT_LE(std::abs(rho), kTetrachoricBound);
  }
}

TEST(Tetrachoric, ClampedAtBoundAndEmptyMarginRejected) {
  EXPECT_NEAR(tetrachoric_pair({500.5, 0.5, 0.5, 500.5}).rho, kTetrachoricBound, 1e-6);
  EXPECT_THROW(tetrachoric_pair({10, 10, 0, 0}), DataError);
  EXPECT_THROW(tetrachoric_pair({0, 0, 0, 0}), InputError);
  EXPECT_THROW(tetrachoric_pair({-1, 2, 3, 4}), InputError);
}

TEST(Tetrachoric, MatrixRecoversPopulationStructure) {
  const SimulationCondition c{2, 5, 5000, 0.0};
  const auto data = dichotomize(sample_dataset(build_implied_sigma(c.spec()), c.sample_size, 21));
  const auto r = tetrachoric_matrix(data);
  EXPECT_EQ(r.kind, CorrelationKind::tetrachoric);
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j) {
      if (i / 5 == j / 5)
        EXPECT_NEAR(r(i, j), 0.5, 0.05);
      else
        EXPECT_NEAR(r(i, j), 0.0, 0.05);
    }
  expect_correlation_invariants(r);
}

TEST(Tetrachoric, ZeroCellsAreCorrectedNotInfinite) {
  BinaryMatrix x(6, 2);
  x << 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1;
  const auto r = tetrachoric_matrix(x);
  EXPECT_GT(r(0, 1), 0.9);
  EXPECT_LT(r(0, 1), 1.0);
}

TEST(Tetrachoric, ConstantColumnsAreListed) {
  BinaryMatrix x(4, 3);
  x << 0, 1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 0;
  try {
    tetrachoric_matrix(x);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Tetrachoric, RandomDataSatisfiesInvariants) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const int p = 3 + static_cast<int>(rng.below(8));
    const int n = 20 + static_cast<int>(rng.below(100));
    BinaryMatrix x(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = rng.uniform() < 0.3 + 0.4 * (j % 2);
    for (int j = 0; j < p; ++j) {  // keep both categories present
      x(0, j) = 0;
      x(1, j) = 1;
    }
    expect_correlation_invariants(tetrachoric_matrix(x));
    expect_correlation_invariants(pearson_matrix(x.cast<double>()));
  }
}

TEST(NearestPsd, PsdInputUnchanged) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = random_correlation(rng, 6);
    EXPECT_EQ(nearest_psd(r.values).values, r.values);
  }
}

TEST(NearestPsd, ClipsNegativeEigenvalue) {
  Matrix m(3, 3);
  m << 1, 0.9, 0.9, 0.9, 1, 0.6, 0.9, 0.6, 1;
  Matrix bad = m;
  // Force the smallest eigenvalue to about -0.01.
  const auto eig = sym_eigen(bad);
  Vector values = eig.values;
  values(2) = -0.01;
  bad = eig.vectors * values.asDiagonal() * eig.vectors.transpose();
  const Vector d = bad.diagonal().cwiseSqrt().cwiseInverse();
  bad = d.asDiagonal() * bad * d.asDiagonal();
  bad = 0.5 * (bad + bad.transpose());
  bad.diagonal().setOnes();
  ASSERT_LT(Eigen::SelfAdjointEigenSolver<Matrix>(bad).eigenvalues().minCoeff(), 0.0);
  const auto fixed = nearest_psd(bad);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(fixed.values).eigenvalues().minCoeff(), kPsdFloor - 1e-9);
  EXPECT_TRUE((fixed.values.diagonal().array() == 1.0).all());
  expect_correlation_invariants(fixed);
}
