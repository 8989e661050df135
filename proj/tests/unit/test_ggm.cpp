#include <gtest/gtest.h>

#include "ega/datagen.hpp"
#include "ega/ggm.hpp"
#include "helpers.hpp"

using namespace ega;
using ega::testing::random_correlation;
using ega::testing::to_correlation;

namespace {

// Penalized log-likelihood maximized by the graphical lasso.
double glasso_objective(const Matrix& k, const Matrix& s, double lambda) {
  const double logdet = Eigen::SelfAdjointEigenSolver<Matrix>(k).eigenvalues().array().log().sum();
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j)
      if (i != j) l1 += std::abs(k(i, j));
  return logdet - (s * k).trace() - lambda * l1;
}

bool positive_definite(const Matrix& k) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(k).eigenvalues().minCoeff() > 0.0;
}

}  // namespace

TEST(Glasso, FullShrinkageGivesDiagonal) {
  Rng rng(1);
  const auto s = random_correlation(rng, 6);
  double lmax = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) lmax = std::max(lmax, std::abs(s(i, j)));
  const auto k = glasso(s, lmax);
  EXPECT_EQ(count_edges(k.values), 0);
  EXPECT_LT((k.values.diagonal() - Vector::Ones(6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Glasso, ZeroPenaltyMatchesDirectInverse) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = random_correlation(rng, 10, 20);
    const auto k = glasso(s, 0.0, 1e-8);
    EXPECT_LT((k.values - s.values.inverse()).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Glasso, OutputIsSymmetricPositiveDefinite) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 3 + static_cast<int>(rng.below(10));
    const auto s = random_correlation(rng, p, 1 + static_cast<int>(rng.below(5)));
    const double lambda = 0.3 * rng.uniform();
    const auto k = glasso(s, lambda);
    EXPECT_EQ(k.values, k.values.transpose());
    EXPECT_TRUE(positive_definite(k.values));
    EXPECT_EQ(k.lambda, lambda);
  }
}

TEST(Glasso, BeatsPerturbedSolutionsOnPenalizedLikelihood) {
  Rng rng(4);
  const auto s = random_correlation(rng, 7, 4);
  const double lambda = 0.1;
  const auto k = glasso(s, lambda, 1e-8);
  const double best = glasso_objective(k.values, s.values, lambda);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix d = Matrix::Zero(7, 7);
    const int i = static_cast<int>(rng.below(7)), j = static_cast<int>(rng.below(7));
    d(i, j) = d(j, i) = 0.01 * rng.normal();
    const Matrix moved = k.values + d;
    if (!positive_definite(moved)) continue;
    EXPECT_LE(glasso_objective(moved, s.values, lambda), best + 1e-7);
  }
}

TEST(Glasso, NegativeLambdaRejectedAndNonConvergenceCarriesIterate) {
  Rng rng(5);
  const auto s = random_correlation(rng, 5);
  EXPECT_THROW(glasso(s, -0.1), InputError);
  try {
    glasso(s, 0.01, 1e-300, 1);
    FAIL();
  } catch (const GlassoConvergenceError& e) {
    EXPECT_EQ(e.last_iterate.values.rows(), 5);
  }
}

TEST(LambdaPath, ShapeAndEndpoints) {
  Rng rng(6);
  const auto s = random_correlation(rng, 8);
  double lmax = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) lmax = std::max(lmax, std::abs(s(i, j)));
  const auto path = lambda_path(s);
  ASSERT_EQ(path.size(), 100u);
  EXPECT_EQ(path.front(), lmax);
  EXPECT_NEAR(path.back() / path.front(), 0.01, 1e-12);
  for (std::size_t i = 1; i < path.size(); ++i) {
    EXPECT_LT(path[i], path[i - 1]);
    EXPECT_NEAR(std::log(path[i - 1] / path[i]), std::log(100.0) / 99.0, 1e-12);
  }
  EXPECT_THROW(lambda_path({Matrix::Identity(4, 4), CorrelationKind::pearson}), DegeneratePathError);
}

TEST(Ebic, MatchesFormulaByHand) {
  Matrix k(3, 3);
  k << 2, -0.5, 0, -0.5, 1.5, 0.2, 0, 0.2, 1;
  Matrix s(3, 3);
  s << 1, 0.3, 0.1, 0.3, 1, -0.2, 0.1, -0.2, 1;
  const int n = 250;
  const double gamma = 0.5;
  const double loglik = 0.5 * n * (std::log(k.determinant()) - (s * k).trace());
  const double expected = -2 * loglik + 2 * std::log(250.0) + 4 * gamma * 2 * std::log(3.0);
  EXPECT_NEAR(ebic_score(k, s, n, gamma), expected, 1e-9);
}

TEST(Ebic, DiagonalInputGivesEmptyNetwork) {
  const auto net = ebic_glasso({Matrix::Identity(5, 5), CorrelationKind::pearson}, 100);
  EXPECT_TRUE(net.edges.empty());
  EXPECT_EQ(net.weights, Matrix::Zero(5, 5));
}

TEST(Ebic, SelectsMinimumOfPath) {
  const Matrix sigma = build_implied_sigma({2, 5, 0.3, 1.0, 1.0});
  CorrelationMatrix r{to_correlation(sigma), CorrelationKind::pearson};
  const auto path = glasso_path(r, 500);
  const auto net = ebic_glasso(r, 500);
  double best = path.front().ebic;
  for (const auto& pt : path) best = std::min(best, pt.ebic);
  EXPECT_EQ(net.ebic, best);
  for (std::size_t i = 1; i < path.size(); ++i) EXPECT_LT(path[i].precision.lambda, path[i - 1].precision.lambda);
}

TEST(Network, StandardizedWeightsAreValidPartialCorrelations) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_correlation(rng, 8, 3);
    const auto net = ebic_glasso(s, 200);
    const Matrix& w = net.weights;
    EXPECT_EQ(w, w.transpose());
    EXPECT_TRUE((w.diagonal().array() == 0.0).all());
    EXPECT_LT(w.cwiseAbs().maxCoeff(), 1.0);
    int nonzero = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j) nonzero += w(i, j) != 0.0;
    EXPECT_EQ(nonzero, static_cast<int>(net.edges.size()));
    for (const auto& [i, j] : net.edges) {
      EXPECT_LT(i, j);
      EXPECT_NE(w(i, j), 0.0);
    }
  }
}

TEST(Network, PartialCorrelationFormula) {
  Matrix k(2, 2);
  k << 4, -1, -1, 1;
  const auto net = standardize({k, 0.0});
  EXPECT_NEAR(net.weights(0, 1), 0.5, 1e-15);
}

TEST(Network, OrthogonalPopulationHasNoCrossFactorEdges) {
  const FactorSpec spec{2, 5, 0.0, 1.0, 1.0};
  CorrelationMatrix r{to_correlation(build_implied_sigma(spec)), CorrelationKind::pearson};
  const auto net = ebic_glasso(r, 1000);
  EXPECT_FALSE(net.edges.empty());
  for (const auto& [i, j] : net.edges) EXPECT_EQ(spec.factor_of(i), spec.factor_of(j));
}
