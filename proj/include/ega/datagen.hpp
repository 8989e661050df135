#pragma once

// Simulated item responses from known simple-structure factor models.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ega/error.hpp"
#include "ega/rng.hpp"
#include "ega/types.hpp"

namespace ega {

/// Generating model: every item loads on exactly one factor, factors share
/// a common correlation, residuals are independent.
struct FactorSpec {
  int n_factors = 2;
  int items_per_factor = 5;
  double factor_corr = 0.0;
  double loading = 1.0;
  double residual_var = 1.0;

  int n_items() const { return n_factors * items_per_factor; }
  /// Factor that item `item` loads on (items are grouped factor by factor).
  int factor_of(int item) const { return item / items_per_factor; }

  /// Item-by-factor loading matrix; block diagonal.
  Matrix loadings() const {
    Matrix lambda = Matrix::Zero(n_items(), n_factors);
    for (int i = 0; i < n_items(); ++i) lambda(i, factor_of(i)) = loading;
    return lambda;
  }

  /// Factor covariance: unit diagonal, `factor_corr` elsewhere.
  Matrix factor_cov() const {
    Matrix psi = Matrix::Constant(n_factors, n_factors, factor_corr);
    psi.diagonal().setOnes();
    return psi;
  }

  Matrix residual_cov() const {
    return Matrix::Identity(n_items(), n_items()) * residual_var;
  }

  void validate() const {
    if (n_factors < 1) throw InputError("FactorSpec: n_factors must be >= 1");
    if (items_per_factor < 1) throw InputError("FactorSpec: items_per_factor must be >= 1");
    if (!(residual_var > 0.0)) throw InputError("FactorSpec: residual_var must be positive");
    if (!std::isfinite(loading)) throw InputError("FactorSpec: loading must be finite");
    // Equicorrelation matrix eigenvalues: 1 + (m-1)r and 1 - r.
    const double m = n_factors;
    if (!(1.0 - factor_corr > 0.0) || !(1.0 + (m - 1.0) * factor_corr > 0.0))
      throw DataError("FactorSpec: factor correlation " + std::to_string(factor_corr) +
                      " gives a non-positive-definite factor covariance for " +
                      std::to_string(n_factors) + " factors");
  }
};

/// n x p draws; rows are observations, columns follow FactorSpec item order.
struct ContinuousDataset {
  Matrix values;
  std::uint64_t seed = 0;
};

struct BinaryDataset {
  BinaryMatrix values;
};

struct SimulationCondition {
  int n_factors = 2;
  int items_per_factor = 5;
  int sample_size = 100;
  double factor_corr = 0.0;

  FactorSpec spec() const { return {n_factors, items_per_factor, factor_corr, 1.0, 1.0}; }
  int true_k() const { return n_factors; }

  friend bool operator==(const SimulationCondition&, const SimulationCondition&) = default;
};

/// Sigma = Lambda Psi Lambda' + Theta.
inline Matrix build_implied_sigma(const FactorSpec& spec) {
  spec.validate();
  const Matrix lambda = spec.loadings();
  Matrix sigma = lambda * spec.factor_cov() * lambda.transpose() + spec.residual_cov();
  return 0.5 * (sigma + sigma.transpose());
}

/// Lower Cholesky factor. Throws DataError naming the first leading minor
/// that is not positive.
inline Matrix cholesky_lower(const Matrix& a) {
  const Eigen::Index p = a.rows();
  if (a.cols() != p) throw InputError("cholesky: matrix is not square");
  Matrix l = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0))
      throw DataError("cholesky: leading minor of order " + std::to_string(j + 1) +
                      " is not positive definite");
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < p; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return l;
}

/// n i.i.d. rows from N(0, sigma).
inline ContinuousDataset sample_dataset(const Matrix& sigma, int n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_dataset: n must be >= 1");
  const Matrix chol = cholesky_lower(sigma);
  const Eigen::Index p = sigma.rows();
  Rng rng(seed);
  ContinuousDataset out{Matrix(n, p), seed};
  Vector z(p);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    out.values.row(i) = (chol * z).transpose();
  }
  return out;
}

/// 1 where the value exceeds the theoretical mean 0, else 0.
inline BinaryDataset dichotomize(const ContinuousDataset& data) {
  return {(data.values.array() > 0.0).cast<std::uint8_t>().matrix()};
}

/// The 2 x 2 x 4 x 4 design in lexicographic order
/// (n_factors, items_per_factor, sample_size, factor_corr).
inline std::vector<SimulationCondition> condition_grid() {
  constexpr std::array factors{2, 4};
  constexpr std::array items{5, 10};
  constexpr std::array sizes{100, 500, 1000, 5000};
  constexpr std::array corrs{0.0, 0.2, 0.5, 0.7};
  std::vector<SimulationCondition> grid;
  grid.reserve(64);
  for (int f : factors)
    for (int i : items)
      for (int n : sizes)
        for (double r : corrs) grid.push_back({f, i, n, r});
  return grid;
}

}  // namespace ega
