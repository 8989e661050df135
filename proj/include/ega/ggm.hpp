#pragma once

// Sparse Gaussian graphical models: graphical lasso by block coordinate
// descent, a log-spaced regularization path, and EBIC model selection.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ega/correlation.hpp"
#include "ega/error.hpp"
#include "ega/types.hpp"

namespace ega {

/// Entries of a fitted precision matrix below this magnitude are not edges.
inline constexpr double kEdgeZero = 1e-10;

struct PrecisionMatrix {
  Matrix values;
  double lambda = 0.0;
};

/// Standardized partial-correlation network.
struct PartialNetwork {
  Matrix weights;
  std::vector<std::pair<int, int>> edges;  // i < j, weights(i, j) != 0
  double selected_lambda = 0.0;
  double ebic = 0.0;
};

/// Thrown when the graphical lasso exceeds max_iter; carries the last iterate.
class GlassoConvergenceError : public ConvergenceError {
 public:
  GlassoConvergenceError(const std::string& what, PrecisionMatrix last)
      : ConvergenceError(what), last_iterate(std::move(last)) {}
  PrecisionMatrix last_iterate;
};

/// Thrown by lambda_path when no off-diagonal entry is nonzero.
class DegeneratePathError : public DataError {
 public:
  using DataError::DataError;
};

namespace detail {

/// Working state of the column-wise algorithm, kept across path points for
/// warm starts. `w` estimates the covariance, column j of `beta` holds the
/// lasso coefficients of variable j on the others (entry j unused).
struct GlassoState {
  Matrix w;
  Matrix beta;
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

inline PrecisionMatrix glasso_precision(const GlassoState& st, double lambda) {
  const Eigen::Index p = st.w.rows();
  Matrix k = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double w12_beta = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
      if (i != j) w12_beta += st.w(i, j) * st.beta(i, j);
    const double kjj = 1.0 / (st.w(j, j) - w12_beta);
    k(j, j) = kjj;
    for (Eigen::Index i = 0; i < p; ++i)
      if (i != j) k(i, j) = -st.beta(i, j) * kjj;
  }
  // Column j's estimate is authoritative for the upper triangle.
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < j; ++i) k(j, i) = k(i, j);
  return {std::move(k), lambda};
}

inline void glasso_sweeps(const Matrix& s, double lambda, double tol, int max_iter,
                          GlassoState& st) {
  const Eigen::Index p = s.rows();
  const double inner_tol = tol * 0.1;
  Vector wb(p);
  for (int iter = 0; iter < max_iter; ++iter) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      // wb = W11 * beta for the current column, excluding row/col j.
      wb.setZero();
      for (Eigen::Index l = 0; l < p; ++l)
        if (l != j && st.beta(l, j) != 0.0)
          for (Eigen::Index i = 0; i < p; ++i)
            if (i != j) wb(i) += st.w(i, l) * st.beta(l, j);
      for (int inner = 0; inner < 100000; ++inner) {
        double delta = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
          if (k == j) continue;
          const double old = st.beta(k, j);
          const double partial = s(k, j) - (wb(k) - st.w(k, k) * old);
          const double fresh = soft_threshold(partial, lambda) / st.w(k, k);
          if (fresh != old) {
            const double diff = fresh - old;
            for (Eigen::Index i = 0; i < p; ++i)
              if (i != j) wb(i) += st.w(i, k) * diff;
            st.beta(k, j) = fresh;
            delta = std::max(delta, std::abs(diff));
          }
        }
        if (delta < inner_tol) break;
      }
      for (Eigen::Index i = 0; i < p; ++i) {
        if (i == j) continue;
        max_change = std::max(max_change, std::abs(wb(i) - st.w(i, j)));
        st.w(i, j) = st.w(j, i) = wb(i);
      }
    }
    if (max_change < tol) return;
  }
  throw GlassoConvergenceError("glasso: no convergence within " + std::to_string(max_iter) +
                                   " sweeps at lambda " + std::to_string(lambda),
                               glasso_precision(st, lambda));
}

inline GlassoState glasso_cold_start(const Matrix& s) {
  return {s, Matrix::Zero(s.rows(), s.cols())};
}

}  // namespace detail

/// Maximizes log det K - tr(SK) - lambda * sum_{i != j} |k_ij|.
/// Convergence: largest change of the covariance estimate in a sweep < tol.
inline PrecisionMatrix glasso(const CorrelationMatrix& s, double lambda, double tol = 1e-4,
                              int max_iter = 10000) {
  if (!(lambda >= 0.0)) throw InputError("glasso: lambda must be >= 0");
  auto st = detail::glasso_cold_start(s.values);
  detail::glasso_sweeps(s.values, lambda, tol, max_iter, st);
  return detail::glasso_precision(st, lambda);
}

/// 100 log-spaced values from max |s_ij| down to 0.01 of it.
inline std::vector<double> lambda_path(const CorrelationMatrix& s, int n_lambda = 100,
                                       double min_ratio = 0.01) {
  if (n_lambda < 2) throw InputError("lambda_path: need at least two values");
  const Eigen::Index p = s.size();
  double lmax = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) lmax = std::max(lmax, std::abs(s(i, j)));
  if (!(lmax > 0.0)) throw DegeneratePathError("lambda_path: correlation matrix is diagonal");
  std::vector<double> path(n_lambda);
  const double log_max = std::log(lmax);
  const double log_min = std::log(lmax * min_ratio);
  for (int i = 0; i < n_lambda; ++i)
    path[i] = std::exp(log_max + (log_min - log_max) * i / (n_lambda - 1));
  path.front() = lmax;
  path.back() = lmax * min_ratio;
  return path;
}

inline int count_edges(const Matrix& k) {
  int edges = 0;
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = i + 1; j < k.cols(); ++j)
      if (std::abs(k(i, j)) >= kEdgeZero) ++edges;
  return edges;
}

/// -2 l(K) + |E| ln n + 4 gamma |E| ln p, l(K) = n/2 (log det K - tr(SK)).
inline double ebic_score(const Matrix& k, const Matrix& s, int n, double gamma) {
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) throw DataError("ebic_score: K is not positive definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double trace = (s.cwiseProduct(k)).sum();  // tr(SK) for symmetric S
  const double loglik = 0.5 * n * (logdet - trace);
  const double edges = count_edges(k);
  const double p = static_cast<double>(k.rows());
  return -2.0 * loglik + edges * std::log(static_cast<double>(n)) + 4.0 * gamma * edges * std::log(p);
}

/// rho_ij = -k_ij / sqrt(k_ii k_jj) with a zero diagonal.
inline PartialNetwork standardize(const PrecisionMatrix& k) {
  const Eigen::Index p = k.values.rows();
  PartialNetwork net{Matrix::Zero(p, p), {}, k.lambda, 0.0};
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double kij = k.values(i, j);
      if (std::abs(kij) < kEdgeZero) continue;
      const double rho = -kij / std::sqrt(k.values(i, i) * k.values(j, j));
      net.weights(i, j) = net.weights(j, i) = rho;
      net.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return net;
}

struct GlassoPathPoint {
  PrecisionMatrix precision;
  double ebic = 0.0;
  int n_edges = 0;
};

struct EbicGlassoOptions {
  double gamma = 0.5;
  int n_lambda = 100;
  double tol = 1e-4;
  int max_iter = 10000;
};

/// Fits the whole path with warm starts, largest lambda first.
inline std::vector<GlassoPathPoint> glasso_path(const CorrelationMatrix& s, int n,
                                                const EbicGlassoOptions& opt = {}) {
  const auto path = lambda_path(s, opt.n_lambda);
  auto st = detail::glasso_cold_start(s.values);
  std::vector<GlassoPathPoint> out;
  out.reserve(path.size());
  for (double lambda : path) {
    detail::glasso_sweeps(s.values, lambda, opt.tol, opt.max_iter, st);
    auto k = detail::glasso_precision(st, lambda);
    const double score = ebic_score(k.values, s.values, n, opt.gamma);
    const int edges = count_edges(k.values);
    out.push_back({std::move(k), score, edges});
  }
  return out;
}

/// Network at the EBIC-minimizing lambda; ties go to the larger lambda.
/// A diagonal correlation matrix yields the empty network.
inline PartialNetwork ebic_glasso(const CorrelationMatrix& s, int n,
                                  const EbicGlassoOptions& opt = {}) {
  if (n < 1) throw InputError("ebic_glasso: n must be >= 1");
  std::vector<GlassoPathPoint> path;
  try {
    path = glasso_path(s, n, opt);
  } catch (const DegeneratePathError&) {
    const Matrix k = s.values.diagonal().cwiseInverse().asDiagonal();
    PartialNetwork empty = standardize({k, 0.0});
    empty.ebic = ebic_score(k, s.values, n, opt.gamma);
    return empty;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < path.size(); ++i)
    if (path[i].ebic < path[best].ebic) best = i;
  PartialNetwork net = standardize(path[best].precision);
  net.ebic = path[best].ebic;
  return net;
}

}  // namespace ega
