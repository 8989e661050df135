#pragma once

// Maximum-likelihood exploratory factor analysis on a correlation matrix,
// with uniquenesses found by bound-constrained quasi-Newton search and the
// loadings profiled out through an eigendecomposition.

#include <algorithm>
#include <cmath>
#include <string>

#include "ega/correlation.hpp"
#include "ega/error.hpp"
#include "ega/types.hpp"

namespace ega {

inline constexpr double kHeywoodFloor = 0.001;

struct EfaFit {
  int k = 0;
  Matrix loadings;     // p x k
  Vector uniquenesses;
  double discrepancy = 0.0;  // ML fit function at the optimum
  double chi_square = 0.0;   // Bartlett-corrected
  int df = 0;
  int n_params = 0;
  int iterations = 0;
};

inline int efa_df(int p, int k) { return ((p - k) * (p - k) - (p + k)) / 2; }

/// Free parameters of a k-factor model: loadings up to rotation plus uniquenesses.
inline int efa_params(int p, int k) { return p * k - k * (k - 1) / 2 + p; }

namespace detail {

struct EfaObjective {
  const Matrix& r;
  int k;

  struct Eval {
    double value;
    Vector gradient;
    Matrix loadings;
  };

  Eval operator()(const Vector& psi) const {
    const Eigen::Index p = r.rows();
    const Vector scale = psi.cwiseSqrt().cwiseInverse();
    const Matrix scaled = scale.asDiagonal() * r * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (scaled + scaled.transpose()));
    const Vector& ev = solver.eigenvalues();  // ascending
    double value = 0.0;
    for (Eigen::Index j = 0; j < p - k; ++j) {
      const double e = std::max(ev(j), 1e-300);
      value += e - std::log(e) - 1.0;
    }
    Matrix load(p, k);
    for (int f = 0; f < k; ++f) {
      const Eigen::Index col = p - 1 - f;
      load.col(f) = solver.eigenvectors().col(col) * std::sqrt(std::max(ev(col) - 1.0, 0.0));
    }
    load = psi.cwiseSqrt().asDiagonal() * load;
    Vector grad(p);
    for (Eigen::Index i = 0; i < p; ++i)
      grad(i) = (load.row(i).squaredNorm() + psi(i) - r(i, i)) / (psi(i) * psi(i));
    return {value, std::move(grad), std::move(load)};
  }
};

inline Vector smc_uniqueness(const Matrix& r) {
  Eigen::LDLT<Matrix> ldlt(r);
  const Matrix inv = ldlt.solve(Matrix::Identity(r.rows(), r.cols()));
  Vector u(r.rows());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    const double d = inv(i, i);
    u(i) = (std::isfinite(d) && d > 0.0) ? 1.0 / d : 0.05;
  }
  return u;
}

}  // namespace detail

struct EfaOptions {
  int max_iter = 2000;
  double grad_tol = 1e-7;
  double rel_tol = 1e-12;
  double upper = 1.0;
};

/// k-factor ML fit of R. chi_square uses Bartlett's correction
/// (n - 1 - (2p + 5)/6 - 2k/3) times the discrepancy.
inline EfaFit fit_efa(const CorrelationMatrix& r, int k, int n, const EfaOptions& opt = {}) {
  const int p = static_cast<int>(r.size());
  if (k < 1) throw InputError("fit_efa: k must be >= 1");
  const int df = efa_df(p, k);
  if (df < 0 || k >= p)
    throw InputError("fit_efa: " + std::to_string(k) + " factors are not identified for " +
                     std::to_string(p) + " items (df < 0)");

  const double lo = kHeywoodFloor;
  const double hi = opt.upper;
  detail::EfaObjective objective{r.values, k};
  Vector x = detail::smc_uniqueness(r.values).cwiseMax(0.05).cwiseMin(0.95);
  auto eval = objective(x);
  Matrix h = Matrix::Identity(p, p);

  auto project = [&](Vector v) { return v.cwiseMax(lo).cwiseMin(hi); };
  auto projected_gradient = [&](const Vector& at, const Vector& g) {
    return (at - project(at - g)).cwiseAbs().maxCoeff();
  };

  int iter = 0;
  int stalled = 0;
  bool converged = false;
  for (; iter < opt.max_iter; ++iter) {
    if (projected_gradient(x, eval.gradient) < opt.grad_tol) {
      converged = true;
      break;
    }
    // Coordinates pinned at a bound with the gradient pushing outward stay fixed.
    Eigen::Array<bool, Eigen::Dynamic, 1> free(p);
    for (int i = 0; i < p; ++i)
      free(i) = !((x(i) <= lo && eval.gradient(i) > 0) || (x(i) >= hi && eval.gradient(i) < 0));
    Vector dir = -(h * eval.gradient);
    for (int i = 0; i < p; ++i)
      if (!free(i)) dir(i) = 0.0;
    if (dir.dot(eval.gradient) >= 0.0) {
      h.setIdentity();
      dir = -eval.gradient;
      for (int i = 0; i < p; ++i)
        if (!free(i)) dir(i) = 0.0;
    }

    double step = 1.0;
    Vector next;
    decltype(eval) next_eval;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = project(x + step * dir);
      next_eval = objective(next);
      if (next_eval.value <= eval.value + 1e-4 * eval.gradient.dot(next - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (h.isIdentity()) {
        converged = true;  // no descent possible from here at machine precision
        break;
      }
      h.setIdentity();
      continue;
    }

    const Vector s = next - x;
    const Vector y = next_eval.gradient - eval.gradient;
    const double sy = s.dot(y);
    const double decrease = eval.value - next_eval.value;
    x = std::move(next);
    eval = std::move(next_eval);
    if (sy > 1e-14) {
      const double rho = 1.0 / sy;
      const Matrix ident = Matrix::Identity(p, p);
      h = (ident - rho * s * y.transpose()) * h * (ident - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    // Relative-reduction stop, as in L-BFGS-B's factr test.
    stalled = decrease < opt.rel_tol * std::max(1.0, std::abs(eval.value)) ? stalled + 1 : 0;
    if (stalled >= 5) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("fit_efa: no convergence for k = " + std::to_string(k) + " after " +
                           std::to_string(opt.max_iter) + " iterations");

  EfaFit fit;
  fit.k = k;
  fit.loadings = eval.loadings;
  fit.uniquenesses = x;
  fit.discrepancy = std::max(eval.value, 0.0);
  fit.df = df;
  fit.n_params = efa_params(p, k);
  fit.iterations = iter;
  const double bartlett = n - 1.0 - (2.0 * p + 5.0) / 6.0 - 2.0 * k / 3.0;
  fit.chi_square = bartlett * fit.discrepancy;
  return fit;
}

/// Varimax rotation with Kaiser row normalization.
inline Matrix varimax(const Matrix& loadings, double eps = 1e-5, int max_iter = 1000) {
  const Eigen::Index p = loadings.rows();
  const Eigen::Index k = loadings.cols();
  if (k < 2) return loadings;
  Vector norms = loadings.rowwise().norm();
  Matrix x = loadings;
  for (Eigen::Index i = 0; i < p; ++i)
    if (norms(i) > 0.0) x.row(i) /= norms(i);
  Matrix rot = Matrix::Identity(k, k);
  double d = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Matrix z = x * rot;
    const Vector col_ss = z.array().square().colwise().sum().transpose();
    const Matrix target =
        z.array().cube().matrix() - z * (col_ss / static_cast<double>(p)).asDiagonal();
    const Matrix b = x.transpose() * target;
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot = svd.matrixU() * svd.matrixV().transpose();
    const double previous = d;
    d = svd.singularValues().sum();
    if (d < previous * (1.0 + eps)) break;
  }
  Matrix rotated = x * rot;
  for (Eigen::Index i = 0; i < p; ++i) rotated.row(i) *= norms(i);
  return rotated;
}

}  // namespace ega
