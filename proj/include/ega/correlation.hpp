#pragma once

// Pearson and tetrachoric correlation matrices, PSD smoothing and the
// symmetric eigendecomposition shared by the retention methods.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/minima.hpp>

#include "ega/datagen.hpp"
#include "ega/error.hpp"
#include "ega/types.hpp"

namespace ega {

enum class CorrelationKind { pearson, tetrachoric };

inline const char* to_string(CorrelationKind kind) {
  return kind == CorrelationKind::pearson ? "pearson" : "tetrachoric";
}

/// Symmetric, unit-diagonal matrix of item associations.
struct CorrelationMatrix {
  Matrix values;
  CorrelationKind kind = CorrelationKind::pearson;

  Eigen::Index size() const { return values.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values(i)
};

inline double max_asymmetry(const Matrix& m) {
  return m.rows() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Eigenvalues in descending order with orthonormal eigenvectors.
inline EigenDecomposition sym_eigen(const Matrix& m, double sym_tol = 1e-8) {
  if (m.rows() != m.cols()) throw InputError("sym_eigen: matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (max_asymmetry(m) > sym_tol * scale) throw InputError("sym_eigen: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) throw ConvergenceError("sym_eigen: eigensolver failed");
  const Eigen::Index p = m.rows();
  EigenDecomposition out{Vector(p), Matrix(p, p)};
  for (Eigen::Index i = 0; i < p; ++i) {
    out.values(i) = solver.eigenvalues()(p - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(p - 1 - i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normal distribution helpers

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double norm_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

/// P(X > h, Y > k) by Genz's Gauss-Legendre scheme (Drezner-Wesolowsky
/// integral for |r| < 0.925, asymptotic expansion plus correction integral
/// above). Accurate to about 1e-15.
template <int Points>
double bvn_upper(double h, double k, double r) {
  using Rule = boost::math::quadrature::gauss<double, Points>;
  const auto& xs = Rule::abscissa();
  const auto& ws = Rule::weights();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (sign * xs[i] + 1.0) / 2.0);
        bvn += ws[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double t = a * (sign * xs[i] + 1.0);
        const double x2 = t * t;
        const double rs = std::sqrt(1.0 - x2);
        const double asr = -(bs / x2 + hk) / 2.0;
        if (asr > -100.0) {
          const double sp = 1.0 + c * x2 * (1.0 + d * x2);
          const double ep = std::exp(-hk * x2 / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
          bvn += a * ws[i] * std::exp(asr) * (ep - sp);
        }
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) return bvn + norm_cdf(-std::max(h, k));
  bvn = -bvn;
  if (k > h) bvn += h < 0.0 ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
  return bvn;
}

}  // namespace detail

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.
inline double bivariate_normal_cdf(double h, double k, double rho) {
  rho = std::clamp(rho, -1.0, 1.0);
  if (std::isnan(h) || std::isnan(k) || std::isnan(rho))
    return std::numeric_limits<double>::quiet_NaN();
  if ((std::isinf(h) && h < 0) || (std::isinf(k) && k < 0)) return 0.0;
  if (std::isinf(h) && std::isinf(k)) return 1.0;
  if (std::isinf(h)) return norm_cdf(k);
  if (std::isinf(k)) return norm_cdf(h);
  if (rho == 1.0) return norm_cdf(std::min(h, k));
  if (rho == -1.0) return std::max(0.0, norm_cdf(h) + norm_cdf(k) - 1.0);
  if (rho == 0.0) return norm_cdf(h) * norm_cdf(k);
  const double a = std::abs(rho);
  const double p = a < 0.3    ? detail::bvn_upper<6>(-h, -k, rho)
                   : a < 0.75 ? detail::bvn_upper<12>(-h, -k, rho)
                              : detail::bvn_upper<20>(-h, -k, rho);
  return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Pearson

inline CorrelationMatrix pearson_matrix(const Matrix& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  if (n < 3) throw InputError("pearson_matrix: need at least 3 observations");
  Matrix centered = data.rowwise() - data.colwise().mean();
  Vector sd = centered.colwise().norm().transpose();
  std::vector<Eigen::Index> constant;
  for (Eigen::Index j = 0; j < p; ++j)
    if (!(sd(j) > 0.0) || !std::isfinite(sd(j))) constant.push_back(j);
  if (!constant.empty()) {
    std::string cols;
    for (auto j : constant) cols += (cols.empty() ? "" : ", ") + std::to_string(j);
    throw DataError("pearson_matrix: constant column(s): " + cols);
  }
  for (Eigen::Index j = 0; j < p; ++j) centered.col(j) /= sd(j);
  Matrix r = centered.transpose() * centered;
  r = (0.5 * (r + r.transpose())).cwiseMax(-1.0).cwiseMin(1.0);
  r.diagonal().setOnes();
  return {std::move(r), CorrelationKind::pearson};
}

// ---------------------------------------------------------------------------
// Tetrachoric

/// 2x2 table of two dichotomous variables; n_xy counts X = x, Y = y.
/// Counts are real so that continuity corrections can be applied.
struct ContingencyTable2x2 {
  double n00 = 0, n01 = 0, n10 = 0, n11 = 0;

  double total() const { return n00 + n01 + n10 + n11; }
  bool has_zero_cell() const { return n00 == 0 || n01 == 0 || n10 == 0 || n11 == 0; }
  ContingencyTable2x2 flip_y() const { return {n01, n00, n11, n10}; }
  ContingencyTable2x2 flip_x() const { return {n10, n11, n00, n01}; }
  ContingencyTable2x2 transposed() const { return {n00, n10, n01, n11}; }
  ContingencyTable2x2 corrected(double add) const {
    return {n00 + add, n01 + add, n10 + add, n11 + add};
  }
  std::array<double, 4> cells() const { return {n00, n01, n10, n11}; }
};

struct TetrachoricEstimate {
  double rho = 0.0;
  double threshold_x = 0.0;  // latent cut below which X = 0
  double threshold_y = 0.0;
};

inline constexpr double kTetrachoricBound = 0.999;

namespace detail {

inline TetrachoricEstimate tetrachoric_mle(const ContingencyTable2x2& t) {
  const double total = t.total();
  const double px0 = (t.n00 + t.n01) / total;
  const double py0 = (t.n00 + t.n10) / total;
  TetrachoricEstimate est{0.0, norm_quantile(px0), norm_quantile(py0)};
  if (t.n00 * t.n11 == t.n01 * t.n10) return est;
  const double h = est.threshold_x;
  const double k = est.threshold_y;
  auto neg_loglik = [&](double rho) {
    const double p00 = bivariate_normal_cdf(h, k, rho);
    const double p01 = px0 - p00;
    const double p10 = py0 - p00;
    const double p11 = 1.0 - px0 - py0 + p00;
    constexpr double floor = 1e-300;
    return -(t.n00 * std::log(std::max(p00, floor)) + t.n01 * std::log(std::max(p01, floor)) +
             t.n10 * std::log(std::max(p10, floor)) + t.n11 * std::log(std::max(p11, floor)));
  };
  std::uintmax_t max_iter = 200;
  const auto [rho, value] = boost::math::tools::brent_find_minima(
      neg_loglik, -kTetrachoricBound, kTetrachoricBound, std::numeric_limits<double>::digits / 2,
      max_iter);
  (void)value;
  est.rho = std::clamp(rho, -kTetrachoricBound, kTetrachoricBound);
  return est;
}

}  // namespace detail

/// Two-step tetrachoric estimate: thresholds from the margins, then the
/// correlation maximizing the four-cell likelihood on [-0.999, 0.999].
///
/// The table is reduced to a canonical orientation before estimation so that
/// relabeling either variable's categories negates rho exactly.
inline TetrachoricEstimate tetrachoric_pair(const ContingencyTable2x2& table) {
  for (double c : table.cells())
    if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("tetrachoric_pair: invalid cell count");
  if (!(table.total() > 0.0)) throw InputError("tetrachoric_pair: empty table");
  if (table.n00 + table.n01 == 0 || table.n10 + table.n11 == 0 || table.n00 + table.n10 == 0 ||
      table.n01 + table.n11 == 0)
    throw DataError("tetrachoric_pair: a margin is empty, correlation undefined");

  const bool negative = table.n00 * table.n11 < table.n01 * table.n10;
  // Positive-association orientation, then the lexicographically smallest of
  // the four tables sharing that likelihood surface.
  const ContingencyTable2x2 oriented = negative ? table.flip_y() : table;
  const std::array<ContingencyTable2x2, 4> variants{
      oriented, oriented.flip_x().flip_y(), oriented.transposed(),
      oriented.transposed().flip_x().flip_y()};
  std::size_t best = 0;
  for (std::size_t i = 1; i < variants.size(); ++i)
    if (variants[i].cells() < variants[best].cells()) best = i;
  const double rho = detail::tetrachoric_mle(variants[best]).rho;

  TetrachoricEstimate out{negative ? -rho : rho,
                          norm_quantile((table.n00 + table.n01) / table.total()),
                          norm_quantile((table.n00 + table.n10) / table.total())};
  if (out.rho == 0.0) out.rho = 0.0;  // no signed zero
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing

inline constexpr double kPsdFloor = 1e-6;

/// Eigenvalue clipping at 1e-6 followed by rescaling to unit diagonal,
/// repeated until the rescaled matrix keeps the floor. Input whose spectrum
/// already clears the floor is returned unchanged.
inline CorrelationMatrix nearest_psd(const Matrix& m,
                                     CorrelationKind kind = CorrelationKind::tetrachoric) {
  Matrix current = 0.5 * (m + m.transpose());
  for (int iter = 0; iter < 50; ++iter) {
    const auto eig = sym_eigen(current);
    const double smallest = eig.values.size() ? eig.values.minCoeff() : 0.0;
    if (iter == 0 && smallest >= kPsdFloor) return {m, kind};
    if (iter > 0 && smallest >= kPsdFloor - 1e-9) break;
    const Vector clipped = eig.values.cwiseMax(kPsdFloor);
    Matrix rebuilt = eig.vectors * clipped.asDiagonal() * eig.vectors.transpose();
    const Vector inv_sd = rebuilt.diagonal().cwiseSqrt().cwiseInverse();
    current = inv_sd.asDiagonal() * rebuilt * inv_sd.asDiagonal();
    current = 0.5 * (current + current.transpose());
    current.diagonal().setOnes();
  }
  current = current.cwiseMax(-1.0).cwiseMin(1.0);
  current.diagonal().setOnes();
  return {std::move(current), kind};
}

/// Pairwise tetrachoric correlations. Tables with an empty cell get +0.5 in
/// every cell; the result is smoothed with nearest_psd.
inline CorrelationMatrix tetrachoric_matrix(const BinaryMatrix& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  if (n < 1) throw InputError("tetrachoric_matrix: no observations");
  const Matrix x = data.cast<double>();
  const Vector ones = x.colwise().sum().transpose();
  std::string constant;
  for (Eigen::Index j = 0; j < p; ++j)
    if (ones(j) == 0 || ones(j) == static_cast<double>(n))
      constant += (constant.empty() ? "" : ", ") + std::to_string(j);
  if (!constant.empty())
    throw DataError("tetrachoric_matrix: constant column(s): " + constant);

  const Matrix both = x.transpose() * x;
  Matrix r = Matrix::Identity(p, p);
  const double total = static_cast<double>(n);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double n11 = both(i, j);
      ContingencyTable2x2 t{total - ones(i) - ones(j) + n11, ones(j) - n11, ones(i) - n11, n11};
      if (t.has_zero_cell()) t = t.corrected(0.5);
      r(i, j) = r(j, i) = tetrachoric_pair(t).rho;
    }
  }
  return nearest_psd(r, CorrelationKind::tetrachoric);
}

inline CorrelationMatrix tetrachoric_matrix(const BinaryDataset& data) {
  return tetrachoric_matrix(data.values);
}

}  // namespace ega
