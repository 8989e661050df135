#pragma once

// Classical factor-retention rules: VSS, MAP, BIC, EBIC, parallel analysis
// and the eigenvalue-greater-than-one rule.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ega/correlation.hpp"
#include "ega/datagen.hpp"
#include "ega/efa.hpp"
#include "ega/error.hpp"
#include "ega/rng.hpp"

namespace ega {

enum class Method { vss, map, bic, ebic, kaiser, pa, ega };

inline constexpr std::array kAllMethods{Method::vss,    Method::map, Method::bic, Method::ebic,
                                        Method::kaiser, Method::pa,  Method::ega};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::vss: return "vss";
    case Method::map: return "map";
    case Method::bic: return "bic";
    case Method::ebic: return "ebic";
    case Method::pa: return "pa";
    case Method::kaiser: return "kaiser";
    case Method::ega: return "ega";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& name) {
  for (Method m : kAllMethods)
    if (name == to_string(m)) return m;
  return std::nullopt;
}

/// k_hat plus the per-k diagnostics the rule was read from. Statistic
/// vectors are indexed k - 1; NaN marks a k the rule could not evaluate.
struct RetentionEstimate {
  Method method = Method::ega;
  int k_hat = 0;
  std::map<std::string, std::vector<double>> statistics;
};

/// Which spectrum the eigenvalue rules read.
///
/// `component`: eigenvalues of R itself.
/// `factor`: eigenvalues of R with its diagonal replaced by the communalities
/// of a one-factor ML fit (squared multiple correlations when that model is
/// not identified).
enum class EigenKind { component, factor };

inline const char* to_string(EigenKind kind) {
  return kind == EigenKind::component ? "component" : "factor";
}

inline Vector retention_eigenvalues(const CorrelationMatrix& r, EigenKind kind, int n = 1000) {
  if (kind == EigenKind::component) return sym_eigen(r.values).values;
  const int p = static_cast<int>(r.size());
  Vector communality;
  if (efa_df(p, 1) >= 0 && p > 1) {
    const auto fit = fit_efa(r, 1, n);
    communality = Vector::Ones(p) - fit.uniquenesses;
  } else {
    communality = Vector::Ones(p) - detail::smc_uniqueness(r.values);
  }
  Matrix reduced = r.values;
  reduced.diagonal() = communality;
  return sym_eigen(reduced).values;
}

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Index of the smallest (or largest) finite statistic; ties go to the smaller k.
inline std::optional<int> best_k(const std::vector<double>& stat, bool minimize) {
  std::optional<int> best;
  for (std::size_t i = 0; i < stat.size(); ++i) {
    if (!std::isfinite(stat[i])) continue;
    if (!best || (minimize ? stat[i] < stat[*best] : stat[i] > stat[*best]))
      best = static_cast<int>(i);
  }
  return best;
}

}  // namespace detail

/// Count of eigenvalues strictly greater than one.
inline RetentionEstimate kaiser_rule(const Vector& eigenvalues) {
  RetentionEstimate out{Method::kaiser, 0, {}};
  std::vector<double> values(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  out.k_hat = static_cast<int>(std::count_if(values.begin(), values.end(), [](double v) { return v > 1.0; }));
  out.statistics["eigenvalue"] = std::move(values);
  return out;
}

inline RetentionEstimate kaiser_rule(const CorrelationMatrix& r,
                                     EigenKind kind = EigenKind::factor, int n = 1000) {
  return kaiser_rule(retention_eigenvalues(r, kind, n));
}

/// Minimum average squared partial correlation after removing the first k
/// principal components, k = 1..kmax (kmax is capped at p - 2).
inline RetentionEstimate map_select(const CorrelationMatrix& r, int kmax = 10) {
  const int p = static_cast<int>(r.size());
  kmax = std::min(kmax, p - 2);
  if (kmax < 1) throw InputError("map_select: need at least 3 items");
  const auto eig = sym_eigen(r.values);
  std::vector<double> stat(kmax, detail::kNaN);
  for (int k = 1; k <= kmax; ++k) {
    const Matrix a = eig.vectors.leftCols(k) * eig.values.head(k).cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const Matrix c = r.values - a * a.transpose();
    const Vector d = c.diagonal();
    if ((d.array() <= 0.0).any()) break;
    const Vector inv_sd = d.cwiseSqrt().cwiseInverse();
    const Matrix partial = inv_sd.asDiagonal() * c * inv_sd.asDiagonal();
    const double off = partial.array().square().sum() - partial.diagonal().array().square().sum();
    stat[k - 1] = off / (static_cast<double>(p) * (p - 1));
  }
  const auto best = detail::best_k(stat, true);
  if (!best) throw DataError("map_select: no admissible number of components");
  return {Method::map, *best + 1, {{"map", std::move(stat)}}};
}

struct InformationOptions {
  int kmax = 10;
  double gamma = 0.5;
};

/// BIC_k = chi2_k - df_k ln n, and EBIC_k = BIC_k + 2 gamma n_params_k ln p,
/// for every identified k up to kmax. Both columns come from one set of fits.
inline std::pair<RetentionEstimate, RetentionEstimate> information_select(
    const CorrelationMatrix& r, int n, const InformationOptions& opt = {}) {
  if (opt.kmax < 1) throw InputError("information_select: kmax must be >= 1");
  const int p = static_cast<int>(r.size());
  std::vector<double> bic(opt.kmax, detail::kNaN), ebic(opt.kmax, detail::kNaN);
  std::vector<double> chi(opt.kmax, detail::kNaN), dfs(opt.kmax, detail::kNaN);
  for (int k = 1; k <= opt.kmax; ++k) {
    if (k >= p || efa_df(p, k) < 0) break;
    const auto fit = fit_efa(r, k, n);
    chi[k - 1] = fit.chi_square;
    dfs[k - 1] = fit.df;
    bic[k - 1] = fit.chi_square - fit.df * std::log(static_cast<double>(n));
    ebic[k - 1] = bic[k - 1] + 2.0 * opt.gamma * fit.n_params * std::log(static_cast<double>(p));
  }
  const auto best_bic = detail::best_k(bic, true);
  const auto best_ebic = detail::best_k(ebic, true);
  if (!best_bic || !best_ebic) throw InputError("information_select: no identified factor model");
  RetentionEstimate b{Method::bic, *best_bic + 1, {{"bic", bic}, {"chi_square", chi}, {"df", dfs}}};
  RetentionEstimate e{Method::ebic, *best_ebic + 1, {{"ebic", ebic}, {"chi_square", chi}, {"df", dfs}}};
  return {std::move(b), std::move(e)};
}

inline RetentionEstimate bic_select(const CorrelationMatrix& r, int n, int kmax = 10) {
  return information_select(r, n, {kmax, 0.0}).first;
}

inline RetentionEstimate ebic_select(const CorrelationMatrix& r, int n, int kmax = 10,
                                     double gamma = 0.5) {
  return information_select(r, n, {kmax, gamma}).second;
}

/// Very simple structure of complexity one: each item keeps only its largest
/// varimax loading, and the fit of the implied off-diagonal correlations is
/// 1 - sum (r_ij - rhat_ij)^2 / sum r_ij^2 over i < j.
inline RetentionEstimate vss_select(const CorrelationMatrix& r, int n, int kmax = 10) {
  const int p = static_cast<int>(r.size());
  if (kmax < 1) throw InputError("vss_select: kmax must be >= 1");
  double total = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) total += r(i, j) * r(i, j);
  std::vector<double> stat(kmax, detail::kNaN);
  for (int k = 1; k <= kmax; ++k) {
    if (k >= p || efa_df(p, k) < 0) break;
    const auto fit = fit_efa(r, k, n);
    Matrix simple = Matrix::Zero(p, k);
    const Matrix rotated = varimax(fit.loadings);
    for (int i = 0; i < p; ++i) {
      Eigen::Index col;
      rotated.row(i).cwiseAbs().maxCoeff(&col);
      simple(i, col) = rotated(i, col);
    }
    const Matrix implied = simple * simple.transpose();
    double resid = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) resid += std::pow(r(i, j) - implied(i, j), 2);
    stat[k - 1] = total > 0.0 ? 1.0 - resid / total : detail::kNaN;
  }
  const auto best = detail::best_k(stat, false);
  if (!best) throw DataError("vss_select: fit undefined for every k");
  return {Method::vss, *best + 1, {{"vss", std::move(stat)}}};
}

/// Copy of `data` with every column independently shuffled.
inline BinaryMatrix permute_columns(const BinaryMatrix& data, Rng& rng) {
  BinaryMatrix out = data;
  const Eigen::Index n = out.rows();
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto swap_with = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(out(i, j), out(swap_with, j));
    }
  return out;
}

struct ParallelAnalysisOptions {
  int n_iter = 20;
  std::uint64_t seed = 0;
  EigenKind kind = EigenKind::factor;
};

/// Observed tetrachoric eigenvalues against the mean over column-permuted
/// copies; k_hat is the length of the leading run where observed > reference.
inline RetentionEstimate parallel_analysis(const BinaryMatrix& data, const CorrelationMatrix& observed_r,
                                           const ParallelAnalysisOptions& opt) {
  if (opt.n_iter < 1) throw InputError("parallel_analysis: n_iter must be >= 1");
  const int n = static_cast<int>(data.rows());
  const Vector observed = retention_eigenvalues(observed_r, opt.kind, n);
  Vector reference = Vector::Zero(observed.size());
  Rng rng(opt.seed);
  for (int it = 0; it < opt.n_iter; ++it) {
    const auto null_r = tetrachoric_matrix(permute_columns(data, rng));
    reference += retention_eigenvalues(null_r, opt.kind, n);
  }
  reference /= opt.n_iter;
  int k = 0;
  while (k < observed.size() && observed(k) > reference(k)) ++k;
  RetentionEstimate out{Method::pa, k, {}};
  out.statistics["observed"] = std::vector<double>(observed.data(), observed.data() + observed.size());
  out.statistics["reference"] = std::vector<double>(reference.data(), reference.data() + reference.size());
  return out;
}

inline RetentionEstimate parallel_analysis(const BinaryDataset& data, const ParallelAnalysisOptions& opt) {
  return parallel_analysis(data.values, tetrachoric_matrix(data.values), opt);
}

}  // namespace ega
