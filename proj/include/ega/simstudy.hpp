#pragma once

// Seeded Monte Carlo replications over simulation conditions, per-method
// accuracy / bias / absolute-error metrics and their aggregation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ega/baselines.hpp"
#include "ega/datagen.hpp"
#include "ega/ega.hpp"

namespace ega {

struct StudyOptions {
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  int reps = 1;
  std::uint64_t base_seed = 0;
  double gamma = 0.5;
  int steps = 4;
  int n_lambda = 100;
  int kmax = 10;
  int pa_iter = 20;
  EigenKind eigen_kind = EigenKind::factor;
  /// Correlation that VSS, MAP, BIC and EBIC read. PA, Kaiser and EGA always
  /// use the tetrachoric matrix.
  CorrelationKind fit_correlation = CorrelationKind::pearson;
  int threads = 1;
};

struct MethodOutcome {
  Method method = Method::ega;
  std::optional<int> k_hat;  // empty on failure
  std::string failure;
};

struct ReplicationRecord {
  SimulationCondition condition;
  int condition_index = 0;
  int rep_index = 0;
  std::uint64_t seed = 0;
  std::vector<MethodOutcome> outcomes;  // same order as StudyOptions::methods
};

/// base_seed + condition_index * 10^6 + rep_index.
inline std::uint64_t replication_seed(std::uint64_t base_seed, int condition_index, int rep_index) {
  return base_seed + static_cast<std::uint64_t>(condition_index) * 1'000'000ULL +
         static_cast<std::uint64_t>(rep_index);
}

/// Position of `cond` in condition_grid(), or -1.
inline int grid_index(const SimulationCondition& cond) {
  const auto grid = condition_grid();
  const auto it = std::find(grid.begin(), grid.end(), cond);
  return it == grid.end() ? -1 : static_cast<int>(it - grid.begin());
}

/// Generates one dataset and applies every requested method to it. Failures
/// are recorded per method.
inline ReplicationRecord run_replication(const SimulationCondition& cond, int condition_index,
                                         int rep_index, const StudyOptions& opt) {
  ReplicationRecord rec{cond, condition_index, rep_index,
                        replication_seed(opt.base_seed, condition_index, rep_index), {}};
  const Matrix sigma = build_implied_sigma(cond.spec());
  const BinaryDataset data = dichotomize(sample_dataset(sigma, cond.sample_size, rec.seed));
  const int n = cond.sample_size;

  std::optional<CorrelationMatrix> r, fit_r;
  std::string r_failure, fit_failure;
  try {
    r = tetrachoric_matrix(data.values);
  } catch (const Error& e) {
    r_failure = e.what();
  }
  if (opt.fit_correlation == CorrelationKind::tetrachoric) {
    fit_r = r;
    fit_failure = r_failure;
  } else {
    try {
      fit_r = pearson_matrix(data.values.cast<double>());
    } catch (const Error& e) {
      fit_failure = e.what();
    }
  }

  std::optional<std::pair<RetentionEstimate, RetentionEstimate>> info;
  std::optional<Vector> eigenvalues;
  for (Method m : opt.methods) {
    MethodOutcome out{m, std::nullopt, {}};
    try {
      const bool fit_based = m == Method::vss || m == Method::map || m == Method::bic || m == Method::ebic;
      if (fit_based && !fit_r) throw DataError(fit_failure);
      if (!fit_based && !r) throw DataError(r_failure);
      switch (m) {
        case Method::vss: out.k_hat = vss_select(*fit_r, n, opt.kmax).k_hat; break;
        case Method::map: out.k_hat = map_select(*fit_r, opt.kmax).k_hat; break;
        case Method::bic:
        case Method::ebic:
          if (!info) info = information_select(*fit_r, n, {opt.kmax, opt.gamma});
          out.k_hat = (m == Method::bic ? info->first : info->second).k_hat;
          break;
        case Method::kaiser:
          if (!eigenvalues) eigenvalues = retention_eigenvalues(*r, opt.eigen_kind, n);
          out.k_hat = kaiser_rule(*eigenvalues).k_hat;
          break;
        case Method::pa:
          out.k_hat = parallel_analysis(data.values, *r,
                                        {opt.pa_iter, rec.seed ^ 0x9E3779B97F4A7C15ULL, opt.eigen_kind})
                          .k_hat;
          break;
        case Method::ega:
          out.k_hat = ega_from_correlation(*r, n, {opt.gamma, opt.steps, opt.n_lambda}).ndim;
          break;
      }
    } catch (const Error& e) {
      out.k_hat.reset();
      out.failure = e.what();
    }
    rec.outcomes.push_back(std::move(out));
  }
  return rec;
}

/// Runs `tasks` jobs on up to `threads` workers; job i writes only slot i.
template <typename Job>
void parallel_for(std::size_t tasks, int threads, Job&& job) {
  const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(tasks, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks; i = next++) job(i);
    });
}

/// Replications of several conditions; records are ordered by condition,
/// then replication, whatever the thread count.
inline std::vector<ReplicationRecord> run_study(const std::vector<SimulationCondition>& conditions,
                                                const StudyOptions& opt) {
  if (opt.reps < 1) throw InputError("run_study: reps must be >= 1");
  std::vector<int> indices;
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    const int g = grid_index(conditions[c]);
    indices.push_back(g >= 0 ? g : static_cast<int>(64 + c));
  }
  const std::size_t total = conditions.size() * static_cast<std::size_t>(opt.reps);
  std::vector<ReplicationRecord> records(total);
  std::vector<std::exception_ptr> errors(total);
  parallel_for(total, opt.threads, [&](std::size_t i) {
    const std::size_t c = i / opt.reps;
    const int rep = static_cast<int>(i % opt.reps);
    try {
      records[i] = run_replication(conditions[c], indices[c], rep, opt);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

inline std::vector<ReplicationRecord> run_condition(const SimulationCondition& cond,
                                                    const StudyOptions& opt) {
  return run_study({cond}, opt);
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  int n = 0;         // estimates supplied, failures included
  int failures = 0;
  double accuracy = 0.0;  // failures count as incorrect
  std::optional<double> mbe;  // over successful estimates; empty if all failed
  std::optional<double> mae;
};

inline Metrics compute_metrics(const std::vector<std::optional<int>>& estimates, int true_k) {
  if (estimates.empty()) throw InputError("compute_metrics: no estimates");
  Metrics m;
  m.n = static_cast<int>(estimates.size());
  int correct = 0;
  double bias = 0.0, abs_err = 0.0;
  for (const auto& e : estimates) {
    if (!e) {
      ++m.failures;
      continue;
    }
    const int b = *e - true_k;
    correct += b == 0;
    bias += b;
    abs_err += std::abs(b);
  }
  m.accuracy = static_cast<double>(correct) / m.n;
  const int ok = m.n - m.failures;
  if (ok > 0) {
    m.mbe = bias / ok;
    m.mae = abs_err / ok;
  }
  return m;
}

/// Condition fields a summary row is grouped by; unset fields are pooled.
struct ConditionKey {
  std::optional<int> n_factors;
  std::optional<int> items_per_factor;
  std::optional<int> sample_size;
  std::optional<double> factor_corr;

  auto tie() const { return std::tie(n_factors, items_per_factor, sample_size, factor_corr); }
  friend bool operator<(const ConditionKey& a, const ConditionKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const ConditionKey& a, const ConditionKey& b) { return a.tie() == b.tie(); }
};

struct ConditionSummary {
  ConditionKey key;
  Method method = Method::ega;
  int n_reps = 0;
  double acc_mean = 0.0, acc_sd = 0.0;
  double mbe_mean = std::numeric_limits<double>::quiet_NaN(), mbe_sd = std::numeric_limits<double>::quiet_NaN();
  double mae_mean = std::numeric_limits<double>::quiet_NaN(), mae_sd = std::numeric_limits<double>::quiet_NaN();
  int failures = 0;
};

struct Grouping {
  bool n_factors = true;
  bool items_per_factor = true;
  bool sample_size = true;
  bool factor_corr = true;

  ConditionKey key(const SimulationCondition& c) const {
    ConditionKey k;
    if (n_factors) k.n_factors = c.n_factors;
    if (items_per_factor) k.items_per_factor = c.items_per_factor;
    if (sample_size) k.sample_size = c.sample_size;
    if (factor_corr) k.factor_corr = c.factor_corr;
    return k;
  }
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (xs.size() - 1))};
}

}  // namespace detail

/// Means and sample SDs of the per-replication accuracy indicator, bias and
/// absolute error for every (group, method). Pooling is over replications,
/// so a roll-up weights its cells by their replication counts. Rows are
/// sorted by key, then by method in kAllMethods order.
inline std::vector<ConditionSummary> aggregate(const std::vector<ReplicationRecord>& records,
                                               const Grouping& grouping = {}) {
  struct Acc {
    std::vector<double> hit, bias, abs;
    int n = 0, failures = 0;
  };
  std::map<std::pair<ConditionKey, int>, Acc> groups;
  for (const auto& rec : records) {
    for (const auto& out : rec.outcomes) {
      auto& acc = groups[{grouping.key(rec.condition), static_cast<int>(out.method)}];
      ++acc.n;
      if (!out.k_hat) {
        ++acc.failures;
        acc.hit.push_back(0.0);
        continue;
      }
      const double b = *out.k_hat - rec.condition.true_k();
      acc.hit.push_back(b == 0 ? 1.0 : 0.0);
      acc.bias.push_back(b);
      acc.abs.push_back(std::abs(b));
    }
  }
  std::vector<ConditionSummary> rows;
  for (const auto& [key, acc] : groups) {
    ConditionSummary s;
    s.key = key.first;
    s.method = static_cast<Method>(key.second);
    s.n_reps = acc.n;
    s.failures = acc.failures;
    std::tie(s.acc_mean, s.acc_sd) = detail::mean_sd(acc.hit);
    std::tie(s.mbe_mean, s.mbe_sd) = detail::mean_sd(acc.bias);
    std::tie(s.mae_mean, s.mae_sd) = detail::mean_sd(acc.abs);
    rows.push_back(s);
  }
  return rows;
}

/// Accuracy of one method across records, failures counted as incorrect.
inline double method_accuracy(const std::vector<ReplicationRecord>& records, Method method) {
  std::vector<std::optional<int>> est;
  int true_k = 0;
  for (const auto& rec : records)
    for (const auto& out : rec.outcomes)
      if (out.method == method) {
        est.push_back(out.k_hat);
        true_k = rec.condition.true_k();
      }
  if (est.empty()) throw InputError(std::string("method_accuracy: no outcomes for ") + to_string(method));
  return compute_metrics(est, true_k).accuracy;
}

}  // namespace ega
