#pragma once

// Exploratory graph analysis: correlation matrix, EBIC-selected graphical
// lasso network, walktrap communities. The community count is the number of
// dimensions; nodes without edges count as their own dimension.

#include <string>
#include <utility>
#include <vector>

#include "ega/correlation.hpp"
#include "ega/datagen.hpp"
#include "ega/error.hpp"
#include "ega/ggm.hpp"
#include "ega/walktrap.hpp"

namespace ega {

struct EgaOptions {
  double gamma = 0.5;
  int steps = 4;
  int n_lambda = 100;
};

struct EgaResult {
  int ndim = 0;
  CorrelationMatrix correlation;
  PartialNetwork network;
  std::vector<int> membership;  // per item, 1-based dimension id
  CommunityPartition communities;
  /// (item, dimension) ordered by dimension, then item.
  std::vector<std::pair<int, int>> dim_variables;
};

namespace detail {

template <typename Fn>
decltype(auto) with_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const GlassoConvergenceError& e) {
    throw GlassoConvergenceError(std::string("ega/") + stage + ": " + e.what(), e.last_iterate);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("ega/") + stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string("ega/") + stage + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string("ega/") + stage + ": " + e.what());
  }
}

}  // namespace detail

/// Runs the network and community stages on an existing correlation matrix.
inline EgaResult ega_from_correlation(CorrelationMatrix r, int n, const EgaOptions& opt = {}) {
  if (n < 3) throw InputError("ega: need at least 3 observations");
  if (r.size() < 2) throw InputError("ega: need at least 2 items");
  EgaResult out;
  out.network = detail::with_stage("glasso", [&] {
    return ebic_glasso(r, n, {opt.gamma, opt.n_lambda, 1e-4, 10000});
  });
  out.correlation = std::move(r);
  out.communities = detail::with_stage("walktrap", [&] {
    return walktrap_communities(WeightedGraph::from_signed(out.network.weights), opt.steps);
  });
  out.membership = out.communities.membership;
  out.ndim = out.communities.n_communities;
  for (int dim = 1; dim <= out.ndim; ++dim)
    for (std::size_t i = 0; i < out.membership.size(); ++i)
      if (out.membership[i] == dim) out.dim_variables.emplace_back(static_cast<int>(i), dim);
  return out;
}

inline EgaResult ega(const BinaryDataset& data, const EgaOptions& opt = {}) {
  auto r = detail::with_stage("correlation", [&] { return tetrachoric_matrix(data.values); });
  return ega_from_correlation(std::move(r), static_cast<int>(data.values.rows()), opt);
}

inline EgaResult ega(const ContinuousDataset& data, const EgaOptions& opt = {}) {
  auto r = detail::with_stage("correlation", [&] { return pearson_matrix(data.values); });
  return ega_from_correlation(std::move(r), static_cast<int>(data.values.rows()), opt);
}

/// True when every entry is exactly 0 or 1.
inline bool is_binary(const Matrix& values) {
  return (values.array() == 0.0 || values.array() == 1.0).all();
}

enum class CorrelationChoice { automatic, pearson, tetrachoric };

/// Tetrachoric path for all-binary data unless overridden.
inline EgaResult ega(const Matrix& values, const EgaOptions& opt = {},
                     CorrelationChoice choice = CorrelationChoice::automatic) {
  const bool binary = choice == CorrelationChoice::tetrachoric ||
                      (choice == CorrelationChoice::automatic && is_binary(values));
  if (binary) {
    if (!is_binary(values)) throw InputError("ega: tetrachoric path requires 0/1 data");
    return ega(BinaryDataset{values.cast<std::uint8_t>()}, opt);
  }
  return ega(ContinuousDataset{values, 0}, opt);
}

}  // namespace ega
