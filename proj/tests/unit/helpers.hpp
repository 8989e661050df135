#pragma once

#include <cstdint>
#include <functional>
#include <tuple>
#include <vector>

#include "ega/correlation.hpp"
#include "ega/datagen.hpp"
#include "ega/ggm.hpp"
#include "ega/rng.hpp"
#include "ega/walktrap.hpp"

namespace ega::testing {

/// Random correlation matrix from a Gram matrix with `extra` spare columns.
inline CorrelationMatrix random_correlation(Rng& rng, int p, int extra = 3) {
  Matrix a(p, p + extra);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p + extra; ++j) a(i, j) = rng.normal();
  Matrix s = a * a.transpose();
  const Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
  s = d.asDiagonal() * s * d.asDiagonal();
  s = 0.5 * (s + s.transpose());
  s.diagonal().setOnes();
  return {s, CorrelationKind::pearson};
}

/// Correlation matrix of a one-factor model with the given loadings.
inline CorrelationMatrix one_factor(const Vector& loadings) {
  Matrix r = loadings * loadings.transpose();
  r.diagonal().setOnes();
  return {r, CorrelationKind::pearson};
}

inline Matrix to_correlation(const Matrix& sigma) {
  const Vector d = sigma.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * sigma * d.asDiagonal();
}

inline WeightedGraph graph_from_edges(int p, const std::vector<std::tuple<int, int, double>>& edges) {
  Matrix a = Matrix::Zero(p, p);
  for (const auto& [i, j, w] : edges) a(i, j) = a(j, i) = w;
  return {a, {}};
}

/// Best modularity over every set partition (restricted growth strings).
inline double exhaustive_max_modularity(const WeightedGraph& g) {
  const int p = static_cast<int>(g.size());
  std::vector<int> labels(p, 0);
  double best = -1.0;
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == p) {
      best = std::max(best, modularity(g, labels));
      return;
    }
    for (int l = 0; l <= used; ++l) {
      labels[i] = l;
      rec(i + 1, std::max(used, l + 1));
    }
  };
  rec(0, 0);
  return best;
}

/// Fixed graphs on at most 8 nodes.
inline std::vector<WeightedGraph> battery() {
  std::vector<WeightedGraph> out;
  // two triangles bridged
  out.push_back(graph_from_edges(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}, {2, 3, 1}}));
  // two 4-cliques, weak bridge
  {
    std::vector<std::tuple<int, int, double>> e;
    for (int b : {0, 4})
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) e.emplace_back(b + i, b + j, 1.0);
    e.emplace_back(3, 4, 0.1);
    out.push_back(graph_from_edges(8, e));
  }
  // triangles 3 + 3 + a pair, ring-connected
  out.push_back(graph_from_edges(8, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1},
                                     {6, 7, 1}, {2, 3, 0.2}, {5, 6, 0.2}, {7, 0, 0.2}}));
  // two disconnected squares with diagonals
  out.push_back(graph_from_edges(8, {{0, 1, .5}, {1, 2, .5}, {2, 3, .5}, {3, 0, .5}, {0, 2, .3},
                                     {4, 5, .4}, {5, 6, .4}, {6, 7, .4}, {7, 4, .4}, {5, 7, .2}}));
  // two triangles plus an isolated vertex
  out.push_back(graph_from_edges(7, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {4, 5, 1}, {5, 6, 1}, {4, 6, 1}}));
  // single clique
  out.push_back(graph_from_edges(4, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}, {2, 3, 1}}));
  // planted partitions with random weights
  Rng rng(42);
  for (int trial = 0; trial < 6; ++trial) {
    const int p = 6 + static_cast<int>(rng.below(3));
    const int groups = 2 + static_cast<int>(rng.below(2));
    Matrix a = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        const bool same = i % groups == j % groups;
        const double w = same ? 0.3 + 0.4 * rng.uniform() : (rng.uniform() < 0.3 ? 0.05 * rng.uniform() : 0.0);
        a(i, j) = a(j, i) = w;
      }
    out.push_back({a, {}});
  }
  // population partial-correlation network of a 2 x 4 orthogonal factor model
  {
    const Matrix sigma = build_implied_sigma({2, 4, 0.0, 1.0, 1.0});
    const auto net = ebic_glasso({to_correlation(sigma), CorrelationKind::pearson}, 1000);
    out.push_back(WeightedGraph::from_signed(net.weights));
  }
  return out;
}

}  // namespace ega::testing
