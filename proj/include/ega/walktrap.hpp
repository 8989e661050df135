#pragma once

// Random-walk agglomerative community detection on weighted graphs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ega/error.hpp"
#include "ega/types.hpp"

namespace ega {

/// Undirected graph with non-negative weights and no self-loops.
struct WeightedGraph {
  Matrix adjacency;
  std::vector<std::string> node_labels;

  Eigen::Index size() const { return adjacency.rows(); }

  void validate() const {
    if (adjacency.rows() != adjacency.cols()) throw InputError("WeightedGraph: adjacency is not square");
    const Eigen::Index p = size();
    if (!node_labels.empty() && static_cast<Eigen::Index>(node_labels.size()) != p)
      throw InputError("WeightedGraph: label count does not match node count");
    for (Eigen::Index i = 0; i < p; ++i) {
      if (adjacency(i, i) != 0.0) throw InputError("WeightedGraph: nonzero diagonal");
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!(adjacency(i, j) >= 0.0) || !std::isfinite(adjacency(i, j)))
          throw InputError("WeightedGraph: weights must be finite and non-negative");
        if (adjacency(i, j) != adjacency(j, i)) throw InputError("WeightedGraph: not symmetric");
      }
    }
  }

  /// Graph on |weights|, the form a signed partial-correlation network takes.
  static WeightedGraph from_signed(const Matrix& weights, std::vector<std::string> labels = {}) {
    Matrix a = weights.cwiseAbs();
    a = 0.5 * (a + a.transpose());
    a.diagonal().setZero();
    return {std::move(a), std::move(labels)};
  }
};

/// One agglomeration step: communities `left` and `right` form `merged`.
/// Vertices are communities 0..p-1; the k-th merge creates community p + k.
struct Merge {
  int left = 0;
  int right = 0;
  int merged = 0;
  double height = 0.0;  // increase in within-community squared distance
};

struct CommunityPartition {
  std::vector<int> membership;  // per node, ids contiguous from 1
  int n_communities = 0;
  double modularity = 0.0;
  std::vector<Merge> dendrogram;
  /// Modularity of the partition after k merges, k = 0..dendrogram.size().
  std::vector<double> cut_modularity;
  int selected_cut = 0;
};

/// Relabels arbitrary community ids to 1..m in order of first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& raw) {
  std::map<int, int> seen;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = seen.try_emplace(raw[i], static_cast<int>(seen.size()) + 1);
    out[i] = it->second;
  }
  return out;
}

/// Weighted Newman modularity, Q = sum_c [w_c / w - (s_c / 2w)^2].
/// Zero for a graph without edges.
inline double modularity(const WeightedGraph& g, const std::vector<int>& membership) {
  const Eigen::Index p = g.size();
  if (static_cast<Eigen::Index>(membership.size()) != p)
    throw InputError("modularity: membership does not cover every node");
  const double total = 0.5 * g.adjacency.sum();
  if (!(total > 0.0)) return 0.0;
  std::map<int, std::pair<double, double>> parts;  // id -> (internal, strength)
  for (Eigen::Index i = 0; i < p; ++i) {
    auto& [internal, strength] = parts[membership[i]];
    strength += g.adjacency.row(i).sum();
    for (Eigen::Index j = i + 1; j < p; ++j)
      if (membership[j] == membership[i]) internal += g.adjacency(i, j);
  }
  double q = 0.0;
  for (const auto& [id, part] : parts) {
    const double share = part.second / (2.0 * total);
    q += part.first / total - share * share;
  }
  return q;
}

namespace detail {

struct WalkCommunity {
  std::vector<int> members;
  Vector prob;  // mean t-step transition distribution of the members
  bool alive = true;
};

}  // namespace detail

/// Agglomerates communities by the distance between their t-step random-walk
/// distributions, then cuts the dendrogram at maximum modularity.
///
/// Every vertex with edges carries a self-loop weighted by its mean incident
/// edge weight. Vertices without edges never join the walk and stay
/// singletons. Only communities joined by an edge can merge, so connected
/// components never mix. Merge ties go to the lowest id pair; cut ties go to
/// the cut with fewer communities.
inline CommunityPartition walktrap_communities(const WeightedGraph& g, int steps = 4) {
  g.validate();
  const int p = static_cast<int>(g.size());
  if (p == 0) throw InputError("walktrap: graph has no nodes");
  if (steps < 1) throw InputError("walktrap: steps must be >= 1");

  const Matrix& a = g.adjacency;
  Vector reach(p);  // total weight incl. self-loop
  Matrix walk = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    int degree = 0;
    double strength = 0.0;
    for (int j = 0; j < p; ++j)
      if (a(i, j) > 0.0) {
        ++degree;
        strength += a(i, j);
      }
    if (degree == 0) {
      reach(i) = 0.0;
      continue;
    }
    const double loop = strength / degree;
    reach(i) = strength + loop;
    walk.row(i) = a.row(i) / reach(i);
    walk(i, i) = loop / reach(i);
  }
  Matrix walk_t = walk;
  for (int s = 1; s < steps; ++s) walk_t = walk_t * walk;

  int active = 0;
  Vector inv_reach = Vector::Zero(p);
  for (int i = 0; i < p; ++i)
    if (reach(i) > 0.0) {
      ++active;
      inv_reach(i) = 1.0 / reach(i);
    }

  std::vector<detail::WalkCommunity> comms;
  comms.reserve(2 * p);
  for (int i = 0; i < p; ++i) comms.push_back({{i}, walk_t.row(i).transpose(), true});

  auto delta_sigma = [&](int x, int y) {
    const double nx = static_cast<double>(comms[x].members.size());
    const double ny = static_cast<double>(comms[y].members.size());
    const double dist = (comms[x].prob - comms[y].prob).array().square().matrix().dot(inv_reach);
    return (nx * ny / (nx + ny)) * dist / std::max(active, 1);
  };

  // Candidate merges between adjacent live communities, keyed by id pair.
  std::map<std::pair<int, int>, double> candidates;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (a(i, j) > 0.0) candidates[{i, j}] = delta_sigma(i, j);

  std::vector<int> owner(p);
  for (int i = 0; i < p; ++i) owner[i] = i;

  CommunityPartition out;
  out.cut_modularity.push_back(modularity(g, owner));
  std::vector<std::vector<int>> snapshots{owner};

  while (!candidates.empty()) {
    auto best = candidates.begin();
    for (auto it = std::next(candidates.begin()); it != candidates.end(); ++it)
      if (it->second < best->second) best = it;  // map order breaks ties by id pair
    const auto [x, y] = best->first;
    const double height = best->second;
    const int merged = static_cast<int>(comms.size());

    detail::WalkCommunity fresh;
    fresh.members = comms[x].members;
    fresh.members.insert(fresh.members.end(), comms[y].members.begin(), comms[y].members.end());
    std::sort(fresh.members.begin(), fresh.members.end());
    const double nx = static_cast<double>(comms[x].members.size());
    const double ny = static_cast<double>(comms[y].members.size());
    fresh.prob = (nx * comms[x].prob + ny * comms[y].prob) / (nx + ny);
    comms[x].alive = comms[y].alive = false;
    comms.push_back(std::move(fresh));

    std::vector<int> neighbours;
    for (auto it = candidates.begin(); it != candidates.end();) {
      const auto [u, v] = it->first;
      if (u == x || u == y || v == x || v == y) {
        const int other = (u == x || u == y) ? v : u;
        if (other != x && other != y) neighbours.push_back(other);
        it = candidates.erase(it);
      } else {
        ++it;
      }
    }
    std::sort(neighbours.begin(), neighbours.end());
    neighbours.erase(std::unique(neighbours.begin(), neighbours.end()), neighbours.end());
    for (int other : neighbours) candidates[{other, merged}] = delta_sigma(other, merged);

    for (int v : comms[merged].members) owner[v] = merged;
    out.dendrogram.push_back({x, y, merged, height});
    out.cut_modularity.push_back(modularity(g, owner));
    snapshots.push_back(owner);
  }

  constexpr double tie = 1e-12;
  const double top = *std::max_element(out.cut_modularity.begin(), out.cut_modularity.end());
  int chosen = 0;
  for (int k = 0; k < static_cast<int>(out.cut_modularity.size()); ++k)
    if (out.cut_modularity[k] >= top - tie) chosen = k;
  out.selected_cut = chosen;
  out.membership = canonical_labels(snapshots[chosen]);
  out.n_communities = *std::max_element(out.membership.begin(), out.membership.end());
  out.modularity = out.cut_modularity[chosen];
  return out;
}

}  // namespace ega
