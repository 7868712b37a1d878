#pragma once

// Functional redundancy graph: a complete weighted graph over operators with
// pairwise state-angle edge weights, plus threshold clustering.
//
// Clustering is single-linkage agglomerative with an explicit eps threshold:
// merge while the minimum inter-cluster distance is <= eps. At a fixed eps
// that is exactly the connected components of the <=eps edge graph, which
// makes the partition monotone in eps (smaller eps always refines larger).

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "specprune/embedding.hpp"
#include "specprune/errors.hpp"
#include "specprune/spectral.hpp"
#include "specprune/version.hpp"

namespace specprune {

struct RedundancyGraph {
  std::vector<std::string> node_names;
  Eigen::MatrixXd distances;  // symmetric, zero diagonal, entries in [0, pi/2]
  std::string embedding_method;

  Eigen::Index size() const { return distances.rows(); }

  Eigen::Index index_of(const std::string& name) const {
    for (std::size_t i = 0; i < node_names.size(); ++i)
      if (node_names[i] == name) return static_cast<Eigen::Index>(i);
    std::string available;
    for (const auto& n : node_names) available += (available.empty() ? "" : ", ") + n;
    throw LookupError("unknown graph node '" + name + "' (available: " + available + ")");
  }
};

struct ClusterAssignment {
  std::vector<int> labels;  // node index -> cluster id, contiguous from 0
  double threshold_eps = 0.0;

  int cluster_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }
};

inline RedundancyGraph build_frg(const std::vector<NamedState>& states,
                                 std::string embedding_method) {
  if (states.empty()) throw EmptyInputError("build_frg: no operators given");
  const Eigen::Index n = static_cast<Eigen::Index>(states.size());
  RedundancyGraph g;
  g.embedding_method = std::move(embedding_method);
  g.node_names.reserve(states.size());
  for (const auto& s : states) g.node_names.push_back(s.name);
  g.distances = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = fs_distance_states(states[i].state, states[j].state);
      g.distances(i, j) = d;
      g.distances(j, i) = d;
    }
  return g;
}

inline RedundancyGraph build_frg(const std::vector<SpectralSignature>& signatures) {
  if (signatures.empty()) throw EmptyInputError("build_frg: no operators given");
  const Eigen::Index n = static_cast<Eigen::Index>(signatures.size());
  RedundancyGraph g;
  g.embedding_method = "spectral";
  for (const auto& s : signatures) {
    detail::require_nondegenerate(s, "build_frg");
    g.node_names.push_back(s.source_name);
  }
  g.distances = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = fs_distance(signatures[i], signatures[j]);
      g.distances(i, j) = d;
      g.distances(j, i) = d;
    }
  return g;
}

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

inline ClusterAssignment cluster(const RedundancyGraph& g, double eps) {
  if (eps < 0.0)
    throw ParameterError("cluster: eps must be non-negative, got " + std::to_string(eps));
  const int n = static_cast<int>(g.size());

  // Edges merged smallest-distance first, ties by smallest (i, j); the final
  // partition is order-independent but the merge sequence stays deterministic.
  struct Edge {
    double d;
    int i, j;
  };
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (g.distances(i, j) <= eps) edges.push_back({g.distances(i, j), i, j});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  detail::UnionFind uf(n);
  for (const auto& e : edges) uf.unite(e.i, e.j);

  // Contiguous ids ordered by each cluster's smallest member index.
  ClusterAssignment out;
  out.threshold_eps = eps;
  out.labels.assign(n, -1);
  std::vector<int> root_to_id(n, -1);
  int next_id = 0;
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (root_to_id[r] < 0) root_to_id[r] = next_id++;
    out.labels[i] = root_to_id[r];
  }
  return out;
}

inline std::vector<int> cluster_members(const ClusterAssignment& a, int cluster_id) {
  std::vector<int> members;
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    if (a.labels[i] == cluster_id) members.push_back(static_cast<int>(i));
  if (members.empty())
    throw LookupError("unknown cluster id " + std::to_string(cluster_id));
  return members;
}

// Medoid: member minimizing the sum of distances to the other members; ties
// broken by smallest node index.
inline int cluster_representative_index(const RedundancyGraph& g, const ClusterAssignment& a,
                                        int cluster_id) {
  const std::vector<int> members = cluster_members(a, cluster_id);
  int best = members.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (int m : members) {
    double sum = 0.0;
    for (int o : members) sum += g.distances(m, o);
    if (sum < best_sum) {
      best_sum = sum;
      best = m;
    }
  }
  return best;
}

inline std::string cluster_representative(const RedundancyGraph& g, const ClusterAssignment& a,
                                          int cluster_id) {
  return g.node_names[static_cast<std::size_t>(cluster_representative_index(g, a, cluster_id))];
}

// ---------------------------------------------------------------------------
// Serialization (lossless round trip; field names are part of the format)

inline nlohmann::json graph_to_json(const RedundancyGraph& g) {
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(g.size() * (g.size() - 1) / 2));
  for (Eigen::Index i = 0; i < g.size(); ++i)
    for (Eigen::Index j = i + 1; j < g.size(); ++j) upper.push_back(g.distances(i, j));
  return {{"embedding_method", g.embedding_method},
          {"node_names", g.node_names},
          {"distances_upper", upper},
          {"version", kVersion}};
}

inline RedundancyGraph graph_from_json(const nlohmann::json& j) {
  RedundancyGraph g;
  g.embedding_method = j.at("embedding_method").get<std::string>();
  g.node_names = j.at("node_names").get<std::vector<std::string>>();
  const auto upper = j.at("distances_upper").get<std::vector<double>>();
  const Eigen::Index n = static_cast<Eigen::Index>(g.node_names.size());
  if (upper.size() != static_cast<std::size_t>(n * (n - 1) / 2))
    throw IntegrityError("graph document: distances_upper has " +
                         std::to_string(upper.size()) + " entries, expected " +
                         std::to_string(n * (n - 1) / 2));
  g.distances = Eigen::MatrixXd::Zero(n, n);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j2 = i + 1; j2 < n; ++j2) {
      g.distances(i, j2) = upper[k];
      g.distances(j2, i) = upper[k];
      ++k;
    }
  return g;
}

inline nlohmann::json clusters_to_json(const RedundancyGraph& g, const ClusterAssignment& a) {
  return {{"node_names", g.node_names},
          {"labels", a.labels},
          {"threshold_eps", a.threshold_eps},
          {"version", kVersion}};
}

}  // namespace specprune
