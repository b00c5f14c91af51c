#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "svcox/common.hpp"

namespace svcox {

// ---------------------------------------------------------------------- //
// site adjacency graph and graph-distance correlation
// ---------------------------------------------------------------------- //

struct SpatialGraph {
  std::vector<std::string> site_ids;                 // fixes the site order
  std::vector<std::pair<int, int>> edges;            // indices into site_ids

  int n() const { return static_cast<int>(site_ids.size()); }

  int index_of(const std::string& id) const {
    for (int i = 0; i < n(); ++i)
      if (site_ids[i] == id) return i;
    return -1;
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(n());
    for (auto [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    return adj;
  }

  // Subgraph induced on the given site ids, in the given order.
  SpatialGraph induced(const std::vector<std::string>& keep) const {
    SpatialGraph g;
    g.site_ids = keep;
    std::map<int, int> remap;  // old index -> new index
    for (int i = 0; i < static_cast<int>(keep.size()); ++i) {
      int old = index_of(keep[i]);
      if (old < 0) throw std::invalid_argument("site not in graph: " + keep[i]);
      remap[old] = i;
    }
    for (auto [a, b] : edges) {
      auto ia = remap.find(a), ib = remap.find(b);
      if (ia != remap.end() && ib != remap.end())
        g.edges.emplace_back(ia->second, ib->second);
    }
    return g;
  }
};

// Graph hop counts; kept integral, converted to double only inside the
// correlation kernel.
struct DistanceMatrix {
  Eigen::MatrixXi d;

  int n() const { return static_cast<int>(d.rows()); }
  int max_distance() const { return d.maxCoeff(); }
};

inline void validate_graph(const SpatialGraph& g) {
  if (g.n() == 0) throw std::invalid_argument("graph has no sites");
  std::set<std::string> seen;
  for (const auto& id : g.site_ids)
    if (!seen.insert(id).second)
      throw std::invalid_argument("duplicate site id: " + id);
  std::set<std::pair<int, int>> edge_set;
  for (auto [a, b] : g.edges) {
    if (a < 0 || b < 0 || a >= g.n() || b >= g.n())
      throw std::invalid_argument("edge endpoint not a listed site");
    if (a == b) throw std::invalid_argument("self-loop at site " + g.site_ids[a]);
    if (!edge_set.insert(std::minmax(a, b)).second)
      throw std::invalid_argument("duplicate edge " + g.site_ids[a] + " " + g.site_ids[b]);
  }

  // connectivity: one BFS, then report the components if it fails
  std::vector<int> comp(g.n(), -1);
  const auto adj = g.adjacency();
  int n_comp = 0;
  for (int start = 0; start < g.n(); ++start) {
    if (comp[start] >= 0) continue;
    std::queue<int> q;
    q.push(start);
    comp[start] = n_comp;
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int w : adj[v])
        if (comp[w] < 0) {
          comp[w] = n_comp;
          q.push(w);
        }
    }
    ++n_comp;
  }
  if (n_comp > 1) {
    std::string msg = "graph is disconnected: components";
    for (int c = 0; c < n_comp; ++c) {
      msg += c == 0 ? " {" : ", {";
      bool first = true;
      for (int i = 0; i < g.n(); ++i)
        if (comp[i] == c) {
          msg += (first ? "" : ",") + g.site_ids[i];
          first = false;
        }
      msg += "}";
    }
    throw std::invalid_argument(msg);
  }
}

inline DistanceMatrix graph_distance_matrix(const SpatialGraph& g) {
  validate_graph(g);
  const int n = g.n();
  const auto adj = g.adjacency();
  DistanceMatrix dm;
  dm.d.setConstant(n, n, -1);
  for (int s = 0; s < n; ++s) {
    dm.d(s, s) = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int w : adj[v])
        if (dm.d(s, w) < 0) {
          dm.d(s, w) = dm.d(s, v) + 1;
          q.push(w);
        }
    }
  }
  return dm;
}

// H[l][m] = exp(-gamma * d(l,m)) + nugget * 1{l=m}. Since distances are
// integer hops, entries come from a precomputed power table of
// exp(-gamma).
inline Matrix correlation_matrix(const DistanceMatrix& D, double gamma, double nugget) {
  if (!(gamma >= 0.0) || !(nugget >= 0.0))
    throw std::invalid_argument("correlation_matrix: gamma and nugget must be >= 0");
  const int n = D.n();
  const int dmax = D.max_distance();
  std::vector<double> pow_table(dmax + 1);
  const double base = std::exp(-gamma);
  pow_table[0] = 1.0;
  for (int k = 1; k <= dmax; ++k) pow_table[k] = pow_table[k - 1] * base;

  Matrix H(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) H(i, j) = pow_table[D.d(i, j)];
  H.diagonal().array() += nugget;
  return H;
}

// Rook-adjacency lattice, the stand-in graph when no edge list is given.
inline SpatialGraph lattice_graph(int rows, int cols) {
  SpatialGraph g;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      g.site_ids.push_back("s" + std::to_string(r * cols + c + 1));
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) g.edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) g.edges.emplace_back(id(r, c), id(r + 1, c));
    }
  return g;
}

}  // namespace svcox
