// Generic directed-graph helpers shared by the q-graph and Markov modules:
// strongly connected components, closed classes, periods.
#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

namespace qcap {

using Adjacency = std::vector<std::vector<int>>;  // adj[u] = out-neighbors

// Kosaraju SCC; returns component id per node (0-based, reverse topological:
// a component can only have edges into components with smaller or equal id).
inline std::vector<int> scc_ids(const Adjacency& adj, int* out_count = nullptr) {
  int n = (int)adj.size();
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  // Iterative DFS recording finish order.
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<int, int>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [u, i] = stack.back();
      if (i < (int)adj[u].size()) {
        int v = adj[u][i++];
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back({v, 0});
        }
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
  }
  Adjacency radj(n);
  for (int u = 0; u < n; ++u)
    for (int v : adj[u]) radj[v].push_back(u);
  std::vector<int> comp(n, -1);
  int nc = 0;
  for (int i = n - 1; i >= 0; --i) {
    int s = order[i];
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = nc;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : radj[u])
        if (comp[v] < 0) {
          comp[v] = nc;
          stack.push_back(v);
        }
    }
    ++nc;
  }
  if (out_count) *out_count = nc;
  return comp;
}

inline bool digraph_strongly_connected(const Adjacency& adj) {
  int nc = 0;
  scc_ids(adj, &nc);
  return nc <= 1;
}

// Components grouped by id, plus a closed flag (no edge leaves the class).
struct ClassDecomposition {
  std::vector<std::vector<int>> classes;
  std::vector<char> closed;
  std::vector<int> comp_of;  // node -> class id
};

inline ClassDecomposition decompose_classes(const Adjacency& adj) {
  ClassDecomposition d;
  int nc = 0;
  d.comp_of = scc_ids(adj, &nc);
  d.classes.assign(nc, {});
  d.closed.assign(nc, 1);
  int n = (int)adj.size();
  for (int u = 0; u < n; ++u) {
    d.classes[d.comp_of[u]].push_back(u);
    for (int v : adj[u])
      if (d.comp_of[v] != d.comp_of[u]) d.closed[d.comp_of[u]] = 0;
  }
  return d;
}

// Period (gcd of cycle lengths) of a strongly connected node set. Uses the
// classic BFS-level argument: gcd over edges of level(u)+1-level(v).
inline int period_of_class(const Adjacency& adj, const std::vector<int>& nodes) {
  if (nodes.empty()) return 0;
  int n = (int)adj.size();
  std::vector<char> in_set(n, 0);
  for (int u : nodes) in_set[u] = 1;
  std::vector<int> level(n, -1);
  std::vector<int> queue{nodes[0]};
  level[nodes[0]] = 0;
  for (size_t h = 0; h < queue.size(); ++h) {
    int u = queue[h];
    for (int v : adj[u])
      if (in_set[v] && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
  }
  int g = 0;
  for (int u : nodes)
    for (int v : adj[u])
      if (in_set[v]) g = std::gcd(g, level[u] + 1 - level[v]);
  return std::abs(g);
}

}  // namespace qcap
