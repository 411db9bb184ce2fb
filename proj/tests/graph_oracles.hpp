#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "gama/geometry.hpp"

namespace gama::testutil {

/// Brute-force all-pairs shortest paths; the oracle for geodesic_distances.
inline Matrix floyd_warshall(const KnnGraph& graph) {
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  const Index n = graph.size();
  Matrix dist = Matrix::Constant(n, n, kInf);
  for (Index i = 0; i < n; ++i) dist(i, i) = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (const KnnEdge& e : graph.edges[static_cast<std::size_t>(i)]) {
      dist(i, e.to) = std::min(dist(i, e.to), e.weight);
    }
  }
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (dist(i, k) + dist(k, j) < dist(i, j)) {
          dist(i, j) = dist(i, k) + dist(k, j);
        }
      }
    }
  }
  return dist;
}

/// Heap-free Dijkstra, independent of shortest_paths_from.
inline std::vector<Scalar> naive_dijkstra(const KnnGraph& graph, int source) {
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  const auto n = static_cast<std::size_t>(graph.size());
  std::vector<Scalar> dist(n, kInf);
  std::vector<bool> done(n, false);
  dist[static_cast<std::size_t>(source)] = 0.0;
  for (std::size_t iter = 0; iter < n; ++iter) {
    std::size_t u = n;
    Scalar best = kInf;
    for (std::size_t v = 0; v < n; ++v) {
      if (!done[v] && dist[v] < best) {
        best = dist[v];
        u = v;
      }
    }
    if (u == n) break;
    done[u] = true;
    for (const KnnEdge& e : graph.edges[u]) {
      dist[static_cast<std::size_t>(e.to)] =
          std::min(dist[static_cast<std::size_t>(e.to)], dist[u] + e.weight);
    }
  }
  return dist;
}

}  // namespace gama::testutil
