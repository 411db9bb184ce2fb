#pragma once

#include <vector>

#include "gama/types.hpp"

namespace gama {

/// n points in R^d, one per row. `ids` are stable row labels used for
/// deterministic tie-breaking; they default to 0..n-1.
struct PointSet {
  Matrix points;         // n x d
  std::vector<int> ids;  // size n, unique, bijective onto rows

  static PointSet from_matrix(Matrix pts);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  void validate() const;
};

struct KnnEdge {
  int to = 0;
  Scalar weight = 0.0;
};

/// Directed k-NN adjacency with Euclidean edge weights. When `symmetric` the
/// adjacency has been mutualized into an undirected graph.
struct KnnGraph {
  int k = 0;
  bool symmetric = false;
  std::vector<std::vector<KnnEdge>> edges;  // edges[i] sorted by target id

  Index size() const { return static_cast<Index>(edges.size()); }
};

/// Orthonormal basis of the estimated tangent space at `base`.
struct TangentFrame {
  Vector base;
  Matrix basis;  // d x m, orthonormal columns
  Scalar explained_variance = 0.0;

  Index ambient_dim() const { return basis.rows(); }
  Index tangent_dim() const { return basis.cols(); }
};

/// Rule for choosing the tangent dimension: either a fixed m or the smallest
/// m whose explained variance reaches `threshold`.
struct TangentDim {
  bool is_fixed = false;
  int m = 1;
  Scalar threshold = 0.9;

  static TangentDim fixed(int m) { return {true, m, 0.0}; }
  static TangentDim by_variance(Scalar threshold) { return {false, 0, threshold}; }
};

/// All-pairs shortest-path lengths over a KnnGraph. Unreachable pairs carry
/// the finite `disconnected_penalty` (twice the largest finite distance).
struct GeodesicIndex {
  Matrix dist;  // n x n
  Scalar disconnected_penalty = 0.0;
  Index unreachable_pairs = 0;
};

/// Brute-force k-NN graph. Ties at equal distance break toward the lower id,
/// so the result is deterministic for a fixed input.
KnnGraph build_knn_graph(const PointSet& points, int k, bool symmetrize);

/// PCA over the graph neighbors of node `index`, centered at the neighbor
/// mean. Columns follow a fixed sign convention (first nonzero component
/// positive).
TangentFrame estimate_tangent(const PointSet& points, const KnnGraph& graph,
                              int index, const TangentDim& dim);

/// B * B^T * v for the frame basis B. Idempotent and non-expansive.
Vector project_tangent(const TangentFrame& frame, const Vector& v);

/// Dijkstra from `source`; +inf marks unreachable nodes.
std::vector<Scalar> shortest_paths_from(const KnnGraph& graph, int source);

GeodesicIndex geodesic_distances(const PointSet& points, const KnnGraph& graph);

/// Shortest-path distances from every source point to every target point over
/// a joint symmetrized k-NN graph on the union of the two sets.
Matrix cross_geodesic(const PointSet& source, const PointSet& target, int k);

/// Median of all pairwise Euclidean distances; the conventional kernel
/// bandwidth. Returns 0 for fewer than two points.
Scalar median_pairwise_distance(const Matrix& points);

/// Kernel approximation of the geodesic distance:
/// d(a,b) = |a-b|^2 / (2 sigma^2), the negative log of a Gaussian kernel.
Matrix kernel_distance_matrix(const Matrix& a, const Matrix& b, Scalar sigma);

}  // namespace gama
