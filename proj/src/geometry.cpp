#include "gama/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "gama/errors.hpp"

namespace gama {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

/// Replaces +inf entries by twice the largest finite distance and counts them.
void apply_disconnected_penalty(Matrix& dist, Scalar& penalty, Index& unreachable) {
  Scalar max_finite = 0.0;
  unreachable = 0;
  for (Index i = 0; i < dist.rows(); ++i) {
    for (Index j = 0; j < dist.cols(); ++j) {
      const Scalar d = dist(i, j);
      if (std::isfinite(d)) {
        max_finite = std::max(max_finite, d);
      } else {
        ++unreachable;
      }
    }
  }
  penalty = 2.0 * max_finite;
  if (unreachable > 0) {
    dist = dist.unaryExpr(
        [&](Scalar d) { return std::isfinite(d) ? d : penalty; });
  }
}

}  // namespace

PointSet PointSet::from_matrix(Matrix pts) {
  PointSet set;
  set.points = std::move(pts);
  set.ids.resize(static_cast<std::size_t>(set.points.rows()));
  std::iota(set.ids.begin(), set.ids.end(), 0);
  return set;
}

void PointSet::validate() const {
  if (points.rows() < 1 || points.cols() < 1) {
    throw ParameterError("PointSet: need n >= 1 points with d >= 1 coordinates");
  }
  if (!points.allFinite()) {
    throw DataError("PointSet: non-finite coordinate");
  }
  if (static_cast<Index>(ids.size()) != points.rows()) {
    throw ParameterError("PointSet: ids must index rows bijectively");
  }
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ParameterError("PointSet: duplicate id");
  }
}

KnnGraph build_knn_graph(const PointSet& points, int k, bool symmetrize) {
  points.validate();
  const Index n = points.size();
  if (k < 1 || static_cast<Index>(k) >= n) {
    throw ParameterError("build_knn_graph: require 1 <= k < n, got k=" +
                         std::to_string(k) + ", n=" + std::to_string(n));
  }

  KnnGraph graph;
  graph.k = k;
  graph.symmetric = symmetrize;
  graph.edges.resize(static_cast<std::size_t>(n));

  struct Candidate {
    Scalar dist;
    int id;
    int row;
  };
  std::vector<Candidate> cand;
  cand.reserve(static_cast<std::size_t>(n) - 1);
  for (Index i = 0; i < n; ++i) {
    cand.clear();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const Scalar d = (points.points.row(i) - points.points.row(j)).norm();
      cand.push_back({d, points.ids[static_cast<std::size_t>(j)],
                      static_cast<int>(j)});
    }
    // Ties break toward the lower id so the graph is deterministic.
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(),
                      [](const Candidate& a, const Candidate& b) {
                        return a.dist < b.dist ||
                               (a.dist == b.dist && a.id < b.id);
                      });
    auto& out = graph.edges[static_cast<std::size_t>(i)];
    out.reserve(static_cast<std::size_t>(k));
    for (int e = 0; e < k; ++e) {
      out.push_back({cand[static_cast<std::size_t>(e)].row,
                     cand[static_cast<std::size_t>(e)].dist});
    }
    std::sort(out.begin(), out.end(),
              [](const KnnEdge& a, const KnnEdge& b) { return a.to < b.to; });
  }

  if (symmetrize) {
    for (Index i = 0; i < n; ++i) {
      for (const KnnEdge& e : graph.edges[static_cast<std::size_t>(i)]) {
        auto& back = graph.edges[static_cast<std::size_t>(e.to)];
        const bool present = std::any_of(
            back.begin(), back.end(),
            [&](const KnnEdge& b) { return b.to == static_cast<int>(i); });
        if (!present) {
          back.push_back({static_cast<int>(i), e.weight});
        }
      }
    }
    for (auto& adj : graph.edges) {
      std::sort(adj.begin(), adj.end(),
                [](const KnnEdge& a, const KnnEdge& b) { return a.to < b.to; });
    }
  }
  return graph;
}

TangentFrame estimate_tangent(const PointSet& points, const KnnGraph& graph,
                              int index, const TangentDim& dim) {
  if (index < 0 || static_cast<Index>(index) >= points.size() ||
      graph.size() != points.size()) {
    throw ParameterError("estimate_tangent: node index out of range");
  }
  const auto& nbrs = graph.edges[static_cast<std::size_t>(index)];
  const Index count = static_cast<Index>(nbrs.size());
  if (count < 2) {
    throw GeometryError("estimate_tangent: fewer than 2 neighbors at node " +
                        std::to_string(index));
  }
  const Index d = points.dim();

  Matrix nbhd(count, d);
  for (Index r = 0; r < count; ++r) {
    nbhd.row(r) = points.points.row(nbrs[static_cast<std::size_t>(r)].to);
  }
  const Vector mean = nbhd.colwise().mean();
  nbhd.rowwise() -= mean.transpose();

  const Matrix cov = nbhd.transpose() * nbhd / static_cast<Scalar>(count - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericError("estimate_tangent: eigendecomposition failed");
  }

  // Eigenvalues come back ascending; read them largest-first.
  Vector evals = eig.eigenvalues().cwiseMax(0.0).reverse();
  const Scalar total = evals.sum();
  if (total <= 1e-24) {
    throw GeometryError("estimate_tangent: zero total variance at node " +
                        std::to_string(index));
  }
  Index rank = 0;
  for (Index i = 0; i < evals.size(); ++i) {
    if (evals(i) > 1e-12 * evals(0)) ++rank;
  }

  Index m = 0;
  if (dim.is_fixed) {
    m = dim.m;
    if (m < 1 || m > d || m > count) {
      throw ParameterError("estimate_tangent: tangent dimension out of range");
    }
    if (m > rank) {
      throw GeometryError("estimate_tangent: degenerate neighborhood, rank " +
                          std::to_string(rank) + " < m " + std::to_string(m));
    }
  } else {
    Scalar cum = 0.0;
    for (Index i = 0; i < std::min(rank, std::min<Index>(count, d)); ++i) {
      cum += evals(i);
      m = i + 1;
      if (cum >= dim.threshold * total) break;
    }
  }

  TangentFrame frame;
  frame.base = points.points.row(index);
  frame.basis = Matrix(d, m);
  for (Index c = 0; c < m; ++c) {
    Vector col = eig.eigenvectors().col(d - 1 - c);
    for (Index r = 0; r < d; ++r) {
      if (std::abs(col(r)) > 1e-12) {
        if (col(r) < 0.0) col = -col;
        break;
      }
    }
    frame.basis.col(c) = col;
  }
  frame.explained_variance = evals.head(m).sum() / total;
  return frame;
}

Vector project_tangent(const TangentFrame& frame, const Vector& v) {
  if (v.size() != frame.basis.rows()) {
    throw ParameterError("project_tangent: dimension mismatch");
  }
  return frame.basis * (frame.basis.transpose() * v);
}

std::vector<Scalar> shortest_paths_from(const KnnGraph& graph, int source) {
  const Index n = graph.size();
  if (n == 0) {
    throw ParameterError("shortest_paths_from: empty graph");
  }
  if (source < 0 || static_cast<Index>(source) >= n) {
    throw ParameterError("shortest_paths_from: source out of range");
  }
  std::vector<Scalar> dist(static_cast<std::size_t>(n), kInf);
  dist[static_cast<std::size_t>(source)] = 0.0;
  using Item = std::pair<Scalar, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const KnnEdge& e : graph.edges[static_cast<std::size_t>(u)]) {
      const Scalar nd = d + e.weight;
      if (nd < dist[static_cast<std::size_t>(e.to)]) {
        dist[static_cast<std::size_t>(e.to)] = nd;
        heap.push({nd, e.to});
      }
    }
  }
  return dist;
}

GeodesicIndex geodesic_distances(const PointSet& points, const KnnGraph& graph) {
  const Index n = points.size();
  if (graph.size() != n || n == 0) {
    throw ParameterError("geodesic_distances: graph does not match point set");
  }
  GeodesicIndex index;
  index.dist = Matrix(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto row = shortest_paths_from(graph, static_cast<int>(i));
    for (Index j = 0; j < n; ++j) {
      index.dist(i, j) = row[static_cast<std::size_t>(j)];
    }
  }
  apply_disconnected_penalty(index.dist, index.disconnected_penalty,
                             index.unreachable_pairs);
  return index;
}

Matrix cross_geodesic(const PointSet& source, const PointSet& target, int k) {
  if (source.dim() != target.dim()) {
    throw ParameterError("cross_geodesic: dimension mismatch");
  }
  const Index ns = source.size();
  const Index nt = target.size();
  Matrix joint(ns + nt, source.dim());
  joint.topRows(ns) = source.points;
  joint.bottomRows(nt) = target.points;

  const KnnGraph graph = build_knn_graph(PointSet::from_matrix(joint), k, true);
  Matrix dist(ns, nt);
  for (Index i = 0; i < ns; ++i) {
    const auto row = shortest_paths_from(graph, static_cast<int>(i));
    for (Index j = 0; j < nt; ++j) {
      dist(i, j) = row[static_cast<std::size_t>(ns + j)];
    }
  }
  Scalar penalty = 0.0;
  Index unreachable = 0;
  apply_disconnected_penalty(dist, penalty, unreachable);
  return dist;
}

Scalar median_pairwise_distance(const Matrix& points) {
  const Index n = points.rows();
  if (n < 2) return 0.0;
  std::vector<Scalar> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      dists.push_back((points.row(i) - points.row(j)).norm());
    }
  }
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid),
                   dists.end());
  if (dists.size() % 2 == 1) {
    return dists[mid];
  }
  const Scalar upper = dists[mid];
  std::nth_element(dists.begin(),
                   dists.begin() + static_cast<std::ptrdiff_t>(mid - 1),
                   dists.end());
  return 0.5 * (dists[mid - 1] + upper);
}

Matrix kernel_distance_matrix(const Matrix& a, const Matrix& b, Scalar sigma) {
  if (a.cols() != b.cols()) {
    throw ParameterError("kernel_distance_matrix: dimension mismatch");
  }
  if (!(sigma > 0.0)) {
    throw ParameterError("kernel_distance_matrix: sigma must be positive");
  }
  Matrix dist(a.rows(), b.rows());
  const Scalar inv = 1.0 / (2.0 * sigma * sigma);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      dist(i, j) = (a.row(i) - b.row(j)).squaredNorm() * inv;
    }
  }
  return dist;
}

}  // namespace gama
