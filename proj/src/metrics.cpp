#include "gama/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "gama/errors.hpp"
#include "gama/geometry.hpp"

namespace gama {

namespace {

int predict(const NetSpec& spec, const NetParams& params, const Vector& x) {
  const Vector logits = forward_trace(spec, params, x).logits();
  Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

Matrix subsample_rows(const Matrix& m, Index cap, std::uint64_t seed) {
  if (m.rows() <= cap) return m;
  std::vector<Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(cap));
  std::sort(order.begin(), order.end());
  Matrix out(cap, m.cols());
  for (Index i = 0; i < cap; ++i) {
    out.row(i) = m.row(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

Matrix cross_dists(const Matrix& source_emb, const Matrix& target_emb, int k,
                   Index cap, std::uint64_t seed) {
  if (source_emb.rows() == 0 || target_emb.rows() == 0) {
    throw ParameterError("geoalign: empty embedding set");
  }
  if (source_emb.cols() != target_emb.cols()) {
    throw ParameterError("geoalign: dimension mismatch");
  }
  const Matrix s = subsample_rows(source_emb, cap, seed);
  const Matrix t = subsample_rows(target_emb, cap, seed + 1);
  const Index n_union = s.rows() + t.rows();
  const int k_eff = std::min<int>(k, static_cast<int>(n_union) - 1);
  return cross_geodesic(PointSet::from_matrix(s), PointSet::from_matrix(t),
                        k_eff);
}

}  // namespace

Scalar accuracy_percent(const NetSpec& spec, const NetParams& params,
                        const Matrix& x, const std::vector<int>& y) {
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ParameterError("accuracy: labels do not match samples");
  }
  long correct = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    if (predict(spec, params, x.row(i).transpose()) ==
        y[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return 100.0 * static_cast<Scalar>(correct) / static_cast<Scalar>(x.rows());
}

std::vector<Scalar> per_class_accuracy(const NetSpec& spec, const NetParams& params,
                                       const Matrix& x, const std::vector<int>& y,
                                       int num_classes) {
  std::vector<long> correct(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> count(static_cast<std::size_t>(num_classes), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    ++count[static_cast<std::size_t>(label)];
    if (predict(spec, params, x.row(i).transpose()) == label) {
      ++correct[static_cast<std::size_t>(label)];
    }
  }
  std::vector<Scalar> acc(static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t c = 0; c < acc.size(); ++c) {
    acc[c] = count[c] > 0
                 ? 100.0 * static_cast<Scalar>(correct[c]) /
                       static_cast<Scalar>(count[c])
                 : 0.0;
  }
  return acc;
}

Scalar robust_accuracy_percent(const NetSpec& spec, const NetParams& params,
                               const Matrix& x, const std::vector<int>& y,
                               const AttackConfig& atk) {
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ParameterError("robust_accuracy: labels do not match samples");
  }
  long correct = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    const Vector adv =
        pgd_attack(spec, params, x.row(i).transpose(), label, atk);
    if (predict(spec, params, adv) == label) {
      ++correct;
    }
  }
  return 100.0 * static_cast<Scalar>(correct) / static_cast<Scalar>(x.rows());
}

Matrix embed_all(const NetSpec& spec, const NetParams& params, const Matrix& x) {
  Matrix out(x.rows(), spec.embedding_dim());
  for (Index i = 0; i < x.rows(); ++i) {
    out.row(i) = forward_trace(spec, params, x.row(i).transpose())
                     .embedding(spec)
                     .transpose();
  }
  return out;
}

Scalar geoalign_score(const Matrix& source_emb, const Matrix& target_emb, int k,
                      Index cap, std::uint64_t seed) {
  const Matrix dists = cross_dists(source_emb, target_emb, k, cap, seed);
  const Scalar row_mean = dists.rowwise().minCoeff().mean();
  const Scalar col_mean = dists.colwise().minCoeff().mean();
  return 0.5 * (row_mean + col_mean);
}

Scalar geoalign_softmin(const Matrix& source_emb, const Matrix& target_emb, int k,
                        Scalar tau, Index cap, std::uint64_t seed) {
  const Matrix dists = cross_dists(source_emb, target_emb, k, cap, seed);
  LossWeights w;
  w.tau = tau;
  return loss_geom(dists, w);
}

}  // namespace gama
