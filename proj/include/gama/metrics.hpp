#pragma once

#include <cstdint>
#include <vector>

#include "gama/data.hpp"
#include "gama/model.hpp"
#include "gama/perturb.hpp"
#include "gama/types.hpp"

namespace gama {

/// Top-1 accuracy in percent; ties in the argmax resolve to the lower class.
Scalar accuracy_percent(const NetSpec& spec, const NetParams& params,
                        const Matrix& x, const std::vector<int>& y);

std::vector<Scalar> per_class_accuracy(const NetSpec& spec, const NetParams& params,
                                       const Matrix& x, const std::vector<int>& y,
                                       int num_classes);

/// Accuracy after a PGD attack on every sample.
Scalar robust_accuracy_percent(const NetSpec& spec, const NetParams& params,
                               const Matrix& x, const std::vector<int>& y,
                               const AttackConfig& atk);

/// Embeddings of every row of x, one embedding per row.
Matrix embed_all(const NetSpec& spec, const NetParams& params, const Matrix& x);

/// Symmetric average of hard-min geodesic distances between the two embedding
/// sets over a joint k-NN graph. Sets larger than `cap` rows are sub-sampled
/// by seeded shuffle.
Scalar geoalign_score(const Matrix& source_emb, const Matrix& target_emb, int k,
                      Index cap = 2000, std::uint64_t seed = 0);

/// Softmin relaxation of the same statistic (diagnostic companion to the
/// hard-min score).
Scalar geoalign_softmin(const Matrix& source_emb, const Matrix& target_emb, int k,
                        Scalar tau, Index cap = 2000, std::uint64_t seed = 0);

}  // namespace gama
