#pragma once

#include <random>

#include "gama/model.hpp"
#include "gama/types.hpp"

namespace gama::testutil {

inline Vector random_vector(Index n, std::mt19937_64& rng, Scalar scale = 1.0) {
  std::normal_distribution<Scalar> gauss(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = gauss(rng);
  return v;
}

/// Central finite differences of the composite batch loss with respect to
/// every parameter; the independent oracle for param_gradients.
inline NetParams fd_param_gradient(const NetSpec& spec, const NetParams& params,
                                   const CompositeBatch& batch,
                                   Scalar h = 1e-5) {
  NetParams grads = zeros_like(spec);
  NetParams work = params;
  const auto eval = [&]() { return composite_loss(spec, work, batch).total; };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Index r = 0; r < params.weights[l].rows(); ++r) {
      for (Index c = 0; c < params.weights[l].cols(); ++c) {
        const Scalar orig = work.weights[l](r, c);
        work.weights[l](r, c) = orig + h;
        const Scalar up = eval();
        work.weights[l](r, c) = orig - h;
        const Scalar down = eval();
        work.weights[l](r, c) = orig;
        grads.weights[l](r, c) = (up - down) / (2.0 * h);
      }
    }
    for (Index i = 0; i < params.biases[l].size(); ++i) {
      const Scalar orig = work.biases[l](i);
      work.biases[l](i) = orig + h;
      const Scalar up = eval();
      work.biases[l](i) = orig - h;
      const Scalar down = eval();
      work.biases[l](i) = orig;
      grads.biases[l](i) = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

/// Relative error between two parameter-shaped gradients, block by block;
/// returns the worst block.
inline Scalar max_block_relative_error(const NetParams& a, const NetParams& b) {
  Scalar worst = 0.0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    const Scalar wdenom = std::max({a.weights[l].norm(), b.weights[l].norm(), 1e-10});
    worst = std::max(worst, (a.weights[l] - b.weights[l]).norm() / wdenom);
    const Scalar bdenom = std::max({a.biases[l].norm(), b.biases[l].norm(), 1e-10});
    worst = std::max(worst, (a.biases[l] - b.biases[l]).norm() / bdenom);
  }
  return worst;
}

}  // namespace gama::testutil
