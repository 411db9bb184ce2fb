#pragma once

#include <random>
#include <utility>

#include "gama/geometry.hpp"
#include "gama/model.hpp"
#include "gama/types.hpp"

namespace gama {

/// Step sizes for the on-/off-manifold perturbations (input-space units).
struct PerturbConfig {
  Scalar alpha = 0.1;
  Scalar beta = 0.1;
  Scalar zero_norm_tol = 1e-12;

  void validate() const;
};

/// Gradient decomposition and the perturbed inputs built from it. A skipped
/// side keeps the clean input unchanged.
struct PerturbationPair {
  Vector delta_on;
  Vector delta_off;
  Vector x_on;
  Vector x_off;
  bool skipped_on = false;
  bool skipped_off = false;
};

/// delta_on = projection of grad onto the frame, delta_off = remainder.
/// The two parts sum back to grad and are mutually orthogonal.
std::pair<Vector, Vector> decompose(const TangentFrame& frame, const Vector& grad);

/// x_on = x + alpha * delta_on/|delta_on| (and symmetrically for x_off).
/// Components with norm at or below zero_norm_tol are skipped.
PerturbationPair make_perturbed(const Vector& x, const Vector& delta_on,
                                const Vector& delta_off, const PerturbConfig& cfg);

/// L-inf PGD budget. epsilon = 0 degenerates to the null attack used for
/// clean-equals-robust checks.
struct AttackConfig {
  Scalar epsilon = 0.1;
  int steps = 10;
  Scalar step_size = 0.025;
  bool random_start = false;

  void validate() const;
};

/// Optional per-dimension clamp applied after each projection.
struct Bounds {
  Vector lo;
  Vector hi;
};

/// Iterated signed-gradient ascent on the cross-entropy loss, projected back
/// into the epsilon-ball around the original input after every step.
/// `rng` is only consulted when atk.random_start is set.
Vector pgd_attack(const NetSpec& spec, const NetParams& params, const Vector& x,
                  int y, const AttackConfig& atk, const Bounds* bounds = nullptr,
                  std::mt19937_64* rng = nullptr);

}  // namespace gama
