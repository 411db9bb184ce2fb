#include "gama/perturb.hpp"

#include <cmath>

#include "gama/errors.hpp"

namespace gama {

void PerturbConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) {
    throw ParameterError("PerturbConfig: step sizes must be nonnegative");
  }
  if (!(zero_norm_tol > 0.0)) {
    throw ParameterError("PerturbConfig: zero_norm_tol must be positive");
  }
}

std::pair<Vector, Vector> decompose(const TangentFrame& frame, const Vector& grad) {
  Vector delta_on = project_tangent(frame, grad);
  Vector delta_off = grad - delta_on;
  return {std::move(delta_on), std::move(delta_off)};
}

PerturbationPair make_perturbed(const Vector& x, const Vector& delta_on,
                                const Vector& delta_off, const PerturbConfig& cfg) {
  cfg.validate();
  if (delta_on.size() != x.size() || delta_off.size() != x.size()) {
    throw ParameterError("make_perturbed: dimension mismatch");
  }
  PerturbationPair pair;
  pair.delta_on = delta_on;
  pair.delta_off = delta_off;

  const Scalar norm_on = delta_on.norm();
  if (norm_on > cfg.zero_norm_tol) {
    pair.x_on = x + (cfg.alpha / norm_on) * delta_on;
  } else {
    pair.skipped_on = true;
    pair.x_on = x;
  }

  const Scalar norm_off = delta_off.norm();
  if (norm_off > cfg.zero_norm_tol) {
    pair.x_off = x + (cfg.beta / norm_off) * delta_off;
  } else {
    pair.skipped_off = true;
    pair.x_off = x;
  }
  return pair;
}

void AttackConfig::validate() const {
  if (epsilon < 0.0) {
    throw ParameterError("AttackConfig: epsilon must be nonnegative");
  }
  if (steps < 1) {
    throw ParameterError("AttackConfig: steps must be at least 1");
  }
  if (!(step_size > 0.0)) {
    throw ParameterError("AttackConfig: step_size must be positive");
  }
}

Vector pgd_attack(const NetSpec& spec, const NetParams& params, const Vector& x,
                  int y, const AttackConfig& atk, const Bounds* bounds,
                  std::mt19937_64* rng) {
  atk.validate();
  const Vector lo = x.array() - atk.epsilon;
  const Vector hi = x.array() + atk.epsilon;

  Vector adv = x;
  if (atk.random_start && rng) {
    std::uniform_real_distribution<Scalar> dist(-atk.epsilon, atk.epsilon);
    for (Index i = 0; i < adv.size(); ++i) {
      adv(i) += dist(*rng);
    }
    adv = adv.cwiseMax(lo).cwiseMin(hi);
  }

  for (int t = 0; t < atk.steps; ++t) {
    const Vector g = input_gradient(spec, params, adv, y);
    if (!g.allFinite()) {
      throw NumericError("pgd_attack: non-finite gradient");
    }
    adv += atk.step_size * g.unaryExpr([](Scalar v) {
      return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    });
    adv = adv.cwiseMax(lo).cwiseMin(hi);
    if (bounds) {
      adv = adv.cwiseMax(bounds->lo).cwiseMin(bounds->hi);
    }
  }
  return adv;
}

}  // namespace gama
