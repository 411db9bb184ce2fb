#pragma once

#include "gama/types.hpp"

namespace gama {

/// Weights of the combined objective plus the softmin temperature.
struct LossWeights {
  Scalar lambda_on = 1.0;
  Scalar lambda_off = 0.5;
  Scalar lambda_geom = 0.1;
  Scalar tau = 0.1;

  void validate() const;
};

/// Per-term values of one objective evaluation.
/// total = cls + lambda_on*on + lambda_off*off + lambda_geom*geom.
struct LossBreakdown {
  Scalar cls = 0.0;
  Scalar on = 0.0;
  Scalar off = 0.0;
  Scalar geom = 0.0;
  Scalar total = 0.0;

  bool finite() const;
};

/// -tau * log sum_j exp(-v_j / tau), evaluated against the running minimum so
/// large ratios cannot overflow. Bounded by min(v) - tau*ln(n) <= softmin <= min(v).
Scalar softmin(const Vector& v, Scalar tau);

/// Softmax of -v/tau: the gradient of softmin(v, tau) with respect to v.
Vector softmin_weights(const Vector& v, Scalar tau);

/// Cross-entropy -log probs[y] with the probability clamped at 1e-12.
Scalar loss_cls(const Vector& probs, int y);

/// Squared distance between clean and on-manifold outputs (logit space).
Scalar loss_on(const Vector& f_x, const Vector& f_xon);

/// KL(p || q) with both distributions clamped at 1e-12 before the logs.
/// When `clamp_events` is given it is incremented once per clamped entry.
Scalar kl_divergence(const Vector& p, const Vector& q, long* clamp_events = nullptr);

/// KL(p_x || p_xoff) + |f_x - f_xoff|^2.
Scalar loss_off(const Vector& p_x, const Vector& p_xoff, const Vector& f_x,
                const Vector& f_xoff, long* clamp_events = nullptr);

/// Symmetric softmin discrepancy over a |S| x |T| distance matrix: the mean
/// over rows of softmin across columns plus the mean over columns of softmin
/// across rows.
Scalar loss_geom(const Matrix& dists, const LossWeights& w);

/// Weighted combination of the four terms.
LossBreakdown loss_total(Scalar cls, Scalar on, Scalar off, Scalar geom,
                         const LossWeights& w);

}  // namespace gama
