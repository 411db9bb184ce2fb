#include "gama/losses.hpp"

#include <cmath>
#include <string>

#include "gama/errors.hpp"

namespace gama {

namespace {
constexpr Scalar kProbFloor = 1e-12;
}

void LossWeights::validate() const {
  if (lambda_on < 0.0 || lambda_off < 0.0 || lambda_geom < 0.0) {
    throw ParameterError("LossWeights: lambdas must be nonnegative");
  }
  if (!(tau > 0.0)) {
    throw ParameterError("LossWeights: tau must be positive");
  }
}

bool LossBreakdown::finite() const {
  return std::isfinite(cls) && std::isfinite(on) && std::isfinite(off) &&
         std::isfinite(geom) && std::isfinite(total);
}

Scalar softmin(const Vector& v, Scalar tau) {
  if (v.size() == 0) {
    throw ParameterError("softmin: empty vector");
  }
  if (!(tau > 0.0)) {
    throw ParameterError("softmin: tau must be positive");
  }
  const Scalar lo = v.minCoeff();
  Scalar sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    sum += std::exp(-(v(i) - lo) / tau);
  }
  return lo - tau * std::log(sum);
}

Vector softmin_weights(const Vector& v, Scalar tau) {
  if (v.size() == 0) {
    throw ParameterError("softmin_weights: empty vector");
  }
  const Scalar lo = v.minCoeff();
  Vector w = ((lo - v.array()) / tau).exp();
  return w / w.sum();
}

Scalar loss_cls(const Vector& probs, int y) {
  if (y < 0 || static_cast<Index>(y) >= probs.size()) {
    throw ParameterError("loss_cls: label " + std::to_string(y) +
                         " out of range for " + std::to_string(probs.size()) +
                         " classes");
  }
  return -std::log(std::max(probs(y), kProbFloor));
}

Scalar loss_on(const Vector& f_x, const Vector& f_xon) {
  if (f_x.size() != f_xon.size()) {
    throw ParameterError("loss_on: dimension mismatch");
  }
  return (f_xon - f_x).squaredNorm();
}

Scalar kl_divergence(const Vector& p, const Vector& q, long* clamp_events) {
  if (p.size() != q.size()) {
    throw ParameterError("kl_divergence: dimension mismatch");
  }
  Scalar kl = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    Scalar pi = p(i);
    Scalar qi = q(i);
    if (pi < kProbFloor) {
      pi = kProbFloor;
      if (clamp_events) ++*clamp_events;
    }
    if (qi < kProbFloor) {
      qi = kProbFloor;
      if (clamp_events) ++*clamp_events;
    }
    kl += pi * (std::log(pi) - std::log(qi));
  }
  return kl;
}

Scalar loss_off(const Vector& p_x, const Vector& p_xoff, const Vector& f_x,
                const Vector& f_xoff, long* clamp_events) {
  if (f_x.size() != f_xoff.size()) {
    throw ParameterError("loss_off: dimension mismatch");
  }
  return kl_divergence(p_x, p_xoff, clamp_events) + (f_x - f_xoff).squaredNorm();
}

Scalar loss_geom(const Matrix& dists, const LossWeights& w) {
  if (dists.rows() == 0 || dists.cols() == 0) {
    throw ParameterError("loss_geom: empty source or target set");
  }
  w.validate();
  Scalar row_mean = 0.0;
  for (Index i = 0; i < dists.rows(); ++i) {
    row_mean += softmin(dists.row(i).transpose(), w.tau);
  }
  row_mean /= static_cast<Scalar>(dists.rows());
  Scalar col_mean = 0.0;
  for (Index j = 0; j < dists.cols(); ++j) {
    col_mean += softmin(dists.col(j), w.tau);
  }
  col_mean /= static_cast<Scalar>(dists.cols());
  return row_mean + col_mean;
}

LossBreakdown loss_total(Scalar cls, Scalar on, Scalar off, Scalar geom,
                         const LossWeights& w) {
  w.validate();
  const auto check = [](Scalar v, const char* name) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("loss_total: non-finite term ") + name);
    }
  };
  check(cls, "cls");
  check(on, "on");
  check(off, "off");
  check(geom, "geom");
  LossBreakdown b;
  b.cls = cls;
  b.on = on;
  b.off = off;
  b.geom = geom;
  b.total = cls + w.lambda_on * on + w.lambda_off * off + w.lambda_geom * geom;
  return b;
}

}  // namespace gama
