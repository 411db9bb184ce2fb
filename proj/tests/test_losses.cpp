#include "gama/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gama/errors.hpp"

using namespace gama;

namespace {

Vector random_simplex(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> uni(0.05, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = uni(rng);
  return v / v.sum();
}

}  // namespace

TEST(Softmin, SingleValueIsExact) {
  Vector v(1);
  v << 0.0;
  EXPECT_DOUBLE_EQ(softmin(v, 0.1), 0.0);
  v << 3.5;
  EXPECT_DOUBLE_EQ(softmin(v, 0.1), 3.5);
}

TEST(Softmin, LogSumExpBound) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Scalar> uni(0.0, 5.0);
  std::uniform_real_distribution<Scalar> taus(1e-3, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 20);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = uni(rng);
    const Scalar tau = taus(rng);
    const Scalar s = softmin(v, tau);
    const Scalar lo = v.minCoeff();
    EXPECT_LE(s, lo + 1e-12);
    EXPECT_GE(s, lo - tau * std::log(static_cast<Scalar>(n)) - 1e-12);
  }
}

TEST(Softmin, SmallTauApproachesHardMin) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<Scalar> uni(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v(8);
    for (Index i = 0; i < 8; ++i) v(i) = uni(rng);
    EXPECT_NEAR(softmin(v, 1e-4), v.minCoeff(), 1e-3);
  }
}

TEST(Softmin, WeightsAreGradient) {
  Vector v(3);
  v << 0.3, 1.0, 0.5;
  const Scalar tau = 0.2;
  const Vector w = softmin_weights(v, tau);
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  const Scalar h = 1e-7;
  for (Index i = 0; i < 3; ++i) {
    Vector vp = v, vm = v;
    vp(i) += h;
    vm(i) -= h;
    const Scalar fd = (softmin(vp, tau) - softmin(vm, tau)) / (2 * h);
    EXPECT_NEAR(w(i), fd, 1e-6);
  }
}

TEST(LossCls, PerfectPrediction) {
  Vector probs(3);
  probs << 1e-12, 1.0 - 2e-12, 1e-12;
  EXPECT_LE(loss_cls(probs, 1), 1e-9);
}

TEST(LossCls, UniformIsLogC) {
  for (Index c : {2, 3, 10}) {
    const Vector probs = Vector::Constant(c, 1.0 / static_cast<Scalar>(c));
    EXPECT_NEAR(loss_cls(probs, 0), std::log(static_cast<Scalar>(c)), 1e-12);
  }
}

TEST(LossCls, HandComputedValue) {
  Vector probs(3);
  probs << 0.2, 0.5, 0.3;
  EXPECT_NEAR(loss_cls(probs, 1), 0.6931, 1e-4);
}

TEST(LossCls, InvalidLabel) {
  EXPECT_THROW(loss_cls(Vector::Constant(3, 1.0 / 3), 3), ParameterError);
  EXPECT_THROW(loss_cls(Vector::Constant(3, 1.0 / 3), -1), ParameterError);
}

TEST(LossOn, BasicValues) {
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 1.0;
  EXPECT_DOUBLE_EQ(loss_on(a, a), 0.0);
  EXPECT_DOUBLE_EQ(loss_on(a, b), 2.0);
  EXPECT_THROW(loss_on(a, Vector::Zero(3)), ParameterError);
}

TEST(LossOn, BatchMeanMatchesNaiveLoop) {
  std::mt19937_64 rng(13);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  std::vector<Vector> fx, fxon;
  for (int i = 0; i < 17; ++i) {
    Vector a(4), b(4);
    for (Index j = 0; j < 4; ++j) {
      a(j) = gauss(rng);
      b(j) = gauss(rng);
    }
    fx.push_back(a);
    fxon.push_back(b);
  }
  Scalar mean = 0.0;
  for (int i = 0; i < 17; ++i) mean += loss_on(fx[i], fxon[i]);
  mean /= 17.0;
  Scalar naive = 0.0;
  for (int i = 0; i < 17; ++i) {
    for (Index j = 0; j < 4; ++j) {
      const Scalar d = fxon[i](j) - fx[i](j);
      naive += d * d / 17.0;
    }
  }
  EXPECT_NEAR(mean, naive, 1e-12);
}

TEST(LossOff, IdenticalInputsGiveZero) {
  Vector p(2), f(2);
  p << 0.4, 0.6;
  f << 1.0, -1.0;
  EXPECT_DOUBLE_EQ(loss_off(p, p, f, f), 0.0);
}

TEST(LossOff, ClampedKlMatchesHandValue) {
  Vector p(2), q(2), f(2);
  p << 1.0, 0.0;  // zero entry hits the clamp
  q << 0.5, 0.5;
  f << 0.0, 0.0;
  long clamps = 0;
  EXPECT_NEAR(loss_off(p, q, f, f, &clamps), std::log(2.0), 1e-3);
  EXPECT_EQ(clamps, 1);
}

TEST(LossOff, KlNonnegativeOnRandomSimplexPairs) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 6);
    const Vector p = random_simplex(n, rng);
    const Vector q = random_simplex(n, rng);
    EXPECT_GE(kl_divergence(p, q), -1e-12);
  }
}

TEST(LossOff, KlZeroIffEqual) {
  std::mt19937_64 rng(21);
  const Vector p = random_simplex(4, rng);
  EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-12);
  Vector q = p;
  q(0) += 0.05;
  q(1) -= 0.05;
  EXPECT_GT(kl_divergence(p, q), 1e-4);
}

TEST(LossGeom, CoincidentSingletons) {
  LossWeights w;
  w.tau = 0.1;
  const Matrix dists = Matrix::Zero(1, 1);
  EXPECT_DOUBLE_EQ(loss_geom(dists, w), 0.0);
}

TEST(LossGeom, HandComputedTwoTargets) {
  LossWeights w;
  w.tau = 1.0;
  Matrix dists(1, 2);
  dists << 1.0, 1.0;
  // Source side: softmin over (1,1) at tau=1 is 1 - ln 2; each target column
  // holds the single value 1. Total: (1 - ln 2) + 1.
  EXPECT_NEAR(loss_geom(dists, w), 2.0 - std::log(2.0), 1e-12);
}

TEST(LossGeom, SmallTauMatchesHardMin) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<Scalar> uni(0.1, 4.0);
  LossWeights w;
  w.tau = 1e-4;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix dists(6, 5);
    for (Index i = 0; i < 6; ++i) {
      for (Index j = 0; j < 5; ++j) {
        dists(i, j) = uni(rng);
      }
    }
    const Scalar hard =
        dists.rowwise().minCoeff().mean() + dists.colwise().minCoeff().mean();
    EXPECT_NEAR(loss_geom(dists, w), hard, 1e-3);
  }
}

TEST(LossGeom, SymmetricUnderSwap) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<Scalar> uni(0.1, 4.0);
  LossWeights w;
  Matrix dists(4, 7);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 7; ++j) {
      dists(i, j) = uni(rng);
    }
  }
  EXPECT_NEAR(loss_geom(dists, w), loss_geom(dists.transpose(), w), 1e-12);
}

TEST(LossGeom, IdenticalSetsNearZeroAtSmallTau) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<Scalar> uni(-1.0, 1.0);
  Matrix emb(8, 3);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 3; ++j) {
      emb(i, j) = uni(rng);
    }
  }
  Matrix dists(8, 8);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 8; ++j) {
      dists(i, j) = (emb.row(i) - emb.row(j)).norm();
    }
  }
  LossWeights w;
  w.tau = 1e-4;
  EXPECT_NEAR(loss_geom(dists, w), 0.0, 1e-3);
}

TEST(LossGeom, EmptySetRejected) {
  LossWeights w;
  EXPECT_THROW(loss_geom(Matrix(0, 3), w), ParameterError);
}

TEST(LossTotal, ZeroWeightsReduceToCls) {
  LossWeights w;
  w.lambda_on = w.lambda_off = w.lambda_geom = 0.0;
  const LossBreakdown b = loss_total(1.7, 2.0, 3.0, 4.0, w);
  EXPECT_DOUBLE_EQ(b.total, 1.7);
}

TEST(LossTotal, WeightedArithmetic) {
  LossWeights w;
  w.lambda_on = 0.5;
  w.lambda_off = 0.25;
  w.lambda_geom = 0.1;
  const LossBreakdown b = loss_total(1.0, 2.0, 3.0, 4.0, w);
  EXPECT_NEAR(b.total, 3.15, 1e-12);
  EXPECT_NEAR(b.total,
              b.cls + w.lambda_on * b.on + w.lambda_off * b.off +
                  w.lambda_geom * b.geom,
              1e-10);
}

TEST(LossTotal, MonotoneInWeights) {
  LossWeights lo, hi;
  lo.lambda_on = 0.1;
  hi.lambda_on = 0.8;
  EXPECT_LE(loss_total(1.0, 2.0, 3.0, 4.0, lo).total,
            loss_total(1.0, 2.0, 3.0, 4.0, hi).total);
}

TEST(LossTotal, NonFiniteTermNamed) {
  LossWeights w;
  try {
    loss_total(1.0, std::nan(""), 0.0, 0.0, w);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("on"), std::string::npos);
  }
}
