// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gama/experiment.hpp"
#include "gama/geometry.hpp"
#include "gama/losses.hpp"
#include "gama/metrics.hpp"
#include "gama/model.hpp"
#include "gama/perturb.hpp"
#include "gama/trainer.hpp"
#include "graph_oracles.hpp"
#include "test_util.hpp"

using namespace gama;
using testutil::fd_param_gradient;
using testutil::max_block_relative_error;
using testutil::random_vector;

namespace {

class Criterion {
 public:
  Criterion(int number, std::string description)
      : number_(number), description_(std::move(description)) {}
  ~Criterion() {
    std::printf("[CRITERION %d] %s: %s\n", number_, description_.c_str(),
                ::testing::Test::HasFailure() ? "FAIL" : "PASS");
    std::fflush(stdout);
  }

 private:
  int number_;
  std::string description_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Matrix random_orthonormal(Index d, Index m, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  Matrix a(d, m);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < m; ++j) {
      a(i, j) = gauss(rng);
    }
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  return Matrix(qr.householderQ()).leftCols(m);
}

TangentFrame frame_from_basis(Matrix basis) {
  TangentFrame f;
  f.base = Vector::Zero(basis.rows());
  f.basis = std::move(basis);
  f.explained_variance = 1.0;
  return f;
}

/// Shared configuration of the end-to-end adaptation experiment.
ExperimentConfig adaptation_config() {
  ExperimentConfig cfg;
  cfg.dataset.generator = "two_moons";
  cfg.dataset.n_per_domain = 500;
  cfg.dataset.noise = 0.1;
  cfg.dataset.rotation_deg = 30.0;
  cfg.dataset.translation = Vector::Zero(2);
  cfg.dataset.seed = 1;
  cfg.dataset.protocol = Protocol::kUda;

  cfg.train.epochs = 150;
  cfg.train.batch_size_source = 64;
  cfg.train.batch_size_target = 64;
  cfg.train.seed = 1;
  cfg.train.knn_k = 10;
  cfg.train.hidden = {64, 32};
  // Weights and step sizes fixed by a coarse sweep on this dataset family.
  cfg.train.weights.lambda_on = 1.0;
  cfg.train.weights.lambda_off = 1.0;
  cfg.train.weights.lambda_geom = 0.1;
  cfg.train.weights.tau = 0.1;
  cfg.train.perturb.alpha = 0.2;
  cfg.train.perturb.beta = 0.2;

  cfg.attack.epsilon = 0.1;
  cfg.attack.steps = 10;
  cfg.attack.step_size = 0.025;
  cfg.metrics.geoalign_k = 10;
  return cfg;
}

}  // namespace

TEST(Acceptance, Criterion1DecompositionExactness) {
  Criterion c(1, "decomposition exactness over 1000 random frame/gradient pairs");
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = 2 + static_cast<Index>(rng() % 15);  // d in {2..16}
    const Index m = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(d));
    const TangentFrame frame = frame_from_basis(random_orthonormal(d, m, rng));
    const Vector grad = random_vector(d, rng, 2.0);
    const auto [on, off] = decompose(frame, grad);
    ASSERT_LE((on + off - grad).norm(), 1e-9 * grad.norm());
    ASSERT_LE(std::abs(on.dot(off)), 1e-8 * grad.squaredNorm());
  }
  EXPECT_LT(seconds_since(t0), 5.0);
}

TEST(Acceptance, Criterion2ProjectionProperties) {
  Criterion c(2, "projection idempotence and non-expansiveness");
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = 2 + static_cast<Index>(rng() % 15);
    const Index m = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(d));
    const TangentFrame frame = frame_from_basis(random_orthonormal(d, m, rng));
    const Vector v = random_vector(d, rng, 3.0);
    const Vector p = project_tangent(frame, v);
    const Vector pp = project_tangent(frame, p);
    ASSERT_LE((pp - p).norm(), 1e-10);
    ASSERT_LE(p.norm(), v.norm() + 1e-12);
  }
}

TEST(Acceptance, Criterion3GeodesicOracleEquivalence) {
  Criterion c(3, "geodesic distances match Floyd-Warshall with metric axioms");
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<Scalar> uni(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 8 + static_cast<Index>(rng() % 23);  // n <= 30
    Matrix pts(n, 2);
    for (Index i = 0; i < n; ++i) {
      pts(i, 0) = uni(rng);
      pts(i, 1) = uni(rng);
    }
    const auto set = PointSet::from_matrix(pts);
    const int k = 2 + static_cast<int>(rng() % 3);
    const KnnGraph graph = build_knn_graph(set, k, true);
    const GeodesicIndex index = geodesic_distances(set, graph);
    const Matrix oracle = testutil::floyd_warshall(graph);

    for (Index i = 0; i < n; ++i) {
      ASSERT_DOUBLE_EQ(index.dist(i, i), 0.0);
      for (Index j = 0; j < n; ++j) {
        if (std::isfinite(oracle(i, j))) {
          ASSERT_NEAR(index.dist(i, j), oracle(i, j), 1e-9);
        } else {
          ASSERT_DOUBLE_EQ(index.dist(i, j), index.disconnected_penalty);
        }
        ASSERT_GE(index.dist(i, j), 0.0);
        ASSERT_NEAR(index.dist(i, j), index.dist(j, i), 1e-12);
      }
    }
    // Triangle inequality, exhaustively over all triples.
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        for (Index u = 0; u < n; ++u) {
          ASSERT_LE(index.dist(i, j),
                    index.dist(i, u) + index.dist(u, j) + 1e-9);
        }
      }
    }
  }
}

TEST(Acceptance, Criterion4GradientCorrectness) {
  Criterion c(4, "loss-term parameter gradients match finite differences");
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(104);

  int instances = 0;
  for (int trial = 0; trial < 26; ++trial) {
    const NetSpec spec = NetSpec::mlp(3, {6, 4}, 3);
    const NetParams params = init_params(spec, 400 + trial);

    for (int mode = 0; mode < 4; ++mode) {
      CompositeBatch batch;
      batch.weights.lambda_on = 0.0;
      batch.weights.lambda_off = 0.0;
      batch.weights.lambda_geom = 0.0;
      batch.weights.tau = 0.25;
      for (int i = 0; i < 4; ++i) {
        batch.x.push_back(random_vector(3, rng));
        batch.y.push_back(static_cast<int>(rng() % 3));
      }
      if (mode == 1) {
        batch.weights.lambda_on = 1.3;
        for (int i = 0; i < 4; ++i) {
          batch.x_on.push_back(batch.x[static_cast<std::size_t>(i)] +
                               0.1 * random_vector(3, rng));
        }
      }
      if (mode == 2) {
        batch.weights.lambda_off = 0.7;
        for (int i = 0; i < 4; ++i) {
          batch.x_off.push_back(batch.x[static_cast<std::size_t>(i)] +
                                0.1 * random_vector(3, rng));
        }
      }
      if (mode == 3) {
        batch.weights.lambda_geom = 0.9;
        for (int j = 0; j < 5; ++j) {
          batch.x_target.push_back(random_vector(3, rng));
        }
        batch.geom = GeomCoupling::kernel(0.8);
      }

      const BatchGradients bg = param_gradients(spec, params, batch);
      const NetParams fd = fd_param_gradient(spec, params, batch, 1e-5);
      ASSERT_LT(max_block_relative_error(bg.grads, fd), 1e-4)
          << "trial " << trial << " mode " << mode;
      ++instances;
    }
  }
  EXPECT_GE(instances, 100);
  EXPECT_LT(seconds_since(t0), 60.0);
}

TEST(Acceptance, Criterion5SoftminBound) {
  Criterion c(5, "softmin obeys the log-sum-exp bounds");
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<Scalar> uni(0.0, 5.0);
  std::uniform_real_distribution<Scalar> taus(1e-3, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 24);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = uni(rng);
    const Scalar tau = taus(rng);
    const Scalar s = softmin(v, tau);
    const Scalar lo = v.minCoeff();
    ASSERT_LE(s, lo + 1e-12);
    ASSERT_GE(s, lo - tau * std::log(static_cast<Scalar>(n)) - 1e-12);
    ASSERT_NEAR(softmin(v, 1e-4), lo, 1e-3);
  }
}

TEST(Acceptance, Criterion6PgdContainment) {
  Criterion c(6, "PGD stays in the epsilon ball; zero epsilon equals clean");
  std::mt19937_64 rng(106);

  const NetSpec spec = NetSpec::mlp(2, {16, 8}, 2);
  const NetParams params = init_params(spec, 600);
  AttackConfig atk;
  atk.epsilon = 0.1;
  atk.steps = 10;
  atk.step_size = 0.025;
  for (int trial = 0; trial < 500; ++trial) {
    const Vector x = random_vector(2, rng);
    const int y = static_cast<int>(rng() % 2);
    const Vector adv = pgd_attack(spec, params, x, y, atk);
    ASSERT_LE((adv - x).cwiseAbs().maxCoeff(), atk.epsilon + 1e-12);
  }

  // Trained model: the null attack reproduces clean accuracy exactly.
  DatasetBundle bundle =
      gen_two_moons_shift(120, 0.1, 30.0, Vector::Zero(2), 7);
  bundle.drop_target_train_labels();
  bundle.reset_label_reads();
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size_source = 32;
  tc.batch_size_target = 32;
  tc.hidden = {16, 8};
  tc.knn_k = 5;
  tc.seed = 2;
  const auto [state, report] = fit(bundle, tc);

  std::vector<int> labels;
  for (Index i = 0; i < bundle.target_test.size(); ++i) {
    labels.push_back(bundle.target_test_label(i));
  }
  const Scalar clean = accuracy_percent(state.spec, state.best_params,
                                        bundle.target_test.x, labels);
  AttackConfig null_attack = atk;
  null_attack.epsilon = 0.0;
  const Scalar robust_null = robust_accuracy_percent(
      state.spec, state.best_params, bundle.target_test.x, labels, null_attack);
  ASSERT_DOUBLE_EQ(robust_null, clean);

  const Scalar robust = robust_accuracy_percent(
      state.spec, state.best_params, bundle.target_test.x, labels, atk);
  ASSERT_LE(robust, clean + 0.5);
}

TEST(Acceptance, Criterion7EndToEndAdaptation) {
  Criterion c(7, "directional adaptation and ablation structure on two moons");
  const auto t0 = std::chrono::steady_clock::now();

  const auto dir = std::filesystem::temp_directory_path() / "gama_acceptance7";
  std::filesystem::remove_all(dir);
  const ExperimentConfig cfg = adaptation_config();
  const AblationReport report =
      run_ablate(cfg, {"geom", "on", "off"}, 5, true, dir.string());

  const Scalar full_acc = report.mean("full", &AblationRow::target_accuracy);
  const Scalar base_acc =
      report.mean("source_only", &AblationRow::target_accuracy);
  const Scalar full_robust = report.mean("full", &AblationRow::robust_accuracy);
  const Scalar nooff_robust =
      report.mean("no_off", &AblationRow::robust_accuracy);
  const Scalar noon_acc = report.mean("no_on", &AblationRow::target_accuracy);
  const Scalar full_geo = report.mean("full", &AblationRow::geoalign);
  const Scalar nogeom_geo = report.mean("no_geom", &AblationRow::geoalign);

  std::printf("  full:        acc=%.2f robust=%.2f geoalign=%.4f\n", full_acc,
              full_robust, full_geo);
  std::printf("  source_only: acc=%.2f\n", base_acc);
  std::printf("  no_geom:     geoalign=%.4f\n", nogeom_geo);
  std::printf("  no_off:      robust=%.2f\n", nooff_robust);
  std::printf("  no_on:       acc=%.2f\n", noon_acc);

  // (a) adaptation beats the source-only baseline by at least 5 points
  EXPECT_GE(full_acc - base_acc, 5.0);
  // (b) removing the alignment loss worsens (raises) the GeoAlign score
  EXPECT_GT(nogeom_geo, full_geo);
  // (c) removing the off-manifold component lowers robust accuracy
  EXPECT_LT(nooff_robust, full_robust);
  // (d) removing the on-manifold component lowers clean target accuracy
  EXPECT_LT(noon_acc, full_acc);

  // Report-level invariants over every run in the grid.
  for (const auto& row : report.rows) {
    EXPECT_LE(row.robust_accuracy, row.target_accuracy + 0.5);
    EXPECT_GE(row.geoalign, 0.0);
    EXPECT_EQ(row.label_reads_during_training, 0)
        << row.variant << " seed " << row.seed;
  }

  EXPECT_LT(seconds_since(t0), 600.0);
  std::filesystem::remove_all(dir);
}

TEST(Acceptance, Criterion8Determinism) {
  Criterion c(8, "identical config and seed give byte-identical loss CSVs");
  const auto dir_a = std::filesystem::temp_directory_path() / "gama_acc8_a";
  const auto dir_b = std::filesystem::temp_directory_path() / "gama_acc8_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  ExperimentConfig cfg = adaptation_config();
  cfg.train.epochs = 20;
  cfg.output_dir = dir_a.string();
  const TrainArtifacts first = run_train(cfg);
  cfg.output_dir = dir_b.string();
  const TrainArtifacts second = run_train(cfg);

  const auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string csv_a = slurp(first.loss_csv_path);
  EXPECT_FALSE(csv_a.empty());
  EXPECT_EQ(csv_a, slurp(second.loss_csv_path));
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST(Acceptance, Criterion9UdaProtocolGuard) {
  Criterion c(9, "UDA training never reads a target-test label");
  // The counting mechanism itself:
  const DatasetBundle probe =
      gen_two_moons_shift(40, 0.1, 0.0, Vector::Zero(2), 3);
  EXPECT_EQ(probe.label_reads(), 0);
  probe.target_test_label(0);
  EXPECT_EQ(probe.label_reads(), 1);

  // A full-size UDA run from the criterion-7 configuration.
  ExperimentConfig cfg = adaptation_config();
  cfg.train.epochs = 30;
  const DatasetBundle bundle = cfg.dataset.build();
  EXPECT_FALSE(bundle.is_fsda());
  const auto [state, report] = fit(bundle, cfg.train);
  EXPECT_EQ(report.mode, "uda");
  EXPECT_EQ(report.label_reads_after_training, 0);
  EXPECT_EQ(bundle.label_reads(), 0);
}
