#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gama/data.hpp"
#include "gama/geometry.hpp"
#include "gama/model.hpp"
#include "gama/perturb.hpp"
#include "gama/types.hpp"

namespace gama {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;

  void validate() const;
};

enum class ManifoldRefresh { kPerBatch, kPerEpoch };
enum class ManifoldEstimator { kPca, kAutoencoder };
enum class GeomDistance { kKernel, kGraph };

struct AutoencoderConfig {
  int hidden = 32;
  int latent = 1;
  int epochs = 200;
  Scalar learning_rate = 1e-2;
};

struct TrainConfig {
  int epochs = 150;
  int batch_size_source = 64;
  int batch_size_target = 64;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  ManifoldRefresh manifold_refresh = ManifoldRefresh::kPerBatch;
  ManifoldEstimator estimator = ManifoldEstimator::kPca;
  /// Distance used inside the alignment loss. The kernel variant is the
  /// differentiable default; the graph variant contributes its value with the
  /// geodesic entries held constant during the backward pass.
  GeomDistance geom_distance = GeomDistance::kKernel;
  int knn_k = 10;
  TangentDim tangent = TangentDim::by_variance(0.9);
  LossWeights weights;
  PerturbConfig perturb;
  std::vector<int> hidden = {64, 32};
  Activation activation = Activation::kTanh;
  int embedding_layer = -1;  // -1 = penultimate
  Scalar source_val_fraction = 0.1;
  AutoencoderConfig autoencoder;

  void validate() const;
  NetSpec make_net_spec(int input_dim, int classes) const;
};

struct LossRow {
  long step = 0;
  LossBreakdown loss;
};

struct EpochMetrics {
  int epoch = 0;
  LossBreakdown mean_loss;
  Scalar selection_accuracy = 0.0;
  Scalar mean_explained_variance = 0.0;
};

struct TrainState {
  NetSpec spec;
  NetParams params;
  NetParams adam_m;
  NetParams adam_v;
  long step = 0;
  std::mt19937_64 rng;
  std::vector<LossRow> history;
  std::vector<EpochMetrics> epoch_metrics;
  std::vector<Index> target_order;
  std::size_t target_cursor = 0;
  std::optional<AutoencoderParams> autoencoder;
  std::vector<Index> train_indices;  // source rows used for updates
  std::vector<Index> val_indices;    // held-out source rows (UDA selection)
  std::vector<std::optional<TangentFrame>> frame_cache;  // per-epoch refresh
  Scalar last_epoch_mean_explained_variance = 0.0;
  NetParams best_params;
  Scalar best_selection_accuracy = -1.0;
  int best_epoch = -1;
  long clamp_events = 0;
};

struct FitReport {
  std::string mode;  // "uda" or "fsda"
  int epochs_run = 0;
  int best_epoch = -1;
  Scalar best_selection_accuracy = 0.0;
  Scalar wall_seconds = 0.0;
  long label_reads_after_training = 0;
  long clamp_events = 0;
  std::vector<EpochMetrics> epoch_metrics;
};

TrainState init_state(const DatasetBundle& bundle, const TrainConfig& cfg);

/// One pass over the source batches paired with cycled target batches:
/// manifold estimation on the clean source batch, gradient decomposition,
/// perturbed forwards, loss assembly, and one optimizer step per batch.
void train_epoch(TrainState& state, const DatasetBundle& bundle,
                 const TrainConfig& cfg);

/// Full training loop with best-checkpoint retention. Model selection uses
/// source-validation accuracy in UDA mode and target-test accuracy in FSDA
/// mode; UDA runs never read a target-test label.
std::pair<TrainState, FitReport> fit(const DatasetBundle& bundle,
                                     const TrainConfig& cfg);

/// Plain reconstruction-loss training for the off-manifold residual variant.
AutoencoderParams train_autoencoder(const Matrix& inputs, int hidden, int latent,
                                    int epochs, Scalar learning_rate,
                                    std::uint64_t seed);

}  // namespace gama
