#include "gama/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gama/errors.hpp"
#include "gama/metrics.hpp"

namespace gama {

namespace {

void adam_update(NetParams& params, NetParams& m, NetParams& v,
                 const NetParams& grads, const OptimizerConfig& opt, long step) {
  const Scalar bc1 = 1.0 - std::pow(opt.beta1, static_cast<Scalar>(step));
  const Scalar bc2 = 1.0 - std::pow(opt.beta2, static_cast<Scalar>(step));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    auto upd = [&](auto& p, auto& mm, auto& vv, const auto& g) {
      mm = opt.beta1 * mm + (1.0 - opt.beta1) * g;
      vv = opt.beta2 * vv.array() + (1.0 - opt.beta2) * g.array().square();
      p.array() -= opt.learning_rate * (mm.array() / bc1) /
                   ((vv.array() / bc2).sqrt() + opt.eps);
    };
    upd(params.weights[l], m.weights[l], v.weights[l], grads.weights[l]);
    upd(params.biases[l], m.biases[l], v.biases[l], grads.biases[l]);
  }
}

void sgd_update(NetParams& params, const NetParams& grads,
                const OptimizerConfig& opt) {
  params.add_scaled(grads, -opt.learning_rate);
}

/// Off-manifold direction from the autoencoder residual: delta_off is the
/// gradient component along the normalized residual, delta_on the remainder.
std::pair<Vector, Vector> decompose_autoencoder(const AutoencoderParams& ae,
                                                const Vector& x, const Vector& grad,
                                                Scalar zero_norm_tol) {
  const Vector residual = autoencoder_residual(ae, x);
  const Scalar norm = residual.norm();
  if (norm <= zero_norm_tol) {
    return {grad, Vector::Zero(grad.size())};
  }
  const Vector dir = residual / norm;
  Vector delta_off = dir.dot(grad) * dir;
  Vector delta_on = grad - delta_off;
  return {std::move(delta_on), std::move(delta_off)};
}

std::optional<TangentFrame> try_estimate_frame(const PointSet& pts,
                                               const KnnGraph& graph, int index,
                                               const TangentDim& dim) {
  try {
    return estimate_tangent(pts, graph, index, dim);
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

std::vector<std::optional<TangentFrame>> estimate_frames(const Matrix& x, int k,
                                                         const TangentDim& dim) {
  const Index n = x.rows();
  std::vector<std::optional<TangentFrame>> frames(
      static_cast<std::size_t>(n));
  const int k_eff = std::min<int>(k, static_cast<int>(n) - 1);
  if (k_eff < 1) return frames;
  const PointSet pts = PointSet::from_matrix(x);
  const KnnGraph graph = build_knn_graph(pts, k_eff, false);
  for (Index i = 0; i < n; ++i) {
    frames[static_cast<std::size_t>(i)] =
        try_estimate_frame(pts, graph, static_cast<int>(i), dim);
  }
  return frames;
}

Matrix rows_of(const Matrix& x, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  return out;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (learning_rate < 0.0) {
    throw ParameterError("OptimizerConfig: learning rate must be nonnegative");
  }
  if (kind == OptimizerKind::kAdam) {
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw ParameterError("OptimizerConfig: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) {
      throw ParameterError("OptimizerConfig: eps must be positive");
    }
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ParameterError("TrainConfig: epochs must be >= 0");
  if (batch_size_source < 1 || batch_size_target < 1) {
    throw ParameterError("TrainConfig: batch sizes must be positive");
  }
  if (knn_k < 1) throw ParameterError("TrainConfig: knn_k must be positive");
  if (source_val_fraction < 0.0 || source_val_fraction > 0.5) {
    throw ParameterError("TrainConfig: source_val_fraction must be in [0, 0.5]");
  }
  if (hidden.empty()) {
    throw ParameterError("TrainConfig: need at least one hidden layer");
  }
  optimizer.validate();
  weights.validate();
  perturb.validate();
}

NetSpec TrainConfig::make_net_spec(int input_dim, int classes) const {
  NetSpec spec = NetSpec::mlp(input_dim, hidden, classes, activation);
  if (embedding_layer >= 0) {
    spec.embedding_layer = embedding_layer;
    spec.validate();
  }
  return spec;
}

TrainState init_state(const DatasetBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  bundle.validate();
  TrainState state;
  state.spec = cfg.make_net_spec(static_cast<int>(bundle.dim()),
                                 bundle.num_classes());
  state.params = init_params(state.spec, cfg.seed);
  state.adam_m = zeros_like(state.spec);
  state.adam_v = zeros_like(state.spec);
  state.best_params = state.params;
  state.rng.seed(cfg.seed);

  const Index ns = bundle.source_train.size();
  std::vector<Index> order(static_cast<std::size_t>(ns));
  std::iota(order.begin(), order.end(), Index{0});
  if (!bundle.is_fsda() && cfg.source_val_fraction > 0.0) {
    std::shuffle(order.begin(), order.end(), state.rng);
    auto n_val = static_cast<std::size_t>(
        std::llround(cfg.source_val_fraction * static_cast<Scalar>(ns)));
    n_val = std::min(n_val, order.size() - 1);
    state.val_indices.assign(order.begin(),
                             order.begin() + static_cast<std::ptrdiff_t>(n_val));
    state.train_indices.assign(
        order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(state.val_indices.begin(), state.val_indices.end());
    std::sort(state.train_indices.begin(), state.train_indices.end());
  } else {
    state.train_indices = std::move(order);
  }

  state.target_order.resize(static_cast<std::size_t>(bundle.target_train.size()));
  std::iota(state.target_order.begin(), state.target_order.end(), Index{0});
  std::shuffle(state.target_order.begin(), state.target_order.end(), state.rng);

  if (cfg.estimator == ManifoldEstimator::kAutoencoder) {
    state.autoencoder = train_autoencoder(
        bundle.source_train.x, cfg.autoencoder.hidden, cfg.autoencoder.latent,
        cfg.autoencoder.epochs, cfg.autoencoder.learning_rate, cfg.seed + 17);
  }
  return state;
}

void train_epoch(TrainState& state, const DatasetBundle& bundle,
                 const TrainConfig& cfg) {
  const Matrix& sx = bundle.source_train.x;
  const std::vector<int> slabels = bundle.source_train.required_labels();

  std::vector<Index> order = state.train_indices;
  std::shuffle(order.begin(), order.end(), state.rng);

  if (cfg.manifold_refresh == ManifoldRefresh::kPerEpoch &&
      cfg.estimator == ManifoldEstimator::kPca) {
    // One frame per source-train point, reused by every batch this epoch.
    state.frame_cache.assign(static_cast<std::size_t>(sx.rows()), std::nullopt);
    const auto frames = estimate_frames(rows_of(sx, state.train_indices),
                                        cfg.knn_k, cfg.tangent);
    for (std::size_t i = 0; i < state.train_indices.size(); ++i) {
      state.frame_cache[static_cast<std::size_t>(state.train_indices[i])] =
          frames[i];
    }
  }

  Scalar evar_sum = 0.0;
  long evar_count = 0;
  const std::size_t n_train = order.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size_source);

  for (std::size_t start = 0; start < n_train; start += bs) {
    const std::size_t stop = std::min(start + bs, n_train);
    const std::vector<Index> batch_rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                        order.begin() + static_cast<std::ptrdiff_t>(stop));
    const std::size_t bn = batch_rows.size();
    const Matrix bx = rows_of(sx, batch_rows);

    // Local manifold structure on the clean source batch.
    std::vector<std::optional<TangentFrame>> frames;
    if (cfg.estimator == ManifoldEstimator::kPca) {
      if (cfg.manifold_refresh == ManifoldRefresh::kPerBatch) {
        frames = estimate_frames(bx, cfg.knn_k, cfg.tangent);
      } else {
        frames.reserve(bn);
        for (Index row : batch_rows) {
          frames.push_back(state.frame_cache[static_cast<std::size_t>(row)]);
        }
      }
      for (const auto& f : frames) {
        if (f) {
          evar_sum += f->explained_variance;
          ++evar_count;
        }
      }
    }

    CompositeBatch cb;
    cb.weights = cfg.weights;
    cb.x.reserve(bn);
    cb.y.reserve(bn);
    cb.x_on.reserve(bn);
    cb.x_off.reserve(bn);
    for (std::size_t i = 0; i < bn; ++i) {
      const Index row = batch_rows[i];
      Vector x = sx.row(row).transpose();
      const int y = slabels[static_cast<std::size_t>(row)];
      const Vector grad = input_gradient(state.spec, state.params, x, y);

      Vector delta_on, delta_off;
      bool have_decomposition = false;
      if (cfg.estimator == ManifoldEstimator::kAutoencoder) {
        std::tie(delta_on, delta_off) = decompose_autoencoder(
            *state.autoencoder, x, grad, cfg.perturb.zero_norm_tol);
        have_decomposition = true;
      } else if (frames[i]) {
        std::tie(delta_on, delta_off) = decompose(*frames[i], grad);
        have_decomposition = true;
      }

      if (have_decomposition) {
        PerturbationPair pair =
            make_perturbed(x, delta_on, delta_off, cfg.perturb);
        cb.x_on.push_back(std::move(pair.x_on));
        cb.x_off.push_back(std::move(pair.x_off));
      } else {
        cb.x_on.push_back(x);
        cb.x_off.push_back(x);
      }
      cb.x.push_back(std::move(x));
      cb.y.push_back(y);
    }

    // Cycled target batch, wrapping independently of source epochs.
    const Index nt = bundle.target_train.size();
    const auto bt = static_cast<std::size_t>(
        std::min<Index>(cfg.batch_size_target, nt));
    cb.x_target.reserve(bt);
    for (std::size_t j = 0; j < bt; ++j) {
      if (state.target_cursor >= state.target_order.size()) {
        std::shuffle(state.target_order.begin(), state.target_order.end(),
                     state.rng);
        state.target_cursor = 0;
      }
      const Index row = state.target_order[state.target_cursor++];
      cb.x_target.push_back(bundle.target_train.x.row(row).transpose());
    }

    if (cfg.weights.lambda_geom > 0.0) {
      // Current-batch embeddings feed the alignment term; the bandwidth and
      // any geodesic values are held fixed for the step.
      Matrix semb(static_cast<Index>(bn), state.spec.embedding_dim());
      for (std::size_t i = 0; i < bn; ++i) {
        semb.row(static_cast<Index>(i)) =
            forward(state.spec, state.params, cb.x[i]).embedding;
      }
      Matrix temb(static_cast<Index>(cb.x_target.size()),
                  state.spec.embedding_dim());
      for (std::size_t j = 0; j < cb.x_target.size(); ++j) {
        temb.row(static_cast<Index>(j)) =
            forward(state.spec, state.params, cb.x_target[j]).embedding;
      }
      if (cfg.geom_distance == GeomDistance::kKernel) {
        Matrix joint(semb.rows() + temb.rows(), semb.cols());
        joint.topRows(semb.rows()) = semb;
        joint.bottomRows(temb.rows()) = temb;
        const Scalar sigma =
            std::max(median_pairwise_distance(joint), Scalar(1e-12));
        cb.geom = GeomCoupling::kernel(sigma);
      } else {
        const Index n_union = semb.rows() + temb.rows();
        const int k_eff =
            std::min<int>(cfg.knn_k, static_cast<int>(n_union) - 1);
        cb.geom = GeomCoupling::fixed(
            cross_geodesic(PointSet::from_matrix(semb),
                           PointSet::from_matrix(temb), k_eff));
      }
    }

    BatchGradients bg;
    try {
      bg = param_gradients(state.spec, state.params, cb);
    } catch (const NumericError& err) {
      throw TrainingError(std::string("train_epoch: ") + err.what() +
                          " (last finite parameters retained)");
    }
    state.clamp_events += bg.clamp_events;

    const NetParams before = state.params;
    ++state.step;
    if (cfg.optimizer.kind == OptimizerKind::kAdam) {
      adam_update(state.params, state.adam_m, state.adam_v, bg.grads,
                  cfg.optimizer, state.step);
    } else {
      sgd_update(state.params, bg.grads, cfg.optimizer);
    }
    if (!state.params.all_finite()) {
      state.params = before;
      throw TrainingError(
          "train_epoch: parameters diverged (last finite parameters retained)");
    }
    state.history.push_back({state.step, bg.loss});
  }

  state.last_epoch_mean_explained_variance =
      evar_count > 0 ? evar_sum / static_cast<Scalar>(evar_count) : 0.0;
}

std::pair<TrainState, FitReport> fit(const DatasetBundle& bundle,
                                     const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainState state = init_state(bundle, cfg);
  const bool fsda = bundle.is_fsda();

  FitReport report;
  report.mode = fsda ? "fsda" : "uda";

  const auto selection_accuracy = [&]() -> Scalar {
    if (fsda) {
      std::vector<int> labels;
      labels.reserve(static_cast<std::size_t>(bundle.target_test.size()));
      for (Index i = 0; i < bundle.target_test.size(); ++i) {
        labels.push_back(bundle.target_test_label(i));
      }
      return accuracy_percent(state.spec, state.params, bundle.target_test.x,
                              labels);
    }
    const auto& rows =
        state.val_indices.empty() ? state.train_indices : state.val_indices;
    const Matrix vx = rows_of(bundle.source_train.x, rows);
    const auto all_labels = bundle.source_train.required_labels();
    std::vector<int> vy;
    vy.reserve(rows.size());
    for (Index row : rows) vy.push_back(all_labels[static_cast<std::size_t>(row)]);
    return accuracy_percent(state.spec, state.params, vx, vy);
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::size_t first_row = state.history.size();
    train_epoch(state, bundle, cfg);

    LossBreakdown mean;
    const auto steps = static_cast<Scalar>(state.history.size() - first_row);
    for (std::size_t i = first_row; i < state.history.size(); ++i) {
      mean.cls += state.history[i].loss.cls / steps;
      mean.on += state.history[i].loss.on / steps;
      mean.off += state.history[i].loss.off / steps;
      mean.geom += state.history[i].loss.geom / steps;
      mean.total += state.history[i].loss.total / steps;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.mean_loss = mean;
    em.selection_accuracy = selection_accuracy();
    em.mean_explained_variance = state.last_epoch_mean_explained_variance;
    state.epoch_metrics.push_back(em);

    if (em.selection_accuracy > state.best_selection_accuracy) {
      state.best_selection_accuracy = em.selection_accuracy;
      state.best_params = state.params;
      state.best_epoch = epoch;
    }
  }

  report.epochs_run = cfg.epochs;
  report.best_epoch = state.best_epoch;
  report.best_selection_accuracy = std::max(state.best_selection_accuracy, 0.0);
  report.label_reads_after_training = bundle.label_reads();
  report.clamp_events = state.clamp_events;
  report.epoch_metrics = state.epoch_metrics;
  report.wall_seconds =
      std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(state), std::move(report)};
}

AutoencoderParams train_autoencoder(const Matrix& inputs, int hidden, int latent,
                                    int epochs, Scalar learning_rate,
                                    std::uint64_t seed) {
  if (inputs.rows() < 1) {
    throw ParameterError("train_autoencoder: empty input set");
  }
  AutoencoderParams ae =
      make_autoencoder(static_cast<int>(inputs.cols()), hidden, latent, seed);
  NetParams enc_m = zeros_like(ae.encoder_spec);
  NetParams enc_v = zeros_like(ae.encoder_spec);
  NetParams dec_m = zeros_like(ae.decoder_spec);
  NetParams dec_v = zeros_like(ae.decoder_spec);
  OptimizerConfig opt;
  opt.learning_rate = learning_rate;

  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  constexpr std::size_t kBatch = 32;
  long step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      const std::size_t stop = std::min(start + kBatch, order.size());
      NetParams enc_g = zeros_like(ae.encoder_spec);
      NetParams dec_g = zeros_like(ae.decoder_spec);
      const Scalar inv = 1.0 / static_cast<Scalar>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const Vector x = inputs.row(order[i]).transpose();
        const ForwardTrace te = forward_trace(ae.encoder_spec, ae.encoder, x);
        const ForwardTrace td =
            forward_trace(ae.decoder_spec, ae.decoder, te.logits());
        const Vector g_out = 2.0 * inv * (td.logits() - x);
        const Vector g_latent =
            backward(ae.decoder_spec, ae.decoder, td, g_out, nullptr, &dec_g);
        backward(ae.encoder_spec, ae.encoder, te, g_latent, nullptr, &enc_g);
      }
      ++step;
      adam_update(ae.encoder, enc_m, enc_v, enc_g, opt, step);
      adam_update(ae.decoder, dec_m, dec_v, dec_g, opt, step);
    }
  }
  if (!ae.encoder.all_finite() || !ae.decoder.all_finite()) {
    throw TrainingError("train_autoencoder: parameters diverged");
  }
  return ae;
}

}  // namespace gama
