#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gama/losses.hpp"
#include "gama/types.hpp"

namespace gama {

enum class Activation { kRelu, kTanh };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Feed-forward classifier layout. `layer_widths` runs from the input width
/// to the class count; the activation output at `embedding_layer` (an index
/// into layer_widths, penultimate by default) is the embedding phi(x).
struct NetSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::kTanh;
  int embedding_layer = 0;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int num_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
  int embedding_dim() const { return layer_widths[embedding_layer]; }
  void validate() const;

  /// [input, hidden..., classes] with the embedding at the penultimate layer.
  static NetSpec mlp(int input_dim, std::vector<int> hidden, int classes,
                     Activation act = Activation::kTanh);
};

/// Dense weights and biases per layer; weights[l] is widths[l+1] x widths[l].
struct NetParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  void set_zero();
  bool all_finite() const;
  Scalar squared_norm() const;
  NetParams& add_scaled(const NetParams& other, Scalar scale);
};

NetParams zeros_like(const NetSpec& spec);

/// Seeded uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)); zero biases.
NetParams init_params(const NetSpec& spec, std::uint64_t seed);

/// Activations and pre-activations of one forward pass.
/// activations[0] = x, activations[L] = logits (last layer stays linear).
struct ForwardTrace {
  std::vector<Vector> activations;
  std::vector<Vector> preacts;

  const Vector& logits() const { return activations.back(); }
  const Vector& embedding(const NetSpec& spec) const {
    return activations[static_cast<std::size_t>(spec.embedding_layer)];
  }
};

struct ForwardResult {
  Vector logits;
  Vector embedding;
  Vector probs;
};

Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);

ForwardTrace forward_trace(const NetSpec& spec, const NetParams& params,
                           const Vector& x);
ForwardResult forward(const NetSpec& spec, const NetParams& params,
                      const Vector& x);

/// Reverse pass through a stored trace. `grad_logits` seeds the output layer;
/// `grad_embedding`, when non-null, is added at the embedding activation.
/// Parameter gradients accumulate into `grads` when non-null. Returns the
/// gradient with respect to the input.
Vector backward(const NetSpec& spec, const NetParams& params,
                const ForwardTrace& trace, const Vector& grad_logits,
                const Vector* grad_embedding, NetParams* grads);

/// Exact gradient of the cross-entropy loss at (x, y) with respect to x.
Vector input_gradient(const NetSpec& spec, const NetParams& params,
                      const Vector& x, int y);

Scalar cross_entropy_from_logits(const Vector& logits, int y);

/// How the geodesic alignment term couples to the batch embeddings.
///  kNone   - no alignment term.
///  kKernel - kernel distances |s_i - t_j|^2 / (2 sigma^2) with sigma held
///            constant; gradients flow through the softmin weighting into
///            both embedding sets.
///  kFixed  - precomputed graph-geodesic values, held constant during the
///            backward pass (value only, zero parameter gradient).
struct GeomCoupling {
  enum class Mode { kNone, kKernel, kFixed };
  Mode mode = Mode::kNone;
  Scalar sigma = 1.0;
  Matrix fixed_dists;

  static GeomCoupling none() { return {}; }
  static GeomCoupling kernel(Scalar sigma);
  static GeomCoupling fixed(Matrix dists);
};

/// One optimization batch: clean source samples with labels, their perturbed
/// variants (equal to x where a perturbation was skipped), and the target
/// inputs entering the alignment term.
struct CompositeBatch {
  std::vector<Vector> x;
  std::vector<int> y;
  std::vector<Vector> x_on;
  std::vector<Vector> x_off;
  std::vector<Vector> x_target;
  LossWeights weights;
  GeomCoupling geom;
};

struct BatchGradients {
  LossBreakdown loss;
  NetParams grads;
  long clamp_events = 0;
};

/// Per-term values of the batch objective without the backward pass.
LossBreakdown composite_loss(const NetSpec& spec, const NetParams& params,
                             const CompositeBatch& batch);

/// Gradient of the mean total loss over the batch with respect to every
/// parameter. Perturbed inputs are treated as constants.
BatchGradients param_gradients(const NetSpec& spec, const NetParams& params,
                               const CompositeBatch& batch);

/// Encoder-decoder pair; the decoder output width equals the encoder input
/// width so residuals x - D(E(x)) live in the input space.
struct AutoencoderParams {
  NetSpec encoder_spec;
  NetSpec decoder_spec;
  NetParams encoder;
  NetParams decoder;

  int input_dim() const { return encoder_spec.input_dim(); }
  int latent_dim() const { return encoder_spec.output_dim(); }
  void validate() const;
};

AutoencoderParams make_autoencoder(int input_dim, int hidden, int latent,
                                   std::uint64_t seed);

Vector autoencoder_reconstruct(const AutoencoderParams& ae, const Vector& x);
Vector autoencoder_residual(const AutoencoderParams& ae, const Vector& x);

/// Textual checkpoint: header (layer widths, activation, embedding layer,
/// seed) followed by row-major weight and bias arrays at full precision.
void save_checkpoint(const std::string& path, const NetSpec& spec,
                     const NetParams& params, std::uint64_t seed);

struct Checkpoint {
  NetSpec spec;
  NetParams params;
  std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace gama
