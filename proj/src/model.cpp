#include "gama/model.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "gama/errors.hpp"
#include "gama/geometry.hpp"

namespace gama {

namespace {

Scalar activate(Scalar z, Activation a) {
  return a == Activation::kTanh ? std::tanh(z) : std::max(z, 0.0);
}

Scalar activate_grad(Scalar z, Activation a) {
  if (a == Activation::kTanh) {
    const Scalar t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

void check_params_shape(const NetSpec& spec, const NetParams& params) {
  const auto layers = static_cast<std::size_t>(spec.num_layers());
  if (params.weights.size() != layers || params.biases.size() != layers) {
    throw ParameterError("params do not match spec layer count");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (params.weights[l].rows() != spec.layer_widths[l + 1] ||
        params.weights[l].cols() != spec.layer_widths[l] ||
        params.biases[l].size() != spec.layer_widths[l + 1]) {
      throw ParameterError("params layer " + std::to_string(l) +
                           " has wrong shape");
    }
  }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ParameterError("unknown activation: " + name);
}

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

void NetSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw ParameterError("NetSpec: need at least input and output widths");
  }
  for (int w : layer_widths) {
    if (w < 1) throw ParameterError("NetSpec: layer widths must be positive");
  }
  const int last = static_cast<int>(layer_widths.size()) - 1;
  const bool hidden = embedding_layer > 0 && embedding_layer < last;
  const bool penultimate = embedding_layer == last - 1;
  if (!hidden && !penultimate) {
    throw ParameterError("NetSpec: embedding_layer must name a hidden layer");
  }
}

NetSpec NetSpec::mlp(int input_dim, std::vector<int> hidden, int classes,
                     Activation act) {
  NetSpec spec;
  spec.layer_widths.push_back(input_dim);
  for (int h : hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(classes);
  spec.activation = act;
  spec.embedding_layer = static_cast<int>(spec.layer_widths.size()) - 2;
  spec.validate();
  return spec;
}

void NetParams::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

bool NetParams::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Scalar NetParams::squared_norm() const {
  Scalar s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

NetParams& NetParams::add_scaled(const NetParams& other, Scalar scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
  return *this;
}

NetParams zeros_like(const NetSpec& spec) {
  spec.validate();
  NetParams p;
  for (int l = 0; l < spec.num_layers(); ++l) {
    p.weights.emplace_back(
        Matrix::Zero(spec.layer_widths[l + 1], spec.layer_widths[l]));
    p.biases.emplace_back(Vector::Zero(spec.layer_widths[l + 1]));
  }
  return p;
}

NetParams init_params(const NetSpec& spec, std::uint64_t seed) {
  NetParams p = zeros_like(spec);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const Scalar fan_in = spec.layer_widths[l];
    const Scalar fan_out = spec.layer_widths[l + 1];
    const Scalar s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<Scalar> dist(-s, s);
    auto& w = p.weights[static_cast<std::size_t>(l)];
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) {
        w(r, c) = dist(rng);
      }
    }
  }
  return p;
}

Vector softmax(const Vector& logits) {
  const Scalar hi = logits.maxCoeff();
  Vector e = (logits.array() - hi).exp();
  return e / e.sum();
}

Vector log_softmax(const Vector& logits) {
  const Scalar hi = logits.maxCoeff();
  const Scalar lse = std::log((logits.array() - hi).exp().sum());
  return logits.array() - hi - lse;
}

ForwardTrace forward_trace(const NetSpec& spec, const NetParams& params,
                           const Vector& x) {
  spec.validate();
  check_params_shape(spec, params);
  if (x.size() != spec.input_dim()) {
    throw ParameterError("forward: input has dimension " +
                         std::to_string(x.size()) + ", expected " +
                         std::to_string(spec.input_dim()));
  }
  const int layers = spec.num_layers();
  ForwardTrace trace;
  trace.activations.resize(static_cast<std::size_t>(layers) + 1);
  trace.preacts.resize(static_cast<std::size_t>(layers));
  trace.activations[0] = x;
  for (int l = 0; l < layers; ++l) {
    Vector z = params.weights[static_cast<std::size_t>(l)] *
                   trace.activations[static_cast<std::size_t>(l)] +
               params.biases[static_cast<std::size_t>(l)];
    trace.preacts[static_cast<std::size_t>(l)] = z;
    if (l == layers - 1) {
      trace.activations[static_cast<std::size_t>(l) + 1] = std::move(z);
    } else {
      trace.activations[static_cast<std::size_t>(l) + 1] =
          z.unaryExpr([&](Scalar v) { return activate(v, spec.activation); });
    }
  }
  return trace;
}

ForwardResult forward(const NetSpec& spec, const NetParams& params,
                      const Vector& x) {
  ForwardTrace trace = forward_trace(spec, params, x);
  ForwardResult out;
  out.logits = trace.logits();
  out.embedding = trace.embedding(spec);
  out.probs = softmax(out.logits);
  return out;
}

Vector backward(const NetSpec& spec, const NetParams& params,
                const ForwardTrace& trace, const Vector& grad_logits,
                const Vector* grad_embedding, NetParams* grads) {
  const int layers = spec.num_layers();
  if (grad_logits.size() != spec.output_dim()) {
    throw ParameterError("backward: grad_logits has wrong dimension");
  }
  Vector grad_act = grad_logits;
  for (int l = layers - 1; l >= 0; --l) {
    Vector grad_z;
    if (l == layers - 1) {
      grad_z = std::move(grad_act);
    } else {
      grad_z = grad_act.cwiseProduct(
          trace.preacts[static_cast<std::size_t>(l)].unaryExpr(
              [&](Scalar z) { return activate_grad(z, spec.activation); }));
    }
    if (grads) {
      grads->weights[static_cast<std::size_t>(l)].noalias() +=
          grad_z * trace.activations[static_cast<std::size_t>(l)].transpose();
      grads->biases[static_cast<std::size_t>(l)] += grad_z;
    }
    grad_act.noalias() =
        params.weights[static_cast<std::size_t>(l)].transpose() * grad_z;
    if (grad_embedding && l == spec.embedding_layer) {
      grad_act += *grad_embedding;
    }
  }
  return grad_act;
}

Vector input_gradient(const NetSpec& spec, const NetParams& params,
                      const Vector& x, int y) {
  if (y < 0 || y >= spec.output_dim()) {
    throw ParameterError("input_gradient: label out of range");
  }
  const ForwardTrace trace = forward_trace(spec, params, x);
  Vector grad_logits = softmax(trace.logits());
  grad_logits(y) -= 1.0;
  return backward(spec, params, trace, grad_logits, nullptr, nullptr);
}

Scalar cross_entropy_from_logits(const Vector& logits, int y) {
  if (y < 0 || static_cast<Index>(y) >= logits.size()) {
    throw ParameterError("cross_entropy_from_logits: label out of range");
  }
  return -log_softmax(logits)(y);
}

GeomCoupling GeomCoupling::kernel(Scalar sigma) {
  if (!(sigma > 0.0)) {
    throw ParameterError("GeomCoupling::kernel: sigma must be positive");
  }
  GeomCoupling g;
  g.mode = Mode::kKernel;
  g.sigma = sigma;
  return g;
}

GeomCoupling GeomCoupling::fixed(Matrix dists) {
  GeomCoupling g;
  g.mode = Mode::kFixed;
  g.fixed_dists = std::move(dists);
  return g;
}

namespace {

struct BatchEval {
  LossBreakdown loss;
  long clamp_events = 0;
  // per-sample logit gradients of the mean total loss
  std::vector<Vector> grad_logits_x;
  std::vector<Vector> grad_logits_on;
  std::vector<Vector> grad_logits_off;
  // embedding gradients from the geom term
  std::vector<Vector> grad_emb_source;
  std::vector<Vector> grad_emb_target;
  // stored traces for the backward pass
  std::vector<ForwardTrace> trace_x;
  std::vector<ForwardTrace> trace_on;
  std::vector<ForwardTrace> trace_off;
  std::vector<ForwardTrace> trace_target;
  bool use_on = false;
  bool use_off = false;
  bool use_geom_kernel = false;
};

/// Shared value-and-seed computation behind composite_loss and
/// param_gradients. The perturbed inputs and any fixed geodesic values are
/// constants; the kernel bandwidth is likewise held fixed.
BatchEval evaluate_batch(const NetSpec& spec, const NetParams& params,
                         const CompositeBatch& batch, bool want_gradients) {
  batch.weights.validate();
  const std::size_t n = batch.x.size();
  if (n == 0) {
    throw ParameterError("param_gradients: empty batch");
  }
  if (batch.y.size() != n) {
    throw ParameterError("param_gradients: labels do not match batch");
  }
  const bool has_on = !batch.x_on.empty();
  const bool has_off = !batch.x_off.empty();
  if ((has_on && batch.x_on.size() != n) || (has_off && batch.x_off.size() != n)) {
    throw ParameterError("param_gradients: perturbed inputs do not match batch");
  }

  BatchEval ev;
  ev.use_on = has_on && batch.weights.lambda_on > 0.0;
  ev.use_off = has_off && batch.weights.lambda_off > 0.0;
  const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
  const LossWeights& w = batch.weights;

  ev.trace_x.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ev.trace_x.push_back(forward_trace(spec, params, batch.x[i]));
  }
  if (ev.use_on) {
    ev.trace_on.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ev.trace_on.push_back(forward_trace(spec, params, batch.x_on[i]));
    }
  }
  if (ev.use_off) {
    ev.trace_off.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ev.trace_off.push_back(forward_trace(spec, params, batch.x_off[i]));
    }
  }

  if (want_gradients) {
    ev.grad_logits_x.assign(n, Vector::Zero(spec.output_dim()));
    if (ev.use_on) ev.grad_logits_on.assign(n, Vector::Zero(spec.output_dim()));
    if (ev.use_off) ev.grad_logits_off.assign(n, Vector::Zero(spec.output_dim()));
  }

  Scalar cls = 0.0;
  Scalar on = 0.0;
  Scalar off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& logits = ev.trace_x[i].logits();
    const int y = batch.y[i];
    cls += cross_entropy_from_logits(logits, y) * inv_n;
    const Vector probs = softmax(logits);
    if (want_gradients) {
      Vector g = probs * inv_n;
      g(y) -= inv_n;
      ev.grad_logits_x[i] += g;
    }

    if (ev.use_on) {
      const Vector u = ev.trace_on[i].logits() - logits;
      on += u.squaredNorm() * inv_n;
      if (want_gradients) {
        const Vector g = (2.0 * w.lambda_on * inv_n) * u;
        ev.grad_logits_on[i] += g;
        ev.grad_logits_x[i] -= g;
      }
    }

    if (ev.use_off) {
      const Vector& logits_off = ev.trace_off[i].logits();
      const Vector q = softmax(logits_off);
      const Scalar kl = kl_divergence(probs, q, &ev.clamp_events);
      const Vector v = logits - logits_off;
      off += (kl + v.squaredNorm()) * inv_n;
      if (want_gradients) {
        const Scalar scale = w.lambda_off * inv_n;
        // d KL / d logits_x = p .* ((log p - log q) - KL)
        const Vector r =
            probs.array().max(1e-12).log() - q.array().max(1e-12).log();
        ev.grad_logits_x[i] += scale * (probs.array() * (r.array() - kl)).matrix();
        ev.grad_logits_off[i] += scale * (q - probs);
        // quadratic part
        ev.grad_logits_x[i] += scale * 2.0 * v;
        ev.grad_logits_off[i] -= scale * 2.0 * v;
      }
    }
  }

  Scalar geom = 0.0;
  const std::size_t nt = batch.x_target.size();
  const bool geom_active = w.lambda_geom > 0.0 &&
                           batch.geom.mode != GeomCoupling::Mode::kNone;
  if (geom_active) {
    if (batch.geom.mode == GeomCoupling::Mode::kFixed) {
      geom = loss_geom(batch.geom.fixed_dists, w);
    } else {
      if (nt == 0) {
        throw ParameterError("param_gradients: kernel geom needs target inputs");
      }
      ev.use_geom_kernel = true;
      ev.trace_target.reserve(nt);
      for (std::size_t j = 0; j < nt; ++j) {
        ev.trace_target.push_back(forward_trace(spec, params, batch.x_target[j]));
      }
      const Index ed = spec.embedding_dim();
      Matrix semb(n, ed);
      Matrix temb(nt, ed);
      for (std::size_t i = 0; i < n; ++i) {
        semb.row(static_cast<Index>(i)) = ev.trace_x[i].embedding(spec);
      }
      for (std::size_t j = 0; j < nt; ++j) {
        temb.row(static_cast<Index>(j)) = ev.trace_target[j].embedding(spec);
      }
      const Matrix dists = kernel_distance_matrix(semb, temb, batch.geom.sigma);
      geom = loss_geom(dists, w);
      if (want_gradients) {
        // dL/dD = row softmin weights / |S| + column softmin weights / |T|
        Matrix dLdD(dists.rows(), dists.cols());
        for (Index i = 0; i < dists.rows(); ++i) {
          dLdD.row(i) = softmin_weights(dists.row(i).transpose(), w.tau)
                            .transpose() /
                        static_cast<Scalar>(dists.rows());
        }
        for (Index j = 0; j < dists.cols(); ++j) {
          dLdD.col(j) += softmin_weights(dists.col(j), w.tau) /
                         static_cast<Scalar>(dists.cols());
        }
        const Scalar scale =
            w.lambda_geom / (batch.geom.sigma * batch.geom.sigma);
        // dD_ij/ds_i = (s_i - t_j)/sigma^2, so the source gradient rows are
        // diag(row sums of dLdD) * S - dLdD * T, and symmetrically for T.
        const Vector row_sums = dLdD.rowwise().sum();
        const Vector col_sums = dLdD.colwise().sum();
        const Matrix gs =
            scale * (row_sums.asDiagonal() * semb - dLdD * temb);
        const Matrix gt =
            scale * (col_sums.asDiagonal() * temb - dLdD.transpose() * semb);
        ev.grad_emb_source.resize(n);
        ev.grad_emb_target.resize(nt);
        for (std::size_t i = 0; i < n; ++i) {
          ev.grad_emb_source[i] = gs.row(static_cast<Index>(i)).transpose();
        }
        for (std::size_t j = 0; j < nt; ++j) {
          ev.grad_emb_target[j] = gt.row(static_cast<Index>(j)).transpose();
        }
      }
    }
  }

  ev.loss = loss_total(cls, on, off, geom, w);
  if (!ev.loss.finite()) {
    throw NumericError("param_gradients: non-finite loss");
  }
  return ev;
}

}  // namespace

LossBreakdown composite_loss(const NetSpec& spec, const NetParams& params,
                             const CompositeBatch& batch) {
  return evaluate_batch(spec, params, batch, false).loss;
}

BatchGradients param_gradients(const NetSpec& spec, const NetParams& params,
                               const CompositeBatch& batch) {
  BatchEval ev = evaluate_batch(spec, params, batch, true);

  BatchGradients out;
  out.loss = ev.loss;
  out.clamp_events = ev.clamp_events;
  out.grads = zeros_like(spec);

  const std::size_t n = batch.x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector* gemb =
        ev.use_geom_kernel ? &ev.grad_emb_source[i] : nullptr;
    backward(spec, params, ev.trace_x[i], ev.grad_logits_x[i], gemb,
             &out.grads);
    if (ev.use_on) {
      backward(spec, params, ev.trace_on[i], ev.grad_logits_on[i], nullptr,
               &out.grads);
    }
    if (ev.use_off) {
      backward(spec, params, ev.trace_off[i], ev.grad_logits_off[i], nullptr,
               &out.grads);
    }
  }
  if (ev.use_geom_kernel) {
    const Vector zero = Vector::Zero(spec.output_dim());
    for (std::size_t j = 0; j < batch.x_target.size(); ++j) {
      backward(spec, params, ev.trace_target[j], zero, &ev.grad_emb_target[j],
               &out.grads);
    }
  }
  if (!out.grads.all_finite()) {
    throw NumericError("param_gradients: non-finite gradient");
  }
  return out;
}

void AutoencoderParams::validate() const {
  encoder_spec.validate();
  decoder_spec.validate();
  if (decoder_spec.output_dim() != encoder_spec.input_dim()) {
    throw ParameterError(
        "AutoencoderParams: decoder output must match encoder input");
  }
  if (decoder_spec.input_dim() != encoder_spec.output_dim()) {
    throw ParameterError(
        "AutoencoderParams: decoder input must match encoder latent");
  }
}

AutoencoderParams make_autoencoder(int input_dim, int hidden, int latent,
                                   std::uint64_t seed) {
  AutoencoderParams ae;
  ae.encoder_spec = NetSpec::mlp(input_dim, {hidden}, latent);
  ae.decoder_spec = NetSpec::mlp(latent, {hidden}, input_dim);
  ae.encoder = init_params(ae.encoder_spec, seed);
  ae.decoder = init_params(ae.decoder_spec, seed + 0x9e3779b97f4a7c15ULL);
  ae.validate();
  return ae;
}

Vector autoencoder_reconstruct(const AutoencoderParams& ae, const Vector& x) {
  const Vector z = forward_trace(ae.encoder_spec, ae.encoder, x).logits();
  return forward_trace(ae.decoder_spec, ae.decoder, z).logits();
}

Vector autoencoder_residual(const AutoencoderParams& ae, const Vector& x) {
  if (x.size() != ae.encoder_spec.input_dim()) {
    throw ParameterError("autoencoder_residual: dimension mismatch");
  }
  return x - autoencoder_reconstruct(ae, x);
}

namespace {

std::string fmt_value(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetSpec& spec,
                     const NetParams& params, std::uint64_t seed) {
  spec.validate();
  check_params_shape(spec, params);
  std::ofstream out(path);
  if (!out) {
    throw DataError("save_checkpoint: cannot open " + path);
  }
  out << "gama-checkpoint v1\n";
  out << "layer_widths";
  for (int w : spec.layer_widths) out << ' ' << w;
  out << '\n';
  out << "activation " << to_string(spec.activation) << '\n';
  out << "embedding_layer " << spec.embedding_layer << '\n';
  out << "seed " << seed << '\n';
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto& w = params.weights[static_cast<std::size_t>(l)];
    out << "weights " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) {
        out << (c ? " " : "") << fmt_value(w(r, c));
      }
      out << '\n';
    }
    const auto& b = params.biases[static_cast<std::size_t>(l)];
    out << "bias " << l << ' ' << b.size() << '\n';
    for (Index i = 0; i < b.size(); ++i) {
      out << (i ? " " : "") << fmt_value(b(i));
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) {
    throw DataError("save_checkpoint: write failed for " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("load_checkpoint: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != "gama-checkpoint v1") {
    throw DataError("load_checkpoint: bad magic in " + path);
  }
  Checkpoint ck;
  std::string token;
  in >> token;
  if (token != "layer_widths") throw DataError("load_checkpoint: expected layer_widths");
  {
    std::getline(in, line);
    std::istringstream widths(line);
    int w;
    while (widths >> w) ck.spec.layer_widths.push_back(w);
  }
  in >> token;
  if (token != "activation") throw DataError("load_checkpoint: expected activation");
  in >> token;
  ck.spec.activation = activation_from_string(token);
  in >> token;
  if (token != "embedding_layer") {
    throw DataError("load_checkpoint: expected embedding_layer");
  }
  in >> ck.spec.embedding_layer;
  in >> token;
  if (token != "seed") throw DataError("load_checkpoint: expected seed");
  in >> ck.seed;
  ck.spec.validate();
  ck.params = zeros_like(ck.spec);
  for (int l = 0; l < ck.spec.num_layers(); ++l) {
    int idx = 0;
    Index rows = 0, cols = 0;
    in >> token >> idx >> rows >> cols;
    if (token != "weights" || idx != l ||
        rows != ck.spec.layer_widths[l + 1] ||
        cols != ck.spec.layer_widths[l]) {
      throw DataError("load_checkpoint: bad weights header at layer " +
                      std::to_string(l));
    }
    auto& w = ck.params.weights[static_cast<std::size_t>(l)];
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        if (!(in >> w(r, c))) {
          throw DataError("load_checkpoint: truncated weights");
        }
      }
    }
    Index bsize = 0;
    in >> token >> idx >> bsize;
    if (token != "bias" || idx != l || bsize != rows) {
      throw DataError("load_checkpoint: bad bias header at layer " +
                      std::to_string(l));
    }
    auto& b = ck.params.biases[static_cast<std::size_t>(l)];
    for (Index i = 0; i < bsize; ++i) {
      if (!(in >> b(i))) {
        throw DataError("load_checkpoint: truncated bias");
      }
    }
  }
  in >> token;
  if (token != "end") {
    throw DataError("load_checkpoint: missing end marker");
  }
  return ck;
}

}  // namespace gama
