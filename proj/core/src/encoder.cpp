#include "caco/encoder.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "caco/errors.hpp"

namespace caco {

void EncoderParams::validate() const {
  if (layers.empty()) throw ConfigError("encoder has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ConfigError("layer " + std::to_string(l) + " bias does not match weight rows");
    }
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
      throw ConfigError("layer " + std::to_string(l) + " input does not chain");
    }
    if (!all_finite(layer.weight.values()) || !all_finite(layer.bias)) {
      throw ConfigError("layer " + std::to_string(l) + " has non-finite values");
    }
  }
}

bool EncoderParams::same_architecture(const EncoderParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != other.layers[l].weight.rows() ||
        layers[l].weight.cols() != other.layers[l].weight.cols()) {
      return false;
    }
  }
  return true;
}

EncoderParams make_encoder(std::span<const std::size_t> layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ConfigError("encoder needs at least input and output dims");
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ConfigError("encoder layer dimensions must be positive");
  }
  if (layer_dims.back() < 2) throw ConfigError("embedding dimension must be at least 2");
  std::mt19937_64 rng(seed);
  EncoderParams params;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t in = layer_dims[l];
    const std::size_t out = layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    Layer layer{Matrix(out, in), Vector(out, 0.0)};
    for (double& w : layer.weight.values()) w = uni(rng);
    for (double& b : layer.bias) b = uni(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void check_input(const EncoderParams& params, std::span<const double> x) {
  if (params.layers.empty()) throw ConfigError("encoder has no layers");
  if (x.size() != params.input_dim()) {
    throw ConfigError("encoder expects input of dimension " +
                      std::to_string(params.input_dim()) + ", got " +
                      std::to_string(x.size()));
  }
}

Vector affine(const Layer& layer, std::span<const double> in) {
  Vector out(layer.bias);
  for (std::size_t r = 0; r < out.size(); ++r) out[r] += dot(layer.weight.row(r), in);
  return out;
}

void relu(Vector& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

}  // namespace

ForwardResult forward(const EncoderParams& params, std::span<const double> x) {
  check_input(params, x);
  ForwardTrace trace;
  trace.generation = params.generation;
  trace.inputs.reserve(params.layers.size());
  trace.inputs.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Vector out = affine(params.layers[l], trace.inputs.back());
    if (l + 1 < params.layers.size()) {
      relu(out);
      trace.inputs.push_back(std::move(out));
    } else {
      trace.raw_output = std::move(out);
    }
  }
  UnitEmbedding embedding = normalize(trace.raw_output);
  return ForwardResult{std::move(embedding), std::move(trace)};
}

Vector forward_raw(const EncoderParams& params, std::span<const double> x) {
  check_input(params, x);
  Vector a(x.begin(), x.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    a = affine(params.layers[l], a);
    if (l + 1 < params.layers.size()) relu(a);
  }
  return a;
}

Vector hidden_features(const EncoderParams& params, std::span<const double> x) {
  check_input(params, x);
  Vector a(x.begin(), x.end());
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    a = affine(params.layers[l], a);
    relu(a);
  }
  return a;
}

EncoderGrads zero_grads(const EncoderParams& params) {
  EncoderGrads grads;
  grads.reserve(params.layers.size());
  for (const Layer& layer : params.layers) {
    grads.push_back(Layer{Matrix(layer.weight.rows(), layer.weight.cols()),
                          Vector(layer.bias.size(), 0.0)});
  }
  return grads;
}

void backward_accumulate(const EncoderParams& params, const ForwardTrace& trace,
                         std::span<const double> grad_wrt_raw_output, EncoderGrads& grads) {
  if (trace.generation != params.generation || trace.inputs.size() != params.layers.size() ||
      trace.raw_output.size() != params.output_dim()) {
    throw ConsistencyError("forward trace does not belong to these parameters");
  }
  if (grad_wrt_raw_output.size() != params.output_dim()) {
    throw ConsistencyError("output gradient has the wrong dimension");
  }
  if (grads.size() != params.layers.size()) {
    throw ConsistencyError("gradient buffer does not match the encoder");
  }
  Vector delta(grad_wrt_raw_output.begin(), grad_wrt_raw_output.end());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Layer& layer = params.layers[l];
    const Vector& in = trace.inputs[l];
    Layer& g = grads[l];
    for (std::size_t r = 0; r < delta.size(); ++r) {
      g.bias[r] += delta[r];
      if (delta[r] != 0.0) axpy(delta[r], in, g.weight.row(r));
    }
    if (l == 0) break;
    // Propagate through the weights and the ReLU that produced `in`.
    Vector prev(in.size(), 0.0);
    for (std::size_t r = 0; r < delta.size(); ++r) {
      if (delta[r] != 0.0) axpy(delta[r], layer.weight.row(r), prev);
    }
    for (std::size_t c = 0; c < prev.size(); ++c) {
      if (!(in[c] > 0.0)) prev[c] = 0.0;
    }
    delta = std::move(prev);
  }
}

EncoderGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                      std::span<const double> grad_wrt_raw_output) {
  EncoderGrads grads = zero_grads(params);
  backward_accumulate(params, trace, grad_wrt_raw_output, grads);
  return grads;
}

namespace {

// Equal inputs are a fixed point; m * x + (1 - m) * x can differ from x in the last bit.
double blend(double key, double query, double m) {
  return key == query ? key : m * key + (1.0 - m) * query;
}

}  // namespace

void ema_update(EncoderParams& key, const EncoderParams& query, double m) {
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("EMA momentum must be in [0, 1)");
  if (!key.same_architecture(query)) {
    throw ConsistencyError("key and query encoders have different architectures");
  }
  for (std::size_t l = 0; l < key.layers.size(); ++l) {
    auto kw = key.layers[l].weight.values();
    const auto qw = query.layers[l].weight.values();
    for (std::size_t i = 0; i < kw.size(); ++i) kw[i] = blend(kw[i], qw[i], m);
    auto& kb = key.layers[l].bias;
    const auto& qb = query.layers[l].bias;
    for (std::size_t i = 0; i < kb.size(); ++i) kb[i] = blend(kb[i], qb[i], m);
  }
  ++key.generation;
}

double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base_lr;
  const double t = static_cast<double>(std::min(step, total_steps)) /
                   static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

OptimState make_optim_state(const EncoderParams& params, double base_lr, double weight_decay,
                            double momentum, std::size_t total_steps) {
  if (!(base_lr >= 0.0) || !(weight_decay >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("optimizer needs lr >= 0, weight_decay >= 0, momentum in [0, 1)");
  }
  OptimState state;
  state.velocity = zero_grads(params);
  state.base_lr = base_lr;
  state.weight_decay = weight_decay;
  state.momentum = momentum;
  state.total_steps = total_steps;
  return state;
}

void sgd_step(EncoderParams& params, const EncoderGrads& grads, OptimState& state) {
  if (grads.size() != params.layers.size() || state.velocity.size() != params.layers.size()) {
    throw ConsistencyError("gradient/velocity buffers do not match the encoder");
  }
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (!all_finite(grads[l].weight.values()) || !all_finite(grads[l].bias)) {
      throw NumericalFault("non-finite encoder gradient in layer " + std::to_string(l));
    }
    if (grads[l].weight.rows() != params.layers[l].weight.rows() ||
        grads[l].weight.cols() != params.layers[l].weight.cols() ||
        grads[l].bias.size() != params.layers[l].bias.size()) {
      throw ConsistencyError("gradient shape mismatch in layer " + std::to_string(l));
    }
  }
  const double lr = state.effective_lr();
  const double mu = state.momentum;
  const double wd = state.weight_decay;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto w = params.layers[l].weight.values();
    auto vw = state.velocity[l].weight.values();
    const auto gw = grads[l].weight.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      vw[i] = mu * vw[i] + (gw[i] + wd * w[i]);
      w[i] -= lr * vw[i];
    }
    auto& b = params.layers[l].bias;
    auto& vb = state.velocity[l].bias;
    const auto& gb = grads[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = mu * vb[i] + gb[i];
      b[i] -= lr * vb[i];
    }
  }
  ++params.generation;
  ++state.step;
}

}  // namespace caco
