#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "caco/geometry.hpp"
#include "caco/linalg.hpp"

namespace caco {

enum class EncoderRole { query, key };

// Affine map out = weight * in + bias; weight is out x in.
struct Layer {
  Matrix weight;
  Vector bias;

  bool operator==(const Layer&) const = default;
};

// Feedforward encoder: ReLU after every layer except the last, whose output
// is l2-normalized into the embedding.
struct EncoderParams {
  std::vector<Layer> layers;
  EncoderRole role = EncoderRole::query;
  // Bumped by every in-place update; traces remember the value they saw.
  std::uint64_t generation = 0;

  std::size_t input_dim() const { return layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.back().weight.rows(); }

  // Throws ConfigError if layer shapes do not chain or values are non-finite.
  void validate() const;
  bool same_architecture(const EncoderParams& other) const;
};

// layer_dims = {input, hidden..., output}. Weights and biases ~ U(-1/sqrt(in), 1/sqrt(in)).
EncoderParams make_encoder(std::span<const std::size_t> layer_dims, std::uint64_t seed);

struct ForwardTrace {
  std::vector<Vector> inputs;  // input fed to each layer (post-ReLU for hidden layers)
  Vector raw_output;           // last layer output before normalization
  std::uint64_t generation = 0;
};

struct ForwardResult {
  UnitEmbedding embedding;
  ForwardTrace trace;
};

ForwardResult forward(const EncoderParams& params, std::span<const double> x);

// Output before normalization, without keeping a trace.
Vector forward_raw(const EncoderParams& params, std::span<const double> x);

// Activation fed into the last layer (the projection), used for probing.
Vector hidden_features(const EncoderParams& params, std::span<const double> x);

// Same shapes as EncoderParams::layers.
using EncoderGrads = std::vector<Layer>;

EncoderGrads zero_grads(const EncoderParams& params);

// Adds d(scalar)/d(params) to grads given d(scalar)/d(raw_output).
void backward_accumulate(const EncoderParams& params, const ForwardTrace& trace,
                         std::span<const double> grad_wrt_raw_output, EncoderGrads& grads);

EncoderGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                      std::span<const double> grad_wrt_raw_output);

// key <- m * key + (1 - m) * query, elementwise.
void ema_update(EncoderParams& key, const EncoderParams& query, double m);

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)); base_lr when total_steps is 0.
double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps);

struct OptimState {
  std::vector<Layer> velocity;
  double base_lr = 0.0;
  double weight_decay = 0.0;
  double momentum = 0.0;
  std::size_t step = 0;
  std::size_t total_steps = 0;

  double effective_lr() const { return cosine_lr(base_lr, step, total_steps); }
};

OptimState make_optim_state(const EncoderParams& params, double base_lr, double weight_decay,
                            double momentum, std::size_t total_steps);

// velocity <- momentum * velocity + (grad + weight_decay * weight);
// param <- param - lr * velocity. Biases are not decayed. Advances state.step.
void sgd_step(EncoderParams& params, const EncoderGrads& grads, OptimState& state);

}  // namespace caco
