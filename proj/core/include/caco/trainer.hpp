#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caco/bank.hpp"
#include "caco/data.hpp"
#include "caco/encoder.hpp"
#include "caco/linalg.hpp"

namespace caco {

// Where positives and negatives come from, mirroring the ablation table:
//   caco           positive = MPP bank row, negatives = other bank rows; bank
//                  updated cooperatively and adversarially
//   positive_only  positive = MPP bank row, negatives = batch keys; only
//                  cooperative bank updates
//   negative_only  positive = the other view's key, negatives = bank rows;
//                  only adversarial bank updates
//   none           positive = the other view's key, negatives = batch keys
//   queue          like negative_only, but the bank is a FIFO of past keys
enum class TrainMode { caco, positive_only, negative_only, none, queue };

std::string_view to_string(TrainMode mode);
// Throws ConfigError naming the valid modes.
TrainMode parse_train_mode(std::string_view name);
std::string valid_train_modes();

struct TrainConfig {
  TrainMode mode = TrainMode::caco;
  double tau = 0.08;
  double bank_lr = 3.0;
  double bank_momentum = 0.9;
  bool bank_lr_cosine = false;
  // Per-256-sample rate; the applied rate is encoder_lr * batch_size / 256.
  double encoder_lr = 0.03;
  double encoder_momentum = 0.9;
  double weight_decay = 1e-4;
  double ema_m = 0.99;
  std::size_t batch_size = 256;
  std::size_t epochs = 200;
  std::size_t bank_size = 256;
  std::size_t embed_dim = 16;
  std::vector<std::size_t> hidden_dims = {64, 64};
  bool symmetric = false;
  // Encoder step first, then the bank step against refreshed query embeddings.
  bool refresh_bank_embeddings = false;
  AugmentPolicy augment;
  std::uint64_t seed = 0;

  // Throws ConfigError on any out-of-range value, given the dataset size.
  void validate(std::size_t num_samples) const;
  double scaled_encoder_lr() const {
    return encoder_lr * static_cast<double>(batch_size) / 256.0;
  }
  std::size_t steps_per_epoch(std::size_t num_samples) const {
    return (num_samples + batch_size - 1) / batch_size;
  }
};

BankMode bank_mode_for(TrainMode mode);

struct TrainState {
  EncoderParams query;
  EncoderParams key;
  MemoryBank bank;
  OptimState optim;
  std::size_t iteration = 0;
  // Last MPP row per sample, -1 before the first assignment.
  std::vector<long> last_assignment;
};

struct StepMetrics {
  double loss = 0.0;          // summed over the batch
  double max_prob_sum = 0.0;  // sum over anchors of max_j p(b_j | z)
  std::size_t anchors = 0;
  std::size_t churned = 0;    // samples whose MPP differs from their previous one
  std::size_t compared = 0;   // samples that had a previous assignment
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss_mean = 0.0;
  double mmpp = 0.0;
  double bank_norm_dev = 0.0;
  double churn = 0.0;
  std::optional<double> knn_acc;
};

// Two augmented views of each batch sample, rows in batch order.
struct BatchViews {
  Matrix view_a;
  Matrix view_b;
};

// Views are a pure function of (seed, iteration, sample index).
BatchViews prepare_views(std::span<const std::size_t> batch, const Matrix& samples,
                         const TrainConfig& config, std::size_t iteration);

// Query and key encoders equal, bank initialized from encoder outputs of
// randomly drawn samples.
TrainState init_state(const TrainConfig& config, const Matrix& samples);

// One alternating step. The encoder gradient uses the pre-step bank and the
// bank gradient uses pre-step query embeddings (unless refresh_bank_embeddings).
StepMetrics train_step(std::span<const std::size_t> batch, const Matrix& samples,
                       TrainState& state, const TrainConfig& config);

// Sample order for an epoch (0-based).
std::vector<std::size_t> epoch_order(std::size_t num_samples, std::uint64_t seed,
                                     std::size_t epoch);

using ProbeFn = std::function<double(const EncoderParams&)>;

struct RunHooks {
  ProbeFn probe;  // e.g. kNN accuracy; receives the query encoder
  std::function<void(const TrainState&)> on_start;  // after init, before the first step
  std::function<void(const EpochMetrics&, const TrainState&)> on_epoch;
};

struct RunResult {
  TrainState state;
  std::vector<EpochMetrics> history;
  std::optional<double> initial_knn;  // probe on the untrained encoder
};

RunResult run(const TrainConfig& config, const Matrix& samples, const RunHooks& hooks = {});

}  // namespace caco
