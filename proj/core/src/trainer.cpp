#include "caco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "caco/errors.hpp"
#include "caco/loss.hpp"
#include "caco/rng.hpp"

namespace caco {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::caco: return "caco";
    case TrainMode::positive_only: return "positive_only";
    case TrainMode::negative_only: return "negative_only";
    case TrainMode::none: return "none";
    case TrainMode::queue: return "queue";
  }
  return "unknown";
}

std::string valid_train_modes() { return "caco, positive_only, negative_only, none, queue"; }

TrainMode parse_train_mode(std::string_view name) {
  for (TrainMode m : {TrainMode::caco, TrainMode::positive_only, TrainMode::negative_only,
                      TrainMode::none, TrainMode::queue}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + std::string(name) + "'; valid modes: " +
                    valid_train_modes());
}

BankMode bank_mode_for(TrainMode mode) {
  switch (mode) {
    case TrainMode::caco: return BankMode::caco;
    case TrainMode::positive_only: return BankMode::cooperative_only;
    case TrainMode::negative_only: return BankMode::adversarial_only;
    case TrainMode::queue: return BankMode::queue;
    case TrainMode::none: return BankMode::fixed;
  }
  return BankMode::fixed;
}

void TrainConfig::validate(std::size_t num_samples) const {
  check_temperature(tau);
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be a nonnegative finite number");
    }
  };
  auto unit_interval = [](double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1)");
  };
  rate(bank_lr, "bank_lr");
  rate(encoder_lr, "encoder_lr");
  rate(weight_decay, "weight_decay");
  unit_interval(bank_momentum, "bank_momentum");
  unit_interval(encoder_momentum, "encoder_momentum");
  unit_interval(ema_m, "ema_m");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (num_samples < 2) throw ConfigError("dataset needs at least 2 samples");
  if (batch_size > num_samples) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(num_samples));
  }
  if (bank_size < 2) throw ConfigError("bank_size must be at least 2");
  if (embed_dim < 2) throw ConfigError("embed_dim must be at least 2");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
  if (mode == TrainMode::queue && batch_size > bank_size) {
    throw ConfigError("queue mode needs batch_size <= bank_size");
  }
  augment.validate();
}

BatchViews prepare_views(std::span<const std::size_t> batch, const Matrix& samples,
                         const TrainConfig& config, std::size_t iteration) {
  BatchViews views{Matrix(batch.size(), samples.cols()), Matrix(batch.size(), samples.cols())};
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto x = samples.row(batch[t]);
    std::mt19937_64 rng_a(derive_seed(config.seed, {iteration, batch[t], 0}));
    std::mt19937_64 rng_b(derive_seed(config.seed, {iteration, batch[t], 1}));
    views.view_a.set_row(t, augment(x, config.augment, rng_a));
    views.view_b.set_row(t, augment(x, config.augment, rng_b));
  }
  return views;
}

TrainState init_state(const TrainConfig& config, const Matrix& samples) {
  std::vector<std::size_t> dims{samples.cols()};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.embed_dim);

  TrainState state;
  state.query = make_encoder(dims, derive_seed(config.seed, {1}));
  state.query.role = EncoderRole::query;
  state.key = state.query;
  state.key.role = EncoderRole::key;

  std::vector<std::size_t> pick(samples.rows());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(config.seed, {2}));
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(std::min(pick.size(), config.bank_size));
  std::vector<UnitEmbedding> outputs;
  outputs.reserve(pick.size());
  for (std::size_t i : pick) outputs.push_back(normalize(forward_raw(state.query, samples.row(i))));
  state.bank = init_bank(outputs, config.bank_size, config.embed_dim,
                         derive_seed(config.seed, {3}), bank_mode_for(config.mode));

  const std::size_t total = config.epochs * config.steps_per_epoch(samples.rows());
  state.optim = make_optim_state(state.query, config.scaled_encoder_lr(), config.weight_decay,
                                 config.encoder_momentum, total);
  state.last_assignment.assign(samples.rows(), -1);
  return state;
}

namespace {

using Rows = std::vector<std::span<const double>>;

struct AnchorObjective {
  ContrastiveTerm term;
  std::optional<std::size_t> positive_row;  // bank row used as the positive
};

// Builds the candidate list for anchor t and evaluates InfoNCE on it.
AnchorObjective anchor_objective(TrainMode mode, const UnitEmbedding& z, std::size_t t,
                                 std::span<const UnitEmbedding> keys, const MemoryBank& bank,
                                 const Rows& bank_rows, std::optional<std::size_t> positive_row,
                                 double tau) {
  AnchorObjective out;
  Rows candidates;
  switch (mode) {
    case TrainMode::caco:
      out.positive_row = positive_row ? positive_row : assign_mpp(keys[t], bank, tau);
      out.term = info_nce(z, bank_rows, *out.positive_row, tau);
      return out;
    case TrainMode::positive_only:
      out.positive_row = positive_row ? positive_row : assign_mpp(keys[t], bank, tau);
      candidates.reserve(keys.size());
      candidates.push_back(bank_rows[*out.positive_row]);
      for (std::size_t m = 0; m < keys.size(); ++m) {
        if (m != t) candidates.push_back(keys[m].coords());
      }
      break;
    case TrainMode::negative_only:
    case TrainMode::queue:
      candidates.reserve(bank_rows.size() + 1);
      candidates.push_back(keys[t].coords());
      candidates.insert(candidates.end(), bank_rows.begin(), bank_rows.end());
      break;
    case TrainMode::none:
      candidates.reserve(keys.size());
      candidates.push_back(keys[t].coords());
      for (std::size_t m = 0; m < keys.size(); ++m) {
        if (m != t) candidates.push_back(keys[m].coords());
      }
      break;
  }
  out.term = info_nce(z, candidates, 0, tau);
  return out;
}

// Adds one anchor's cooperative and/or adversarial terms to the bank direction.
void add_bank_terms(TrainMode mode, const UnitEmbedding& z, const AnchorObjective& obj,
                    const MemoryBank& bank, double tau, double weight, Matrix& direction) {
  const Vector& p = obj.term.probs;
  switch (mode) {
    case TrainMode::caco:
      for (std::size_t j = 0; j < bank.size(); ++j) {
        if (j == *obj.positive_row) {
          add_cooperative_term(direction, bank, j, z, p[j], tau, weight);
        } else {
          add_adversarial_term(direction, bank, j, z, p[j], tau, weight);
        }
      }
      break;
    case TrainMode::positive_only:
      add_cooperative_term(direction, bank, *obj.positive_row, z, p[0], tau, weight);
      break;
    case TrainMode::negative_only:
      for (std::size_t j = 0; j < bank.size(); ++j) {
        add_adversarial_term(direction, bank, j, z, p[j + 1], tau, weight);
      }
      break;
    case TrainMode::queue:
    case TrainMode::none:
      break;
  }
}

bool has_bank(TrainMode mode) { return mode != TrainMode::none; }

bool bank_learns(TrainMode mode) {
  return mode == TrainMode::caco || mode == TrainMode::positive_only ||
         mode == TrainMode::negative_only;
}

double max_of(const Vector& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

StepMetrics train_step(std::span<const std::size_t> batch, const Matrix& samples,
                       TrainState& state, const TrainConfig& config) {
  StepMetrics metrics;
  const std::size_t n = batch.size();
  if (n == 0) return metrics;
  const TrainMode mode = config.mode;
  const double tau = config.tau;
  const MemoryBank& bank = state.bank;

  const BatchViews views = prepare_views(batch, samples, config, state.iteration);

  // Keys from the momentum encoder: view b keys pair with view a queries.
  std::vector<UnitEmbedding> keys_b, keys_a;
  keys_b.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    keys_b.push_back(normalize(forward_raw(state.key, views.view_b.row(t))));
  }
  if (config.symmetric) {
    keys_a.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
      keys_a.push_back(normalize(forward_raw(state.key, views.view_a.row(t))));
    }
  }

  struct Pass {
    const Matrix* inputs;
    const std::vector<UnitEmbedding>* keys;
  };
  std::vector<Pass> passes{{&views.view_a, &keys_b}};
  if (config.symmetric) passes.push_back({&views.view_b, &keys_a});
  const double weight = config.symmetric ? 0.5 : 1.0;
  // Gradients and bank directions are batch means.
  const double grad_weight = weight / static_cast<double>(n);

  Rows bank_rows;
  bank_rows.reserve(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) bank_rows.push_back(bank.row(j));

  EncoderGrads grads = zero_grads(state.query);
  Matrix direction(bank.size(), bank.dim());
  std::vector<std::vector<std::optional<std::size_t>>> positives(passes.size());

  for (std::size_t pi = 0; pi < passes.size(); ++pi) {
    const Pass& pass = passes[pi];
    positives[pi].resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      const ForwardResult q = forward(state.query, pass.inputs->row(t));
      const AnchorObjective obj = anchor_objective(mode, q.embedding, t, *pass.keys, bank,
                                                   bank_rows, std::nullopt, tau);
      positives[pi][t] = obj.positive_row;
      metrics.loss += weight * obj.term.loss;

      Vector g = chain_through_normalization(q.trace.raw_output, q.embedding, obj.term.grad);
      for (double& x : g) x *= grad_weight;
      backward_accumulate(state.query, q.trace, g, grads);

      if (!config.refresh_bank_embeddings) {
        add_bank_terms(mode, q.embedding, obj, bank, tau, grad_weight, direction);
      }

      if (mode == TrainMode::caco || mode == TrainMode::none) {
        metrics.max_prob_sum += max_of(obj.term.probs);
      } else {
        metrics.max_prob_sum += max_of(positive_probabilities(q.embedding, bank, tau));
      }
      ++metrics.anchors;

      if (pi == 0 && has_bank(mode)) {
        const std::size_t mpp =
            obj.positive_row ? *obj.positive_row : assign_mpp((*pass.keys)[t], bank, tau);
        long& last = state.last_assignment.at(batch[t]);
        if (last >= 0) {
          ++metrics.compared;
          if (static_cast<std::size_t>(last) != mpp) ++metrics.churned;
        }
        last = static_cast<long>(mpp);
      }
    }
  }

  if (!config.refresh_bank_embeddings && !all_finite(direction.values())) {
    throw NumericalFault("non-finite value in bank update direction");
  }
  sgd_step(state.query, grads, state.optim);

  if (config.refresh_bank_embeddings && bank_learns(mode)) {
    for (std::size_t pi = 0; pi < passes.size(); ++pi) {
      const Pass& pass = passes[pi];
      for (std::size_t t = 0; t < n; ++t) {
        const UnitEmbedding z = normalize(forward_raw(state.query, pass.inputs->row(t)));
        const AnchorObjective obj = anchor_objective(mode, z, t, *pass.keys, bank, bank_rows,
                                                     positives[pi][t], tau);
        add_bank_terms(mode, z, obj, bank, tau, grad_weight, direction);
      }
    }
  }

  const std::size_t total = state.optim.total_steps;
  const double bank_lr = config.bank_lr_cosine
                             ? cosine_lr(config.bank_lr, state.iteration, total)
                             : config.bank_lr;
  if (bank_learns(mode)) {
    apply_bank_update(state.bank, direction, bank_lr, config.bank_momentum);
  } else if (mode == TrainMode::queue) {
    enqueue_fifo(state.bank, keys_b);
  }

  ema_update(state.key, state.query, config.ema_m);
  ++state.iteration;
  return metrics;
}

std::vector<std::size_t> epoch_order(std::size_t num_samples, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, {0xE90C, epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

RunResult run(const TrainConfig& config, const Matrix& samples, const RunHooks& hooks) {
  config.validate(samples.rows());
  RunResult result;
  result.state = init_state(config, samples);
  if (hooks.probe) result.initial_knn = hooks.probe(result.state.query);
  if (hooks.on_start) hooks.on_start(result.state);

  const std::size_t n = samples.rows();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(n, config.seed, epoch);
    double loss = 0.0, max_prob = 0.0;
    std::size_t seen = 0, anchors = 0, churned = 0, compared = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      StepMetrics m;
      try {
        m = train_step(batch, samples, result.state, config);
      } catch (const NumericalFault& e) {
        throw NumericalFault("iteration " + std::to_string(result.state.iteration) + ": " +
                             e.what());
      } catch (const DegenerateVectorError& e) {
        throw NumericalFault("iteration " + std::to_string(result.state.iteration) + ": " +
                             e.what());
      }
      loss += m.loss;
      max_prob += m.max_prob_sum;
      seen += len;
      anchors += m.anchors;
      churned += m.churned;
      compared += m.compared;
    }
    EpochMetrics em;
    em.epoch = epoch + 1;
    em.loss_mean = loss / static_cast<double>(seen);
    em.mmpp = max_prob / static_cast<double>(anchors);
    em.bank_norm_dev = result.state.bank.max_norm_deviation();
    em.churn = compared ? static_cast<double>(churned) / static_cast<double>(compared) : 0.0;
    if (hooks.probe) em.knn_acc = hooks.probe(result.state.query);
    result.history.push_back(em);
    if (hooks.on_epoch) hooks.on_epoch(em, result.state);
  }
  return result;
}

}  // namespace caco
