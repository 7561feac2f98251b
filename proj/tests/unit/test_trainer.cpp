#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "caco/data.hpp"
#include "caco/errors.hpp"
#include "caco/trainer.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace caco;
using namespace testing_helpers;

namespace {

Dataset toy_data() { return gen_synthetic(3, 8, 6, 0.2, 5); }

TrainConfig toy_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.batch_size = 6;
  c.epochs = 3;
  c.bank_size = 12;
  c.embed_dim = 4;
  c.hidden_dims = {8};
  c.encoder_lr = 0.5;
  c.bank_lr = 0.5;
  c.seed = 3;
  return c;
}

std::vector<std::size_t> first(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

oracle::Vec unit_out(const EncoderParams& p, std::span<const double> x) {
  const Vector raw = forward_raw(p, x);
  return oracle::unit(raw);
}

}  // namespace

TEST(TrainMode, ParseRoundTrip) {
  for (TrainMode m : {TrainMode::caco, TrainMode::positive_only, TrainMode::negative_only,
                      TrainMode::none, TrainMode::queue}) {
    EXPECT_EQ(parse_train_mode(to_string(m)), m);
  }
}

TEST(TrainMode, UnknownListsValidModes) {
  try {
    parse_train_mode("adco");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* m : {"caco", "positive_only", "negative_only", "none", "queue"}) {
      EXPECT_NE(msg.find(m), std::string::npos) << m;
    }
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c = toy_config(TrainMode::caco);
  EXPECT_NO_THROW(c.validate(24));
  c.batch_size = 25;
  EXPECT_THROW(c.validate(24), ConfigError);
  c = toy_config(TrainMode::caco);
  c.tau = 0.0;
  EXPECT_THROW(c.validate(24), ConfigError);
  c = toy_config(TrainMode::caco);
  c.ema_m = 1.0;
  EXPECT_THROW(c.validate(24), ConfigError);
  c = toy_config(TrainMode::queue);
  c.batch_size = 20;
  EXPECT_THROW(c.validate(24), ConfigError);
  c = toy_config(TrainMode::caco);
  c.encoder_lr = 0.0;
  c.bank_lr = 0.0;
  EXPECT_NO_THROW(c.validate(24));
}

TEST(TrainConfig, LinearLrScaling) {
  TrainConfig c;
  c.encoder_lr = 0.03;
  c.batch_size = 64;
  EXPECT_DOUBLE_EQ(c.scaled_encoder_lr(), 0.0075);
  EXPECT_EQ(c.steps_per_epoch(100), 2u);
}

TEST(BankModeFor, Mapping) {
  EXPECT_EQ(bank_mode_for(TrainMode::caco), BankMode::caco);
  EXPECT_EQ(bank_mode_for(TrainMode::positive_only), BankMode::cooperative_only);
  EXPECT_EQ(bank_mode_for(TrainMode::negative_only), BankMode::adversarial_only);
  EXPECT_EQ(bank_mode_for(TrainMode::queue), BankMode::queue);
  EXPECT_EQ(bank_mode_for(TrainMode::none), BankMode::fixed);
}

TEST(InitState, EncodersMatchAndBankIsUnit) {
  const Dataset ds = toy_data();
  const TrainState s = init_state(toy_config(TrainMode::caco), ds.samples);
  EXPECT_EQ(s.query.layers, s.key.layers);
  EXPECT_EQ(s.bank.size(), 12u);
  EXPECT_EQ(s.bank.dim(), 4u);
  EXPECT_LE(s.bank.max_norm_deviation(), 1e-12);
}

TEST(PrepareViews, PureFunctionOfIteration) {
  const Dataset ds = toy_data();
  const TrainConfig c = toy_config(TrainMode::caco);
  const auto idx = first(4);
  const BatchViews a = prepare_views(idx, ds.samples, c, 5);
  const BatchViews b = prepare_views(idx, ds.samples, c, 5);
  const BatchViews other = prepare_views(idx, ds.samples, c, 6);
  EXPECT_EQ(a.view_a, b.view_a);
  EXPECT_EQ(a.view_b, b.view_b);
  EXPECT_NE(a.view_a, a.view_b);
  EXPECT_NE(a.view_a, other.view_a);
}

TEST(TrainStep, ZeroRatesLeaveParametersUnchanged) {
  const Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::caco);
  c.encoder_lr = 0.0;
  c.bank_lr = 0.0;
  c.weight_decay = 0.0;
  TrainState s = init_state(c, ds.samples);
  const TrainState before = s;
  const StepMetrics m = train_step(first(6), ds.samples, s, c);
  EXPECT_TRUE(std::isfinite(m.loss));
  EXPECT_EQ(s.query.layers, before.query.layers);
  EXPECT_EQ(s.key.layers, before.key.layers);
  EXPECT_EQ(s.bank.entries, before.bank.entries);
  EXPECT_EQ(s.iteration, 1u);
}

TEST(TrainStep, ScriptedSingleAnchorCacoStep) {
  const Dataset ds = gen_synthetic(2, 2, 3, 0.3, 8);
  TrainConfig c;
  c.mode = TrainMode::caco;
  c.batch_size = 1;
  c.bank_size = 2;
  c.embed_dim = 2;
  c.hidden_dims = {4};
  c.epochs = 1;
  c.bank_lr = 0.7;
  c.bank_momentum = 0.9;
  c.tau = 0.5;
  c.seed = 12;
  TrainState s = init_state(c, ds.samples);
  const TrainState before = s;
  const std::vector<std::size_t> batch{2};
  const BatchViews views = prepare_views(batch, ds.samples, c, s.iteration);
  const oracle::Vec z = unit_out(before.query, views.view_a.row(0));
  const oracle::Vec k = unit_out(before.key, views.view_b.row(0));
  const oracle::Rows bank0 = rows_of(before.bank.entries);
  const std::size_t j_plus = oracle::most_probable(k, bank0);
  const oracle::Rows expect =
      oracle::scripted_bank_step(z, bank0, j_plus, c.tau, c.bank_lr, c.bank_momentum,
                                 rows_of(before.bank.velocity));

  train_step(batch, ds.samples, s, c);
  EXPECT_LE(frobenius_relative_error(rows_of(s.bank.entries), expect), 1e-12);
}

TEST(TrainStep, NoneModeMatchesInBatchInfoNce) {
  const Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::none);
  c.batch_size = ds.size();
  TrainState s = init_state(c, ds.samples);
  const TrainState before = s;
  const auto batch = first(ds.size());
  const BatchViews views = prepare_views(batch, ds.samples, c, 0);
  oracle::Rows zs, ks;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    zs.push_back(unit_out(before.query, views.view_a.row(t)));
    ks.push_back(unit_out(before.key, views.view_b.row(t)));
  }
  long double expect = 0;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    oracle::Rows cands{ks[t]};
    for (std::size_t m = 0; m < batch.size(); ++m) {
      if (m != t) cands.push_back(ks[m]);
    }
    expect += oracle::anchor_loss(zs[t], cands, 0, c.tau);
  }
  const StepMetrics m = train_step(batch, ds.samples, s, c);
  EXPECT_LE(oracle::relative_error(m.loss, expect), 1e-12);
  EXPECT_EQ(s.bank.entries, before.bank.entries);
  EXPECT_NE(s.query.layers, before.query.layers);
}

TEST(TrainStep, QueueModeEnqueuesKeys) {
  const Dataset ds = toy_data();
  const TrainConfig c = toy_config(TrainMode::queue);
  TrainState s = init_state(c, ds.samples);
  const TrainState before = s;
  const auto batch = first(6);
  const BatchViews views = prepare_views(batch, ds.samples, c, 0);
  train_step(batch, ds.samples, s, c);
  for (std::size_t t = 0; t < 6; ++t) {
    const oracle::Vec k = unit_out(before.key, views.view_b.row(t));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.bank.entries(6 + t, i), k[i]);
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.bank.entries(0, i), before.bank.entries(6, i));
}

TEST(TrainStep, PositiveOnlyMovesOnlyPositiveRows) {
  const Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::positive_only);
  c.bank_size = 24;
  TrainState s = init_state(c, ds.samples);
  const TrainState before = s;
  const auto batch = first(2);
  const BatchViews views = prepare_views(batch, ds.samples, c, 0);
  std::vector<bool> positive(24, false);
  for (std::size_t t = 0; t < 2; ++t) {
    positive[oracle::most_probable(unit_out(before.key, views.view_b.row(t)),
                                   rows_of(before.bank.entries))] = true;
  }
  train_step(batch, ds.samples, s, c);
  for (std::size_t j = 0; j < 24; ++j) {
    const bool moved = !std::equal(s.bank.row(j).begin(), s.bank.row(j).end(),
                                   before.bank.row(j).begin());
    EXPECT_EQ(moved, positive[j]) << "row " << j;
  }
}

TEST(TrainStep, NegativeOnlyMovesEveryRow) {
  const Dataset ds = toy_data();
  const TrainConfig c = toy_config(TrainMode::negative_only);
  TrainState s = init_state(c, ds.samples);
  const TrainState before = s;
  train_step(first(6), ds.samples, s, c);
  for (std::size_t j = 0; j < s.bank.size(); ++j) {
    EXPECT_FALSE(std::equal(s.bank.row(j).begin(), s.bank.row(j).end(),
                            before.bank.row(j).begin()));
  }
  EXPECT_LE(s.bank.max_norm_deviation(), 1e-12);
}

TEST(TrainStep, ChurnCountsChangedAssignments) {
  const Dataset ds = toy_data();
  const TrainConfig c = toy_config(TrainMode::caco);
  TrainState s = init_state(c, ds.samples);
  const auto batch = first(6);
  const StepMetrics first_step = train_step(batch, ds.samples, s, c);
  EXPECT_EQ(first_step.compared, 0u);
  const StepMetrics second = train_step(batch, ds.samples, s, c);
  EXPECT_EQ(second.compared, 6u);
  EXPECT_LE(second.churned, 6u);
}

TEST(Run, ZeroEpochs) {
  const Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::caco);
  c.epochs = 0;
  const RunResult r = run(c, ds.samples);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.state.iteration, 0u);
}

TEST(Run, StepsAndMetricRanges) {
  const Dataset ds = toy_data();
  for (TrainMode mode : {TrainMode::caco, TrainMode::positive_only, TrainMode::negative_only,
                         TrainMode::none, TrainMode::queue}) {
    TrainConfig c = toy_config(mode);
    c.symmetric = mode == TrainMode::caco;
    const RunResult r = run(c, ds.samples);
    ASSERT_EQ(r.history.size(), 3u);
    EXPECT_EQ(r.state.iteration, 3u * 4u);
    for (const EpochMetrics& m : r.history) {
      EXPECT_GT(m.mmpp, 0.0);
      EXPECT_LE(m.mmpp, 1.0);
      EXPECT_GE(m.churn, 0.0);
      EXPECT_LE(m.churn, 1.0);
      EXPECT_TRUE(std::isfinite(m.loss_mean));
      EXPECT_LE(m.bank_norm_dev, 1e-12);
    }
    EXPECT_EQ(r.history.front().epoch, 1u);
  }
}

TEST(Run, Deterministic) {
  const Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::caco);
  c.refresh_bank_embeddings = true;
  c.bank_lr_cosine = true;
  const RunResult a = run(c, ds.samples);
  const RunResult b = run(c, ds.samples);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].loss_mean, b.history[e].loss_mean);
    EXPECT_EQ(a.history[e].mmpp, b.history[e].mmpp);
    EXPECT_EQ(a.history[e].churn, b.history[e].churn);
  }
  EXPECT_EQ(a.state.bank.entries, b.state.bank.entries);
  c.seed = 4;
  EXPECT_NE(run(c, ds.samples).history.back().loss_mean, a.history.back().loss_mean);
}

TEST(Run, HooksSeeEveryEpoch) {
  const Dataset ds = toy_data();
  const TrainConfig c = toy_config(TrainMode::caco);
  RunHooks hooks;
  int probes = 0, starts = 0;
  std::vector<std::size_t> epochs;
  hooks.probe = [&](const EncoderParams&) { return static_cast<double>(++probes) / 10; };
  hooks.on_start = [&](const TrainState& s) {
    ++starts;
    EXPECT_EQ(s.iteration, 0u);
  };
  hooks.on_epoch = [&](const EpochMetrics& m, const TrainState&) { epochs.push_back(m.epoch); };
  const RunResult r = run(c, ds.samples, hooks);
  EXPECT_EQ(starts, 1);
  EXPECT_EQ(probes, 4);
  EXPECT_EQ(epochs, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(*r.initial_knn, 0.1);
  EXPECT_EQ(*r.history.back().knn_acc, 0.4);
}

TEST(Run, ConfigErrorsBeforeTraining) {
  const Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::caco);
  c.batch_size = 100;
  int starts = 0;
  RunHooks hooks;
  hooks.on_start = [&](const TrainState&) { ++starts; };
  EXPECT_THROW(run(c, ds.samples, hooks), ConfigError);
  EXPECT_EQ(starts, 0);
}

TEST(Run, NumericalFaultReportsIteration) {
  Dataset ds = toy_data();
  TrainConfig c = toy_config(TrainMode::caco);
  c.encoder_lr = 1e300;
  c.weight_decay = 0.0;
  try {
    run(c, ds.samples);
    FAIL() << "expected a numerical fault";
  } catch (const NumericalFault& e) {
    EXPECT_NE(std::string(e.what()).find("iteration "), std::string::npos) << e.what();
  }
}
