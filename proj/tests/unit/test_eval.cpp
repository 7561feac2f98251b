#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "caco/errors.hpp"
#include "caco/eval.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace caco;
using namespace testing_helpers;

TEST(Knn, DuplicatedPointWithKOne) {
  std::mt19937_64 rng(1);
  const oracle::Rows train = random_units(30, 4, rng);
  std::vector<int> labels(30);
  for (int i = 0; i < 30; ++i) labels[i] = i % 3;
  const oracle::Rows test{train[7], train[12]};
  const double acc = knn_accuracy(matrix_of(train), labels, matrix_of(test),
                                  std::vector<int>{labels[7], labels[12]}, 1);
  EXPECT_EQ(acc, 1.0);
}

TEST(Knn, AntipodalClasses) {
  const Matrix train = matrix_of({{1.0, 0.0}, {-1.0, 0.0}});
  const std::vector<int> labels{0, 1};
  EXPECT_EQ(knn_accuracy(train, labels, train, labels, 1), 1.0);
}

TEST(Knn, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const oracle::Rows train = random_units(60, 3, rng);
    const oracle::Rows test = random_units(25, 3, rng);
    std::vector<int> tl(60), el(25);
    std::uniform_int_distribution<int> lab(0, 2);
    for (int& l : tl) l = lab(rng);
    for (int& l : el) l = lab(rng);
    for (std::size_t k : {1u, 4u, 7u, 20u}) {
      EXPECT_EQ(knn_accuracy(matrix_of(train), tl, matrix_of(test), el, k),
                oracle::knn(train, tl, test, el, k));
    }
  }
}

TEST(Knn, Errors) {
  const Matrix train = matrix_of({{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(knn_accuracy(train, labels, train, labels, 3), ConfigError);
  EXPECT_THROW(knn_accuracy(train, labels, train, labels, 0), ConfigError);
  EXPECT_THROW(knn_accuracy(train, std::vector<int>{0}, train, labels, 1), ConsistencyError);
}

TEST(Probe, SeparableTwoClass) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.3);
  Matrix x(200, 5), xh(100, 5);
  std::vector<int> y(200), yh(100);
  auto fill = [&](Matrix& m, std::vector<int>& ls) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      ls[i] = static_cast<int>(i % 2);
      for (std::size_t d = 0; d < 5; ++d) m(i, d) = g(rng);
      m(i, 0) += ls[i] ? 2.0 : -2.0;
    }
  };
  fill(x, y);
  fill(xh, yh);
  EXPECT_GE(linear_probe(x, y, xh, yh, 200, 0.5), 0.95);
}

TEST(Probe, ShuffledLabelsAtChance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Matrix x(400, 6), xh(400, 6);
  for (double& v : x.values()) v = g(rng);
  for (double& v : xh.values()) v = g(rng);
  std::vector<int> y(400), yh(400);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int& l : y) l = lab(rng);
  for (int& l : yh) l = lab(rng);
  EXPECT_NEAR(linear_probe(x, y, xh, yh, 200, 0.5), 0.25, 0.1);
}

TEST(Probe, OneHotFeatures) {
  Matrix x(30, 3);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    y[i] = static_cast<int>(i % 3);
    x(i, i % 3) = 1.0;
  }
  EXPECT_EQ(linear_probe(x, y, x, y, 200, 0.5), 1.0);
}

TEST(Probe, SingleClassRejected) {
  Matrix x(4, 2, 1.0);
  const std::vector<int> y(4, 0);
  EXPECT_THROW(linear_probe(x, y, x, y, 10, 0.5), ConfigError);
}

TEST(Mmpp, OrthonormalClosedForm) {
  for (std::size_t k : {2u, 4u, 8u}) {
    oracle::Rows rows(k, oracle::Vec(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) rows[j][j] = 1.0;
    const double got = mean_max_positive_prob(units(rows), bank_from_rows(rows), 0.08);
    const long double e = std::exp(12.5L);
    EXPECT_NEAR(got, static_cast<double>(e / (e + (k - 1))), 1e-15);
  }
}

TEST(Mmpp, SingleRowIsOne) {
  std::mt19937_64 rng(5);
  const MemoryBank bank = bank_from_rows({oracle::random_unit(3, rng)});
  EXPECT_EQ(mean_max_positive_prob(units(random_units(5, 3, rng)), bank, 0.08), 1.0);
}

TEST(Mmpp, MatchesBruteForce) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const oracle::Rows rows = random_units(128, 8, rng);
    const oracle::Rows anchors = random_units(100, 8, rng);
    const double got = mean_max_positive_prob(units(anchors), bank_from_rows(rows), 0.08);
    EXPECT_LE(oracle::relative_error(got, oracle::mean_max_prob(anchors, rows, 0.08)), 1e-12);
  }
}

TEST(Mmpp, LargeRandomBankNearInverseSize) {
  std::mt19937_64 rng(1007);
  const std::size_t k = 65536;
  const MemoryBank bank = init_bank({}, k, 256, 7);
  const double m = mean_max_positive_prob(units(random_units(4, 256, rng)), bank, 0.08);
  EXPECT_GT(m, 1.0 / k);
  EXPECT_LT(m, 50.0 / k);
}

TEST(Spread, IdenticalIsZero) {
  const Matrix m = matrix_of({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}});
  EXPECT_EQ(embedding_spread(m), 0.0);
}

TEST(Spread, OrthonormalBasis) {
  for (std::size_t d : {2u, 3u, 16u}) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    // direct covariance: mean = 1/d each coordinate, variance (1/d)(1 - 1/d)
    long double trace = 0;
    for (std::size_t c = 0; c < d; ++c) {
      long double mean = 0, var = 0;
      for (std::size_t r = 0; r < d; ++r) mean += m(r, c);
      mean /= d;
      for (std::size_t r = 0; r < d; ++r) var += (m(r, c) - mean) * (m(r, c) - mean);
      trace += var / d;
    }
    EXPECT_NEAR(embedding_spread(m), static_cast<double>(trace), 1e-15);
    EXPECT_NEAR(embedding_spread(m), (d - 1.0) / d, 1e-15);
  }
}

TEST(Spread, RotationInvariant) {
  std::mt19937_64 rng(8);
  const oracle::Rows pts = random_units(40, 2, rng);
  const double a = 0.7;
  oracle::Rows rotated;
  for (const auto& p : pts) {
    rotated.push_back({std::cos(a) * p[0] - std::sin(a) * p[1], std::sin(a) * p[0] + std::cos(a) * p[1]});
  }
  EXPECT_NEAR(embedding_spread(matrix_of(pts)), embedding_spread(matrix_of(rotated)), 1e-13);
}

TEST(Split, DeterministicAndDisjoint) {
  const Split a = holdout_split(100, 0.2, 17);
  const Split b = holdout_split(100, 0.2, 17);
  EXPECT_EQ(a.held_out, b.held_out);
  EXPECT_EQ(a.held_out.size(), 20u);
  EXPECT_EQ(a.reference.size(), 80u);
  std::vector<std::size_t> all = a.reference;
  all.insert(all.end(), a.held_out.begin(), a.held_out.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(100);
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  EXPECT_EQ(all, expect);
  EXPECT_THROW(holdout_split(10, 1.0, 1), ConfigError);
}

TEST(Evaluate, ReportIsDeterministic) {
  const Dataset ds = gen_synthetic(3, 30, 6, 0.2, 4);
  const std::vector<std::size_t> dims{6, 8, 4};
  const EncoderParams enc = make_encoder(dims, 3);
  const MemoryBank bank = init_bank({}, 16, 4, 5);
  EvalOptions opt;
  opt.knn_k = 5;
  const EvalReport a = evaluate(enc, bank, ds, opt);
  const EvalReport b = evaluate(enc, bank, ds, opt);
  EXPECT_EQ(a, b);
  EXPECT_GE(a.knn_acc, 0.0);
  EXPECT_LE(a.knn_acc, 1.0);
  EXPECT_GT(a.mmpp, 0.0);
  EXPECT_LE(a.mmpp, 1.0);
  EXPECT_EQ(make_knn_probe(ds, opt)(enc), a.knn_acc);
}
