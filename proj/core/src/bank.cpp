#include "caco/bank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "caco/errors.hpp"

namespace caco {

std::string_view to_string(BankMode mode) {
  switch (mode) {
    case BankMode::caco: return "caco";
    case BankMode::cooperative_only: return "cooperative_only";
    case BankMode::adversarial_only: return "adversarial_only";
    case BankMode::queue: return "queue";
    case BankMode::fixed: return "fixed";
  }
  return "unknown";
}

double MemoryBank::max_norm_deviation() const {
  double worst = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    worst = std::max(worst, std::abs(norm(entries.row(j)) - 1.0));
  }
  return worst;
}

std::vector<std::size_t> AssignmentMap::positives_of(std::size_t row) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < positive_index_.size(); ++i) {
    if (positive_index_[i] == row) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> AssignmentMap::negatives_of(std::size_t row) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < positive_index_.size(); ++i) {
    if (positive_index_[i] != row) out.push_back(i);
  }
  return out;
}

void AssignmentMap::validate(std::size_t bank_size) const {
  for (std::size_t i = 0; i < positive_index_.size(); ++i) {
    if (positive_index_[i] >= bank_size) {
      throw ConsistencyError("anchor " + std::to_string(i) + " assigned to row " +
                             std::to_string(positive_index_[i]) + " of a bank with " +
                             std::to_string(bank_size) + " rows");
    }
  }
}

void check_temperature(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("temperature must be positive, got " + std::to_string(tau));
  }
}

Vector tempered_softmax(std::span<const double> similarities, double tau) {
  check_temperature(tau);
  Vector p(similarities.size());
  if (p.empty()) return p;
  const double top = *std::max_element(similarities.begin(), similarities.end());
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp((similarities[j] - top) / tau);
    total += p[j];
  }
  for (double& x : p) x /= total;
  return p;
}

namespace {

void check_dim(const UnitEmbedding& z, const MemoryBank& bank) {
  if (z.dim() != bank.dim()) {
    throw ConsistencyError("embedding dimension " + std::to_string(z.dim()) +
                           " does not match bank dimension " + std::to_string(bank.dim()));
  }
}

Vector similarities(const UnitEmbedding& z, const MemoryBank& bank) {
  check_dim(z, bank);
  Vector s(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) s[j] = dot(z.coords(), bank.row(j));
  return s;
}

}  // namespace

Vector positive_probabilities(const UnitEmbedding& z, const MemoryBank& bank, double tau) {
  check_temperature(tau);
  return tempered_softmax(similarities(z, bank), tau);
}

std::size_t assign_mpp(const UnitEmbedding& key, const MemoryBank& bank, double tau) {
  check_temperature(tau);
  if (bank.size() == 0) throw ConsistencyError("cannot assign against an empty bank");
  // softmax is strictly increasing in the logit, so the argmax of the
  // similarities is the argmax of the probabilities.
  const Vector s = similarities(key, bank);
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

AssignmentMap assign_batch(std::span<const UnitEmbedding> keys, const MemoryBank& bank,
                           double tau) {
  std::vector<std::size_t> idx;
  idx.reserve(keys.size());
  for (const auto& k : keys) idx.push_back(assign_mpp(k, bank, tau));
  return AssignmentMap(std::move(idx));
}

namespace {

void add_tangent_term(Matrix& direction, const MemoryBank& bank, std::size_t row,
                      const UnitEmbedding& anchor, double coeff) {
  const auto b = bank.row(row);
  const auto z = anchor.coords();
  const double along = dot(b, z);
  auto out = direction.row(row);
  for (std::size_t d = 0; d < out.size(); ++d) out[d] += coeff * (z[d] - along * b[d]);
}

}  // namespace

void add_cooperative_term(Matrix& direction, const MemoryBank& bank, std::size_t row,
                          const UnitEmbedding& anchor, double p, double tau, double weight) {
  add_tangent_term(direction, bank, row, anchor, weight * (1.0 - p) / tau);
}

void add_adversarial_term(Matrix& direction, const MemoryBank& bank, std::size_t row,
                          const UnitEmbedding& anchor, double p, double tau, double weight) {
  add_tangent_term(direction, bank, row, anchor, weight * p / tau);
}

Matrix accumulate_bank_gradient(std::span<const UnitEmbedding> anchors,
                                const AssignmentMap& assignments, const MemoryBank& bank,
                                double tau) {
  check_temperature(tau);
  if (assignments.size() != anchors.size()) {
    throw ConsistencyError("assignment map covers " + std::to_string(assignments.size()) +
                           " anchors, batch has " + std::to_string(anchors.size()));
  }
  assignments.validate(bank.size());
  Matrix direction(bank.size(), bank.dim());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vector p = positive_probabilities(anchors[i], bank, tau);
    const std::size_t pos = assignments.positive(i);
    for (std::size_t j = 0; j < bank.size(); ++j) {
      if (j == pos) {
        add_cooperative_term(direction, bank, j, anchors[i], p[j], tau);
      } else {
        add_adversarial_term(direction, bank, j, anchors[i], p[j], tau);
      }
    }
  }
  return direction;
}

void apply_bank_update(MemoryBank& bank, const Matrix& direction, double lr, double momentum) {
  if (direction.rows() != bank.size() || direction.cols() != bank.dim()) {
    throw ConsistencyError("bank update direction shape does not match the bank");
  }
  if (!(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("bank update needs lr >= 0 and momentum in [0, 1)");
  }
  if (!all_finite(direction.values())) {
    throw NumericalFault("non-finite value in bank update direction");
  }
  Matrix velocity = bank.velocity;
  Matrix entries = bank.entries;
  auto v = velocity.values();
  auto e = entries.values();
  const auto g = direction.values();
  const std::size_t d = bank.dim();
  std::vector<bool> moved(bank.size(), false);
  for (std::size_t c = 0; c < v.size(); ++c) {
    v[c] = momentum * v[c] + g[c];
    const double step = lr * v[c];
    if (step != 0.0) {
      e[c] += step;
      moved[c / d] = true;
    }
  }
  if (!all_finite(e)) throw NumericalFault("bank update produced non-finite entries");
  // rows that did not move keep their exact bits
  for (std::size_t j = 0; j < bank.size(); ++j) {
    if (!moved[j]) continue;
    auto row = entries.row(j);
    const double n = norm(row);
    if (!(n > kDegenerateNorm)) {
      throw DegenerateVectorError("row " + std::to_string(j) + " collapsed to norm " +
                                  std::to_string(n));
    }
    for (double& x : row) x /= n;
  }
  bank.velocity = std::move(velocity);
  bank.entries = std::move(entries);
}

MemoryBank init_bank(std::span<const UnitEmbedding> encoder_outputs, std::size_t bank_size,
                     std::size_t dim, std::uint64_t rng_seed, BankMode mode) {
  if (bank_size < 2) throw ConfigError("bank size must be at least 2");
  if (!encoder_outputs.empty()) dim = encoder_outputs.front().dim();
  if (dim < 2) throw ConfigError("bank dimension must be at least 2");

  MemoryBank bank;
  bank.mode = mode;
  bank.entries = Matrix(bank_size, dim);
  bank.velocity = Matrix(bank_size, dim);

  const std::size_t taken = std::min(bank_size, encoder_outputs.size());
  for (std::size_t j = 0; j < taken; ++j) {
    if (encoder_outputs[j].dim() != dim) {
      throw ConsistencyError("encoder outputs have mixed dimensions");
    }
    bank.entries.set_row(j, encoder_outputs[j].coords());
  }

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector draw(dim);
  for (std::size_t j = taken; j < bank_size; ++j) {
    double n = 0.0;
    do {
      for (double& x : draw) x = gauss(rng);
      n = norm(draw);
    } while (!(n > kDegenerateNorm));
    bank.entries.set_row(j, normalize(draw).coords());
  }
  return bank;
}

void enqueue_fifo(MemoryBank& bank, std::span<const UnitEmbedding> keys) {
  if (bank.mode != BankMode::queue) {
    throw ModeError("enqueue_fifo requires a queue-mode bank, bank is in " +
                    std::string(to_string(bank.mode)) + " mode");
  }
  const std::size_t n = keys.size();
  const std::size_t k = bank.size();
  if (n > k) {
    throw ConsistencyError("cannot enqueue " + std::to_string(n) + " keys into a bank of " +
                           std::to_string(k));
  }
  for (const auto& key : keys) {
    if (key.dim() != bank.dim()) throw ConsistencyError("key dimension does not match bank");
  }
  if (n == 0) return;
  auto e = bank.entries.values();
  const std::size_t d = bank.dim();
  std::copy(e.begin() + static_cast<std::ptrdiff_t>(n * d), e.end(), e.begin());
  for (std::size_t i = 0; i < n; ++i) bank.entries.set_row(k - n + i, keys[i].coords());
}

BankSummary summarize_bank(const Matrix& entries, std::size_t top) {
  BankSummary s;
  s.size = entries.rows();
  s.dim = entries.cols();
  if (s.size == 0) return s;
  std::vector<double> norms(s.size);
  s.min_norm = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t j = 0; j < s.size; ++j) {
    norms[j] = norm(entries.row(j));
    s.min_norm = std::min(s.min_norm, norms[j]);
    s.max_norm = std::max(s.max_norm, norms[j]);
    total += norms[j];
  }
  s.mean_norm = total / static_cast<double>(s.size);

  std::vector<AlignedPair> pairs;
  pairs.reserve(s.size * (s.size - 1) / 2);
  for (std::size_t i = 0; i < s.size; ++i) {
    for (std::size_t j = i + 1; j < s.size; ++j) {
      const double denom = norms[i] * norms[j];
      const double c = denom > 0.0 ? dot(entries.row(i), entries.row(j)) / denom : 0.0;
      pairs.push_back({i, j, std::clamp(c, -1.0, 1.0)});
    }
  }
  if (pairs.empty()) return s;
  const std::size_t keep = std::min(top, pairs.size());
  auto more_aligned = [](const AlignedPair& a, const AlignedPair& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  };
  std::partial_sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep), pairs.end(),
                    more_aligned);
  s.max_cosine = std::max_element(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
                   return a.cosine < b.cosine;
                 })->cosine;
  s.top_pairs.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep));
  return s;
}

}  // namespace caco
