#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "caco/geometry.hpp"
#include "caco/linalg.hpp"

namespace caco {

// How the bank rows evolve during training.
//   caco              cooperative positives and adversarial negatives
//   cooperative_only  only rows chosen as positives move (towards anchors)
//   adversarial_only  every row is a negative and moves towards anchors
//   queue             rows are replaced first-in-first-out by key embeddings
//   fixed             rows never change
enum class BankMode { caco, cooperative_only, adversarial_only, queue, fixed };

std::string_view to_string(BankMode mode);

// K learnable unit vectors plus their SGD momentum buffers.
struct MemoryBank {
  Matrix entries;   // K x D, unit rows
  Matrix velocity;  // K x D
  BankMode mode = BankMode::caco;

  std::size_t size() const noexcept { return entries.rows(); }
  std::size_t dim() const noexcept { return entries.cols(); }
  std::span<const double> row(std::size_t j) const { return entries.row(j); }

  // Largest | |b_j| - 1 | over rows.
  double max_norm_deviation() const;
};

// Per-anchor positive row index j+ for one mini-batch. Row j is a positive
// for the anchors in positives_of(j) and a negative for every other anchor.
class AssignmentMap {
 public:
  AssignmentMap() = default;
  explicit AssignmentMap(std::vector<std::size_t> positive_index)
      : positive_index_(std::move(positive_index)) {}

  std::size_t size() const noexcept { return positive_index_.size(); }
  std::size_t positive(std::size_t anchor) const { return positive_index_.at(anchor); }
  std::span<const std::size_t> positives() const noexcept { return positive_index_; }

  std::vector<std::size_t> positives_of(std::size_t row) const;
  std::vector<std::size_t> negatives_of(std::size_t row) const;

  // Throws ConsistencyError if any index is >= bank_size.
  void validate(std::size_t bank_size) const;

  bool operator==(const AssignmentMap&) const = default;

 private:
  std::vector<std::size_t> positive_index_;
};

// Throws ConfigError unless tau > 0 and finite.
void check_temperature(double tau);

// softmax(similarities / tau) with max subtraction.
Vector tempered_softmax(std::span<const double> similarities, double tau);

// p(b_j | z) = exp(z.b_j / tau) / sum_k exp(z.b_k / tau).
Vector positive_probabilities(const UnitEmbedding& z, const MemoryBank& bank, double tau);

// Most Probable Positive: argmax_j p(b_j | key), lowest index on ties.
std::size_t assign_mpp(const UnitEmbedding& key, const MemoryBank& bank, double tau);
AssignmentMap assign_batch(std::span<const UnitEmbedding> keys, const MemoryBank& bank,
                           double tau);

// Ascent-direction contributions of one anchor z to row j:
//   cooperative:  (w / tau) (1 - p) T_j z
//   adversarial:  (w / tau) p T_j z
// where T_j = I - b_j b_j^T and p is the probability the anchor's softmax
// assigns to row j.
void add_cooperative_term(Matrix& direction, const MemoryBank& bank, std::size_t row,
                          const UnitEmbedding& anchor, double p, double tau,
                          double weight = 1.0);
void add_adversarial_term(Matrix& direction, const MemoryBank& bank, std::size_t row,
                          const UnitEmbedding& anchor, double p, double tau,
                          double weight = 1.0);

// Full cooperative-adversarial direction over a batch: for every row j,
//   sum_{z in P_j} (1/tau)[1 - p(b_j|z)] T_j z + sum_{z in N_j} (1/tau) p(b_j|z) T_j z.
// Anchors are summed in order.
Matrix accumulate_bank_gradient(std::span<const UnitEmbedding> anchors,
                                const AssignmentMap& assignments, const MemoryBank& bank,
                                double tau);

// velocity <- momentum * velocity + direction; entries <- entries + lr * velocity;
// rows renormalized. Nothing is modified if direction has non-finite values.
void apply_bank_update(MemoryBank& bank, const Matrix& direction, double lr, double momentum);

// Rows taken from encoder_outputs in order, the rest filled with normalized
// isotropic Gaussian draws from rng_seed. dim is required when
// encoder_outputs is empty.
MemoryBank init_bank(std::span<const UnitEmbedding> encoder_outputs, std::size_t bank_size,
                     std::size_t dim, std::uint64_t rng_seed,
                     BankMode mode = BankMode::caco);

// Evicts the oldest keys.size() rows and appends keys (queue mode only).
void enqueue_fifo(MemoryBank& bank, std::span<const UnitEmbedding> keys);

struct AlignedPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double cosine = 0.0;
};

struct BankSummary {
  std::size_t size = 0;
  std::size_t dim = 0;
  double min_norm = 0.0;
  double max_norm = 0.0;
  double mean_norm = 0.0;
  std::optional<double> max_cosine;  // absent when K < 2
  std::vector<AlignedPair> top_pairs;  // most aligned first, i < j
};

// Cosines use the rows as stored, divided by their norms; zero rows count as 0.
BankSummary summarize_bank(const Matrix& entries, std::size_t top = 5);

}  // namespace caco
