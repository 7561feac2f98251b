#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "caco/bank.hpp"
#include "caco/data.hpp"
#include "caco/encoder.hpp"
#include "caco/linalg.hpp"

namespace caco {

struct EvalReport {
  double knn_acc = 0.0;
  double probe_acc = 0.0;
  double mmpp = 0.0;    // mean maximum positive probability
  double spread = 0.0;  // trace of the embedding covariance

  bool operator==(const EvalReport&) const = default;
};

// Majority vote over the k most cosine-similar training rows (rows must be
// unit-norm). Vote ties go to the larger summed similarity, then the lower label.
double knn_accuracy(const Matrix& train_emb, std::span<const int> train_labels,
                    const Matrix& test_emb, std::span<const int> test_labels, std::size_t k);

// Softmax-regression probe on standardized features, zero-initialized and
// trained by full-batch gradient descent. Returns held-out accuracy.
double linear_probe(const Matrix& features, std::span<const int> labels,
                    const Matrix& held_out, std::span<const int> held_out_labels,
                    std::size_t epochs, double lr);

// mean over anchors of max_j p(b_j | z).
double mean_max_positive_prob(std::span<const UnitEmbedding> anchors, const MemoryBank& bank,
                              double tau);

// Trace of the (1/n) covariance of the rows.
double embedding_spread(const Matrix& embeddings);

struct Split {
  std::vector<std::size_t> reference;
  std::vector<std::size_t> held_out;
};

// Deterministic shuffle-and-cut; held_out gets round(n * fraction) indices, both sorted.
Split holdout_split(std::size_t n, double held_out_fraction, std::uint64_t seed);

struct EvalOptions {
  std::size_t knn_k = 20;
  double held_out_fraction = 0.2;
  std::uint64_t split_seed = 17;
  std::size_t probe_epochs = 200;
  double probe_lr = 0.5;
  double tau = 0.08;
};

// Unit embeddings of every sample, one per row.
Matrix embed_all(const EncoderParams& encoder, const Matrix& samples);
std::vector<UnitEmbedding> embed_units(const EncoderParams& encoder, const Matrix& samples);
// Last hidden activations of every sample.
Matrix features_all(const EncoderParams& encoder, const Matrix& samples);

Matrix select_rows(const Matrix& m, std::span<const std::size_t> idx);
std::vector<int> select_labels(std::span<const int> labels, std::span<const std::size_t> idx);

// kNN accuracy of the held-out split against the reference split.
std::function<double(const EncoderParams&)> make_knn_probe(const Dataset& dataset,
                                                           const EvalOptions& options);

// kNN and probe on the held-out split, MMPP and spread over every sample.
EvalReport evaluate(const EncoderParams& query, const MemoryBank& bank, const Dataset& dataset,
                    const EvalOptions& options);

}  // namespace caco
