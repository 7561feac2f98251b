#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "caco/bank.hpp"
#include "caco/geometry.hpp"
#include "caco/linalg.hpp"

namespace caco {

// Probabilities are floored here before taking the log.
inline constexpr double kProbabilityFloor = 1e-300;

// Loss of one anchor against an explicit candidate list.
struct ContrastiveTerm {
  double loss = 0.0;  // -log p[positive]
  Vector probs;       // softmax over candidates
  Vector grad;        // d loss / d z for the unit anchor z
};

// InfoNCE of z against candidates with candidates[positive] as the positive.
// d loss / d z = (1/tau) (sum_c p_c v_c - v_positive).
ContrastiveTerm info_nce(const UnitEmbedding& z,
                         std::span<const std::span<const double>> candidates,
                         std::size_t positive, double tau);

// Maps d loss / d z (z = raw / |raw|) to d loss / d raw: (I - z z^T) g / |raw|.
Vector chain_through_normalization(std::span<const double> raw, const UnitEmbedding& z,
                                   std::span<const double> grad_unit);

// Shared-bank loss -log p(b_{j+} | z).
double caco_loss(const UnitEmbedding& z, const MemoryBank& bank, std::size_t j_plus,
                 double tau);

// Gradient of caco_loss(normalize(z_raw), ...) with respect to z_raw.
Vector loss_grad_wrt_anchor(std::span<const double> z_raw, const MemoryBank& bank,
                            std::size_t j_plus, double tau);

struct LossReport {
  double value = 0.0;       // summed over anchors (halved when symmetric)
  Matrix per_anchor_probs;  // anchors x K
  Matrix anchor_grads;      // anchors x D, gradient of value w.r.t. raw anchors
};

// Sum over the rows of raw_anchors of caco_loss.
LossReport batch_loss(const Matrix& raw_anchors, const MemoryBank& bank,
                      const AssignmentMap& assignments, double tau);

// (1/2)[sum_A l(z) + sum_B l(z)]; rows of the report are view A then view B.
LossReport symmetric_batch_loss(const Matrix& view_a, const Matrix& view_b,
                                const MemoryBank& bank, const AssignmentMap& assignments_a,
                                const AssignmentMap& assignments_b, double tau);

}  // namespace caco
