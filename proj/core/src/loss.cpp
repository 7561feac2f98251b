#include "caco/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "caco/errors.hpp"

namespace caco {

ContrastiveTerm info_nce(const UnitEmbedding& z,
                         std::span<const std::span<const double>> candidates,
                         std::size_t positive, double tau) {
  check_temperature(tau);
  if (positive >= candidates.size()) {
    throw ConsistencyError("positive index " + std::to_string(positive) +
                           " out of range for " + std::to_string(candidates.size()) +
                           " candidates");
  }
  Vector sims(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].size() != z.dim()) {
      throw ConsistencyError("candidate dimension does not match anchor");
    }
    sims[c] = dot(z.coords(), candidates[c]);
  }
  ContrastiveTerm out;
  out.probs = tempered_softmax(sims, tau);
  out.loss = -std::log(std::max(out.probs[positive], kProbabilityFloor));
  out.grad.assign(z.dim(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    axpy(out.probs[c], candidates[c], out.grad);
  }
  axpy(-1.0, candidates[positive], out.grad);
  for (double& g : out.grad) g /= tau;
  return out;
}

Vector chain_through_normalization(std::span<const double> raw, const UnitEmbedding& z,
                                   std::span<const double> grad_unit) {
  const double n = norm(raw);
  Vector g = tangent_project(z.coords(), grad_unit);
  for (double& x : g) x /= n;
  return g;
}

namespace {

std::vector<std::span<const double>> bank_rows(const MemoryBank& bank) {
  std::vector<std::span<const double>> rows;
  rows.reserve(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) rows.push_back(bank.row(j));
  return rows;
}

void check_index(std::size_t j_plus, const MemoryBank& bank) {
  if (j_plus >= bank.size()) {
    throw ConsistencyError("positive index " + std::to_string(j_plus) +
                           " out of range for a bank of " + std::to_string(bank.size()));
  }
}

}  // namespace

double caco_loss(const UnitEmbedding& z, const MemoryBank& bank, std::size_t j_plus,
                 double tau) {
  check_index(j_plus, bank);
  const Vector p = positive_probabilities(z, bank, tau);
  return -std::log(std::max(p[j_plus], kProbabilityFloor));
}

Vector loss_grad_wrt_anchor(std::span<const double> z_raw, const MemoryBank& bank,
                            std::size_t j_plus, double tau) {
  check_index(j_plus, bank);
  const UnitEmbedding z = normalize(z_raw);
  const auto rows = bank_rows(bank);
  const ContrastiveTerm term = info_nce(z, rows, j_plus, tau);
  return chain_through_normalization(z_raw, z, term.grad);
}

namespace {

// Fills the report rows for one view and returns its unweighted loss sum.
double accumulate_view(const Matrix& raw, const MemoryBank& bank,
                       const AssignmentMap& assignments, double tau, double weight,
                       std::size_t row_offset, LossReport& report) {
  const auto rows = bank_rows(bank);
  double total = 0.0;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const UnitEmbedding z = normalize(raw.row(i));
    const ContrastiveTerm term = info_nce(z, rows, assignments.positive(i), tau);
    total += term.loss;
    report.per_anchor_probs.set_row(row_offset + i, term.probs);
    Vector g = chain_through_normalization(raw.row(i), z, term.grad);
    for (double& x : g) x *= weight;
    report.anchor_grads.set_row(row_offset + i, g);
  }
  return total;
}

void check_batch(const Matrix& raw, const MemoryBank& bank, const AssignmentMap& assignments) {
  if (raw.rows() != assignments.size()) {
    throw ConsistencyError("batch has " + std::to_string(raw.rows()) +
                           " anchors but assignments cover " +
                           std::to_string(assignments.size()));
  }
  if (raw.rows() > 0 && raw.cols() != bank.dim()) {
    throw ConsistencyError("anchor dimension does not match bank dimension");
  }
  assignments.validate(bank.size());
}

}  // namespace

LossReport batch_loss(const Matrix& raw_anchors, const MemoryBank& bank,
                      const AssignmentMap& assignments, double tau) {
  check_temperature(tau);
  check_batch(raw_anchors, bank, assignments);
  LossReport report;
  report.per_anchor_probs = Matrix(raw_anchors.rows(), bank.size());
  report.anchor_grads = Matrix(raw_anchors.rows(), bank.dim());
  report.value = accumulate_view(raw_anchors, bank, assignments, tau, 1.0, 0, report);
  return report;
}

LossReport symmetric_batch_loss(const Matrix& view_a, const Matrix& view_b,
                                const MemoryBank& bank, const AssignmentMap& assignments_a,
                                const AssignmentMap& assignments_b, double tau) {
  check_temperature(tau);
  if (view_a.rows() != view_b.rows()) {
    throw ConsistencyError("symmetric loss needs equal batch sizes, got " +
                           std::to_string(view_a.rows()) + " and " +
                           std::to_string(view_b.rows()));
  }
  check_batch(view_a, bank, assignments_a);
  check_batch(view_b, bank, assignments_b);
  const std::size_t n = view_a.rows();
  LossReport report;
  report.per_anchor_probs = Matrix(2 * n, bank.size());
  report.anchor_grads = Matrix(2 * n, bank.dim());
  const double sum_a = accumulate_view(view_a, bank, assignments_a, tau, 0.5, 0, report);
  const double sum_b = accumulate_view(view_b, bank, assignments_b, tau, 0.5, n, report);
  report.value = 0.5 * (sum_a + sum_b);
  return report;
}

}  // namespace caco
