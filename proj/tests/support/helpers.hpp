#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "caco/bank.hpp"
#include "caco/geometry.hpp"
#include "caco/linalg.hpp"
#include "oracles.hpp"

namespace testing_helpers {

inline caco::MemoryBank bank_from_rows(const oracle::Rows& rows,
                                       caco::BankMode mode = caco::BankMode::caco) {
  caco::MemoryBank bank;
  bank.entries = caco::Matrix(rows.size(), rows.front().size());
  for (std::size_t j = 0; j < rows.size(); ++j) bank.entries.set_row(j, rows[j]);
  bank.velocity = caco::Matrix(rows.size(), rows.front().size());
  bank.mode = mode;
  return bank;
}

inline oracle::Rows rows_of(const caco::Matrix& m) {
  oracle::Rows out;
  for (std::size_t r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

inline caco::Matrix matrix_of(const oracle::Rows& rows) {
  caco::Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) m.set_row(r, rows[r]);
  return m;
}

inline oracle::Rows random_units(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  oracle::Rows out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_unit(dim, rng));
  return out;
}

inline caco::UnitEmbedding unit(const oracle::Vec& v) { return caco::normalize(v); }

inline std::vector<caco::UnitEmbedding> units(const oracle::Rows& rows) {
  std::vector<caco::UnitEmbedding> out;
  for (const auto& r : rows) out.push_back(caco::normalize(r));
  return out;
}

// ||a - b|| / max(||a||, ||b||, floor) over all rows together.
inline double frobenius_relative_error(const oracle::Rows& a, const oracle::Rows& b,
                                       double floor = 1e-12) {
  long double diff = 0, na = 0, nb = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) {
      const long double d = static_cast<long double>(a[r][c]) - b[r][c];
      diff += d * d;
      na += static_cast<long double>(a[r][c]) * a[r][c];
      nb += static_cast<long double>(b[r][c]) * b[r][c];
    }
  }
  const long double scale = std::max({std::sqrt(na), std::sqrt(nb), static_cast<long double>(floor)});
  return static_cast<double>(std::sqrt(diff) / scale);
}

}  // namespace testing_helpers
