#include "caco/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "caco/errors.hpp"

namespace caco {

void Matrix::set_row(std::size_t r, std::span<const double> v) {
  if (v.size() != cols_) {
    throw ConsistencyError("row has " + std::to_string(v.size()) +
                           " values, matrix has " + std::to_string(cols_) +
                           " columns");
  }
  std::copy(v.begin(), v.end(), row(r).begin());
}

void Matrix::append_row(std::span<const double> v) {
  if (rows_ == 0 && cols_ == 0) cols_ = v.size();
  if (v.size() != cols_) {
    throw ConsistencyError("row has " + std::to_string(v.size()) +
                           " values, matrix has " + std::to_string(cols_) +
                           " columns");
  }
  data_.insert(data_.end(), v.begin(), v.end());
  ++rows_;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

UnitEmbedding UnitEmbedding::from_unit(std::span<const double> coords) {
  if (coords.size() < 2) {
    throw ConfigError("embedding dimension must be at least 2");
  }
  const double n = norm(coords);
  if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
    throw ConsistencyError("vector is not unit-norm (norm " + std::to_string(n) + ")");
  }
  return UnitEmbedding(Vector(coords.begin(), coords.end()));
}

UnitEmbedding normalize(std::span<const double> v) {
  if (v.size() < 2) {
    throw ConfigError("embedding dimension must be at least 2");
  }
  const double n = norm(v);
  if (!(n > kDegenerateNorm)) {
    throw DegenerateVectorError("cannot normalize vector with norm " + std::to_string(n));
  }
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return UnitEmbedding(std::move(out));
}

double cosine(std::span<const double> u, std::span<const double> v) {
  return std::clamp(dot(u, v), -1.0, 1.0);
}

double cosine(const UnitEmbedding& u, const UnitEmbedding& v) {
  return cosine(u.coords(), v.coords());
}

Vector tangent_project(std::span<const double> b, std::span<const double> z) {
  const double along = dot(b, z);
  Vector r(z.begin(), z.end());
  axpy(-along, b, r);
  return r;
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm(row);
    if (!(n > kDegenerateNorm)) {
      throw DegenerateVectorError("row " + std::to_string(r) + " collapsed to norm " +
                                  std::to_string(n));
    }
    for (double& x : row) x /= n;
  }
}

}  // namespace caco
