#pragma once

#include <span>
#include <utility>

#include "caco/linalg.hpp"

namespace caco {

// Norms at or below this are treated as having no direction.
inline constexpr double kDegenerateNorm = 1e-12;

// Tolerance used when adopting an existing vector as unit-norm.
inline constexpr double kUnitTolerance = 1e-6;

// A point on the unit hypersphere in R^D, D >= 2.
class UnitEmbedding {
 public:
  // Adopts coordinates that are already unit-norm within kUnitTolerance.
  static UnitEmbedding from_unit(std::span<const double> coords);

  std::span<const double> coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }

  bool operator==(const UnitEmbedding&) const = default;

 private:
  explicit UnitEmbedding(Vector coords) : coords_(std::move(coords)) {}
  friend UnitEmbedding normalize(std::span<const double> v);

  Vector coords_;
};

// v / |v|. Throws DegenerateVectorError when |v| <= 1e-12 and ConfigError
// when v has fewer than two coordinates.
UnitEmbedding normalize(std::span<const double> v);

// u . v clamped to [-1, 1].
double cosine(const UnitEmbedding& u, const UnitEmbedding& v);
double cosine(std::span<const double> u, std::span<const double> v);

// (I - b b^T) z: removes the component of z along the unit vector b.
Vector tangent_project(std::span<const double> b, std::span<const double> z);
inline Vector tangent_project(const UnitEmbedding& b, std::span<const double> z) {
  return tangent_project(b.coords(), z);
}

// Normalizes each row of m in place.
void normalize_rows(Matrix& m);

}  // namespace caco
