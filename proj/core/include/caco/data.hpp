#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "caco/linalg.hpp"

namespace caco {

struct DatasetMeta {
  std::string source;  // "synthetic" or the file it was loaded from
  std::size_t per_class = 0;
  double cluster_spread = 0.0;
  std::uint64_t seed = 0;
};

// Labeled vectors. Labels are for evaluation only; training reads samples.
struct Dataset {
  Matrix samples;  // N x input_dim
  std::vector<int> labels;
  std::size_t num_classes = 0;
  DatasetMeta meta;

  std::size_t size() const noexcept { return samples.rows(); }
  std::size_t input_dim() const noexcept { return samples.cols(); }
};

// Vector-space stand-in for image augmentation: y = mask(scale * (x + sigma * g)).
struct AugmentPolicy {
  double noise_sigma = 0.15;
  double scale_jitter = 0.2;  // scale ~ U[1 - jitter, 1 + jitter]
  double mask_prob = 0.1;     // each coordinate zeroed independently

  void validate() const;
};

// Gaussian clusters around unit-norm class means that are pairwise at least
// 2 * cluster_spread apart. Samples are ordered class by class.
Dataset gen_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                      double cluster_spread, std::uint64_t seed);

inline constexpr std::uint64_t kDefaultDataSeed = 2022;

// 8 classes x 256 samples, input_dim 32, cluster_spread 0.25.
Dataset default_benchmark();

Vector augment(std::span<const double> x, const AugmentPolicy& policy, std::mt19937_64& rng);

// CSV with header `label,f0,...,f{d-1}`, one sample per line.
Dataset load_vectors(const std::filesystem::path& path);
void save_vectors(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace caco
