#include "caco/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "caco/errors.hpp"
#include "caco/geometry.hpp"

namespace caco {

void AugmentPolicy::validate() const {
  if (!(noise_sigma >= 0.0) || !(scale_jitter >= 0.0) ||
      !(mask_prob >= 0.0 && mask_prob < 1.0)) {
    throw ConfigError("augment policy needs noise_sigma >= 0, scale_jitter >= 0, "
                      "mask_prob in [0, 1)");
  }
}

Dataset gen_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                      double cluster_spread, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("need at least 2 classes");
  if (per_class < 2) throw ConfigError("need at least 2 samples per class");
  if (input_dim < 1) throw ConfigError("input dimension must be positive");
  if (!(cluster_spread >= 0.0)) throw ConfigError("cluster_spread must be nonnegative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double min_gap = 2.0 * cluster_spread;
  Matrix means(num_classes, input_dim);
  Vector draw(input_dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      for (double& x : draw) x = gauss(rng);
      if (!(norm(draw) > kDegenerateNorm)) continue;
      const double n = norm(draw);
      for (double& x : draw) x /= n;
      placed = true;
      for (std::size_t prev = 0; prev < c; ++prev) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < input_dim; ++i) {
          const double diff = draw[i] - means(prev, i);
          d2 += diff * diff;
        }
        if (std::sqrt(d2) < min_gap) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      throw GenerationError("could not place class mean " + std::to_string(c) +
                            " at separation " + std::to_string(min_gap) +
                            " after 1000 resamples");
    }
    means.set_row(c, draw);
  }

  Dataset ds;
  ds.samples = Matrix(num_classes * per_class, input_dim);
  ds.labels.reserve(num_classes * per_class);
  ds.num_classes = num_classes;
  ds.meta = DatasetMeta{"synthetic", per_class, cluster_spread, seed};
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      auto row = ds.samples.row(c * per_class + s);
      for (std::size_t i = 0; i < input_dim; ++i) {
        row[i] = means(c, i) + cluster_spread * gauss(rng);
      }
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

Dataset default_benchmark() { return gen_synthetic(8, 256, 32, 0.25, kDefaultDataSeed); }

Vector augment(std::span<const double> x, const AugmentPolicy& policy, std::mt19937_64& rng) {
  Vector y(x.begin(), x.end());
  if (policy.noise_sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, policy.noise_sigma);
    for (double& v : y) v += gauss(rng);
  }
  if (policy.scale_jitter > 0.0) {
    std::uniform_real_distribution<double> scale(1.0 - policy.scale_jitter,
                                                 1.0 + policy.scale_jitter);
    const double s = scale(rng);
    for (double& v : y) v *= s;
  }
  if (policy.mask_prob > 0.0) {
    std::bernoulli_distribution drop(policy.mask_prob);
    for (double& v : y) {
      if (drop(rng)) v = 0.0;
    }
  }
  return y;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view token, std::size_t line) {
  token = trim(token);
  std::string buf(token);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v)) {
    throw ParseError(line, "not a finite number: '" + buf + "'");
  }
  return v;
}

int parse_label(std::string_view token, std::size_t line) {
  token = trim(token);
  int label = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), label);
  if (ec != std::errc() || ptr != token.data() + token.size() || label < 0) {
    throw ParseError(line, "label must be a nonnegative integer, got '" +
                               std::string(token) + "'");
  }
  return label;
}

}  // namespace

Dataset load_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty file " + path.string());
  ++line_no;
  const auto header = split_commas(trim(line));
  if (header.size() < 2 || trim(header[0]) != "label") {
    throw ParseError(1, "header must be 'label,f0,f1,...'");
  }
  const std::size_t dim = header.size() - 1;

  Dataset ds;
  ds.samples = Matrix(0, dim);
  ds.meta.source = path.string();
  Vector row(dim);
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_commas(content);
    if (fields.size() != dim + 1) {
      throw ParseError(line_no, "expected " + std::to_string(dim + 1) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    const int label = parse_label(fields[0], line_no);
    for (std::size_t i = 0; i < dim; ++i) row[i] = parse_double(fields[i + 1], line_no);
    ds.samples.append_row(row);
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (ds.size() < 2) {
    throw ParseError(line_no, "need at least 2 samples in " + path.string());
  }
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

void save_vectors(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "label";
  for (std::size_t i = 0; i < dataset.input_dim(); ++i) out << ",f" << i;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    out << dataset.labels[r];
    for (double v : dataset.samples.row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace caco
