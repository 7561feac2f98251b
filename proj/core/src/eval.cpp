#include "caco/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "caco/errors.hpp"
#include "caco/rng.hpp"

namespace caco {

double knn_accuracy(const Matrix& train_emb, std::span<const int> train_labels,
                    const Matrix& test_emb, std::span<const int> test_labels, std::size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (k > train_emb.rows()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the " +
                      std::to_string(train_emb.rows()) + " training points");
  }
  if (train_labels.size() != train_emb.rows() || test_labels.size() != test_emb.rows()) {
    throw ConsistencyError("label count does not match embedding count");
  }
  if (test_emb.rows() == 0) throw ConfigError("no test points");
  if (train_emb.cols() != test_emb.cols()) {
    throw ConsistencyError("train and test embeddings differ in dimension");
  }

  const std::size_t n = train_emb.rows();
  std::vector<double> sims(n);
  std::vector<std::size_t> order(n);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < test_emb.rows(); ++t) {
    for (std::size_t i = 0; i < n; ++i) sims[i] = dot(test_emb.row(t), train_emb.row(i));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
                      });
    std::map<int, std::pair<std::size_t, double>> votes;  // label -> (count, summed sim)
    for (std::size_t r = 0; r < k; ++r) {
      auto& v = votes[train_labels[order[r]]];
      ++v.first;
      v.second += sims[order[r]];
    }
    int best = votes.begin()->first;
    auto best_vote = votes.begin()->second;
    for (const auto& [label, vote] : votes) {
      if (vote.first > best_vote.first ||
          (vote.first == best_vote.first && vote.second > best_vote.second)) {
        best = label;
        best_vote = vote;
      }
    }
    if (best == test_labels[t]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_emb.rows());
}

double linear_probe(const Matrix& features, std::span<const int> labels,
                    const Matrix& held_out, std::span<const int> held_out_labels,
                    std::size_t epochs, double lr) {
  if (labels.size() != features.rows() || held_out_labels.size() != held_out.rows()) {
    throw ConsistencyError("label count does not match feature count");
  }
  if (features.rows() == 0 || held_out.rows() == 0) throw ConfigError("empty probe split");
  if (features.cols() != held_out.cols()) {
    throw ConsistencyError("probe splits differ in feature dimension");
  }
  const int top_label = std::max(*std::max_element(labels.begin(), labels.end()),
                                 *std::max_element(held_out_labels.begin(),
                                                   held_out_labels.end()));
  const bool one_class = std::all_of(labels.begin(), labels.end(),
                                     [&](int l) { return l == labels.front(); });
  if (one_class) throw ConfigError("linear probe needs at least two classes in training labels");

  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  const std::size_t classes = static_cast<std::size_t>(top_label + 1);

  Vector mean(f, 0.0), scale(f, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, features.row(i), mean);
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < f; ++d) {
      const double c = features(i, d) - mean[d];
      scale[d] += c * c;
    }
  }
  for (double& s : scale) s = 1.0 / std::max(std::sqrt(s / static_cast<double>(n)), 1e-8);
  auto standardize = [&](const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t d = 0; d < f; ++d) out(i, d) = (out(i, d) - mean[d]) * scale[d];
    }
    return out;
  };
  const Matrix x = standardize(features);
  const Matrix xh = standardize(held_out);

  Matrix w(classes, f);
  Vector b(classes, 0.0);
  Matrix gw(classes, f);
  Vector gb(classes), logits(classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::fill(gw.values().begin(), gw.values().end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < classes; ++c) logits[c] = b[c] + dot(w.row(c), x.row(i));
      const Vector p = tempered_softmax(logits, 1.0);
      for (std::size_t c = 0; c < classes; ++c) {
        const double err = p[c] - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0);
        gb[c] += err;
        axpy(err, x.row(i), gw.row(c));
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      b[c] -= lr * gb[c] * inv_n;
      axpy(-lr * inv_n, gw.row(c), w.row(c));
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < xh.rows(); ++i) {
    std::size_t best = 0;
    double best_logit = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double l = b[c] + dot(w.row(c), xh.row(i));
      if (c == 0 || l > best_logit) {
        best = c;
        best_logit = l;
      }
    }
    if (static_cast<int>(best) == held_out_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xh.rows());
}

double mean_max_positive_prob(std::span<const UnitEmbedding> anchors, const MemoryBank& bank,
                              double tau) {
  if (anchors.empty()) throw ConfigError("mean max positive probability needs anchors");
  double total = 0.0;
  for (const auto& z : anchors) {
    const Vector p = positive_probabilities(z, bank, tau);
    total += *std::max_element(p.begin(), p.end());
  }
  return total / static_cast<double>(anchors.size());
}

double embedding_spread(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  if (n < 2) throw ConfigError("embedding spread needs at least 2 points");
  const std::size_t d = embeddings.cols();
  // shifted by the first row so identical points give exactly zero
  const auto origin = embeddings.row(0);
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += embeddings(i, c) - origin[c];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = (embeddings(i, c) - origin[c]) - mean[c];
      trace += diff * diff;
    }
  }
  return trace / static_cast<double>(n);
}

Split holdout_split(std::size_t n, double held_out_fraction, std::uint64_t seed) {
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0)) {
    throw ConfigError("held-out fraction must be in (0, 1)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, {0x5eed}));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * held_out_fraction));
  if (cut == 0 || cut >= n) throw ConfigError("held-out split would be empty");
  Split s;
  s.held_out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  s.reference.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  std::sort(s.held_out.begin(), s.held_out.end());
  std::sort(s.reference.begin(), s.reference.end());
  return s;
}

Matrix embed_all(const EncoderParams& encoder, const Matrix& samples) {
  Matrix out(samples.rows(), encoder.output_dim());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    out.set_row(i, normalize(forward_raw(encoder, samples.row(i))).coords());
  }
  return out;
}

std::vector<UnitEmbedding> embed_units(const EncoderParams& encoder, const Matrix& samples) {
  std::vector<UnitEmbedding> out;
  out.reserve(samples.rows());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    out.push_back(normalize(forward_raw(encoder, samples.row(i))));
  }
  return out;
}

Matrix features_all(const EncoderParams& encoder, const Matrix& samples) {
  Matrix out;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    out.append_row(hidden_features(encoder, samples.row(i)));
  }
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.set_row(r, m.row(idx[r]));
  return out;
}

std::vector<int> select_labels(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

std::function<double(const EncoderParams&)> make_knn_probe(const Dataset& dataset,
                                                           const EvalOptions& options) {
  const Split split = holdout_split(dataset.size(), options.held_out_fraction,
                                    options.split_seed);
  Matrix ref_x = select_rows(dataset.samples, split.reference);
  Matrix test_x = select_rows(dataset.samples, split.held_out);
  std::vector<int> ref_y = select_labels(dataset.labels, split.reference);
  std::vector<int> test_y = select_labels(dataset.labels, split.held_out);
  const std::size_t k = options.knn_k;
  return [=](const EncoderParams& encoder) {
    return knn_accuracy(embed_all(encoder, ref_x), ref_y, embed_all(encoder, test_x), test_y, k);
  };
}

EvalReport evaluate(const EncoderParams& query, const MemoryBank& bank, const Dataset& dataset,
                    const EvalOptions& options) {
  const Split split = holdout_split(dataset.size(), options.held_out_fraction,
                                    options.split_seed);
  const Matrix emb = embed_all(query, dataset.samples);
  const Matrix feats = features_all(query, dataset.samples);
  const std::vector<int> ref_y = select_labels(dataset.labels, split.reference);
  const std::vector<int> test_y = select_labels(dataset.labels, split.held_out);

  EvalReport report;
  report.knn_acc = knn_accuracy(select_rows(emb, split.reference), ref_y,
                                select_rows(emb, split.held_out), test_y, options.knn_k);
  report.probe_acc = linear_probe(select_rows(feats, split.reference), ref_y,
                                  select_rows(feats, split.held_out), test_y,
                                  options.probe_epochs, options.probe_lr);
  std::vector<UnitEmbedding> anchors;
  anchors.reserve(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) anchors.push_back(UnitEmbedding::from_unit(emb.row(i)));
  report.mmpp = mean_max_positive_prob(anchors, bank, options.tau);
  report.spread = embedding_spread(emb);
  return report;
}

}  // namespace caco
