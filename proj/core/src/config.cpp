#include "caco/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "caco/errors.hpp"

namespace caco {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::size_t to_size(std::string_view v) { return static_cast<std::size_t>(to_u64(v)); }

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> to_dims(std::string_view v) {
  std::vector<std::size_t> dims;
  if (v.empty() || v == "none") return dims;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = v.find(',', start);
    const std::string_view item = trim(v.substr(start, comma - start));
    dims.push_back(to_size(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return dims;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"mode", [](ExperimentConfig& c, std::string_view v) { c.train.mode = parse_train_mode(v); }},
      {"tau", [](ExperimentConfig& c, std::string_view v) { c.train.tau = to_double(v); }},
      {"bank_lr", [](ExperimentConfig& c, std::string_view v) { c.train.bank_lr = to_double(v); }},
      {"bank_momentum",
       [](ExperimentConfig& c, std::string_view v) { c.train.bank_momentum = to_double(v); }},
      {"bank_lr_cosine",
       [](ExperimentConfig& c, std::string_view v) { c.train.bank_lr_cosine = to_bool(v); }},
      {"encoder_lr",
       [](ExperimentConfig& c, std::string_view v) { c.train.encoder_lr = to_double(v); }},
      {"encoder_momentum",
       [](ExperimentConfig& c, std::string_view v) { c.train.encoder_momentum = to_double(v); }},
      {"weight_decay",
       [](ExperimentConfig& c, std::string_view v) { c.train.weight_decay = to_double(v); }},
      {"ema_m", [](ExperimentConfig& c, std::string_view v) { c.train.ema_m = to_double(v); }},
      {"batch_size",
       [](ExperimentConfig& c, std::string_view v) { c.train.batch_size = to_size(v); }},
      {"epochs", [](ExperimentConfig& c, std::string_view v) { c.train.epochs = to_size(v); }},
      {"bank_size",
       [](ExperimentConfig& c, std::string_view v) { c.train.bank_size = to_size(v); }},
      {"embed_dim",
       [](ExperimentConfig& c, std::string_view v) { c.train.embed_dim = to_size(v); }},
      {"hidden_dims",
       [](ExperimentConfig& c, std::string_view v) { c.train.hidden_dims = to_dims(v); }},
      {"symmetric", [](ExperimentConfig& c, std::string_view v) { c.train.symmetric = to_bool(v); }},
      {"refresh_bank_embeddings",
       [](ExperimentConfig& c, std::string_view v) {
         c.train.refresh_bank_embeddings = to_bool(v);
       }},
      {"noise_sigma",
       [](ExperimentConfig& c, std::string_view v) { c.train.augment.noise_sigma = to_double(v); }},
      {"scale_jitter",
       [](ExperimentConfig& c, std::string_view v) { c.train.augment.scale_jitter = to_double(v); }},
      {"mask_prob",
       [](ExperimentConfig& c, std::string_view v) { c.train.augment.mask_prob = to_double(v); }},
      {"seed", [](ExperimentConfig& c, std::string_view v) { c.train.seed = to_u64(v); }},
      {"data", [](ExperimentConfig& c, std::string_view v) { c.data = std::string(v); }},
      {"knn_k", [](ExperimentConfig& c, std::string_view v) { c.eval.knn_k = to_size(v); }},
      {"held_out_fraction",
       [](ExperimentConfig& c, std::string_view v) { c.eval.held_out_fraction = to_double(v); }},
      {"split_seed", [](ExperimentConfig& c, std::string_view v) { c.eval.split_seed = to_u64(v); }},
      {"probe_epochs",
       [](ExperimentConfig& c, std::string_view v) { c.eval.probe_epochs = to_size(v); }},
      {"probe_lr", [](ExperimentConfig& c, std::string_view v) { c.eval.probe_lr = to_double(v); }},
      {"checkpoint_every",
       [](ExperimentConfig& c, std::string_view v) { c.checkpoint_every = to_size(v); }},
  };
  return table;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key before '='");

    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    }
    if (!seen.insert(std::string(key)).second) {
      throw ParseError(line_no, "duplicate key '" + std::string(key) + "'");
    }
    if (value.empty()) throw ParseError(line_no, "key '" + std::string(key) + "': missing value");
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, "key '" + std::string(key) + "': " + e.what());
    }
  }
  config.eval.tau = config.train.tau;
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  std::string dims;
  for (std::size_t i = 0; i < t.hidden_dims.size(); ++i) {
    if (i) dims += ",";
    dims += std::to_string(t.hidden_dims[i]);
  }
  if (dims.empty()) dims = "none";
  auto flag = [](bool b) { return b ? "true" : "false"; };

  std::ostringstream out;
  out << "mode = " << to_string(t.mode) << "\n"
      << "tau = " << num(t.tau) << "\n"
      << "bank_lr = " << num(t.bank_lr) << "\n"
      << "bank_momentum = " << num(t.bank_momentum) << "\n"
      << "bank_lr_cosine = " << flag(t.bank_lr_cosine) << "\n"
      << "encoder_lr = " << num(t.encoder_lr) << "\n"
      << "encoder_momentum = " << num(t.encoder_momentum) << "\n"
      << "weight_decay = " << num(t.weight_decay) << "\n"
      << "ema_m = " << num(t.ema_m) << "\n"
      << "batch_size = " << t.batch_size << "\n"
      << "epochs = " << t.epochs << "\n"
      << "bank_size = " << t.bank_size << "\n"
      << "embed_dim = " << t.embed_dim << "\n"
      << "hidden_dims = " << dims << "\n"
      << "symmetric = " << flag(t.symmetric) << "\n"
      << "refresh_bank_embeddings = " << flag(t.refresh_bank_embeddings) << "\n"
      << "noise_sigma = " << num(t.augment.noise_sigma) << "\n"
      << "scale_jitter = " << num(t.augment.scale_jitter) << "\n"
      << "mask_prob = " << num(t.augment.mask_prob) << "\n"
      << "seed = " << t.seed << "\n"
      << "data = " << c.data << "\n"
      << "knn_k = " << c.eval.knn_k << "\n"
      << "held_out_fraction = " << num(c.eval.held_out_fraction) << "\n"
      << "split_seed = " << c.eval.split_seed << "\n"
      << "probe_epochs = " << c.eval.probe_epochs << "\n"
      << "probe_lr = " << num(c.eval.probe_lr) << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n";
  return out.str();
}

std::optional<std::uint64_t> parse_seed(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  try {
    return to_u64(text);
  } catch (const ConfigError&) {
    throw ConfigError("CACO_SEED must be a non-negative integer, got '" + std::string(text) + "'");
  }
}

void apply_seed_override(ExperimentConfig& config, const char* value) {
  if (value == nullptr) return;
  if (const auto seed = parse_seed(value)) config.train.seed = *seed;
}

}  // namespace caco
