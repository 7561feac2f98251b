#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "caco/eval.hpp"
#include "caco/trainer.hpp"

namespace caco {

// Everything a `train` run reads from its config file.
struct ExperimentConfig {
  TrainConfig train;
  std::string data = "builtin:default";  // CSV path or builtin:default
  EvalOptions eval;
  std::size_t checkpoint_every = 0;  // epochs between snapshots, 0 = init and final only
};

// Flat `key = value` lines with `#` comments. Every key is optional.
// Syntax and value errors throw ParseError naming the key and line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& config);

// Applies a CACO_SEED-style override. Empty or null leaves the seed alone.
void apply_seed_override(ExperimentConfig& config, const char* value);

std::optional<std::uint64_t> parse_seed(std::string_view text);

}  // namespace caco
