#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "caco/config.hpp"
#include "caco/data.hpp"
#include "caco/eval.hpp"
#include "caco/metrics_io.hpp"

namespace caco {

inline constexpr std::string_view kBuiltinDefault = "builtin:default";

// "builtin:default" or a CSV path.
Dataset load_dataset(std::string_view source);

// Trains and writes metrics.jsonl, checkpoint_init.bin, checkpoint_final.bin
// (plus checkpoint_epochNNNN.bin when checkpoint_every > 0) and manifest.json.
// Saved states are rounded to float first and the evaluations in the manifest
// are computed on the rounded state. log may be null.
RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                           std::ostream* log = nullptr);

// Exit codes: 0 success, 1 runtime failure, 2 bad config or arguments.
// CACO_SEED, when set, overrides the config seed.
int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& checkpoint_path, std::string_view data,
             const std::filesystem::path& out_path, const EvalOptions& options,
             std::ostream& out, std::ostream& err);
int cmd_inspect_bank(const std::filesystem::path& checkpoint_path, std::ostream& out,
                     std::ostream& err);

}  // namespace caco
