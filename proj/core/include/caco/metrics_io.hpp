#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "caco/config.hpp"
#include "caco/eval.hpp"
#include "caco/trainer.hpp"

namespace caco {

std::string_view version_string();

// One JSON object per line:
// {"epoch","mode","loss","mmpp","bank_norm_dev","churn","knn_acc"}; knn_acc may be null.
std::string epoch_record(const EpochMetrics& metrics, TrainMode mode);

// Truncates on open, flushes after every record.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, TrainMode mode);
  void write(const EpochMetrics& metrics);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  TrainMode mode_;
  std::ofstream out_;
};

std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path);

std::string eval_report_json(const EvalReport& report);
EvalReport parse_eval_report(std::string_view json);

struct RunManifest {
  ExperimentConfig config;  // effective values, seed override applied
  std::vector<std::string> artifacts;
  std::string started_at;
  std::string finished_at;
  std::string version;
  std::size_t epochs_completed = 0;
  std::optional<EvalReport> initial_eval;
  std::optional<EvalReport> final_eval;
};

std::string manifest_json(const RunManifest& manifest);
// Atomic: temp file then rename.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

// Writes text to a temporary sibling and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace caco
