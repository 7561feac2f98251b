#include "caco/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>

#include "caco/checkpoint.hpp"
#include "caco/errors.hpp"
#include "json.hpp"

namespace caco {

namespace {

namespace fs = std::filesystem;

Checkpoint snapshot(const TrainState& state) {
  Checkpoint ckpt{state.bank, state.query, state.key};
  quantize_to_f32(ckpt);
  return ckpt;
}

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

void check_input_dim(const Checkpoint& ckpt, const Dataset& ds) {
  if (ckpt.query.input_dim() != ds.input_dim()) {
    throw ConfigError("checkpoint encoder expects input dim " +
                      std::to_string(ckpt.query.input_dim()) + " but data has " +
                      std::to_string(ds.input_dim()));
  }
}

}  // namespace

Dataset load_dataset(std::string_view source) {
  if (source == kBuiltinDefault) return default_benchmark();
  if (source.starts_with("builtin:")) {
    throw ConfigError("unknown builtin dataset '" + std::string(source) +
                      "' (available: builtin:default)");
  }
  return load_vectors(fs::path(std::string(source)));
}

RunManifest run_experiment(const ExperimentConfig& config, const fs::path& out_dir,
                           std::ostream* log) {
  RunManifest manifest;
  manifest.config = config;
  manifest.config.eval.tau = config.train.tau;
  manifest.version = std::string(version_string());
  manifest.started_at = utc_timestamp();

  const Dataset dataset = load_dataset(config.data);
  config.train.validate(dataset.size());
  fs::create_directories(out_dir);

  const EvalOptions& eval_options = manifest.config.eval;
  const fs::path metrics_path = out_dir / "metrics.jsonl";
  MetricsWriter metrics(metrics_path, config.train.mode);
  manifest.artifacts.push_back(metrics_path.string());

  auto save = [&](const Checkpoint& ckpt, const std::string& name) {
    const fs::path path = out_dir / name;
    save_checkpoint(ckpt, path);
    manifest.artifacts.push_back(path.string());
  };

  RunHooks hooks;
  hooks.probe = make_knn_probe(dataset, eval_options);
  hooks.on_start = [&](const TrainState& state) {
    const Checkpoint ckpt = snapshot(state);
    save(ckpt, "checkpoint_init.bin");
    manifest.initial_eval = evaluate(ckpt.query, ckpt.bank, dataset, eval_options);
  };
  hooks.on_epoch = [&](const EpochMetrics& m, const TrainState& state) {
    metrics.write(m);
    manifest.epochs_completed = m.epoch;
    if (log) {
      *log << "epoch " << m.epoch << "/" << config.train.epochs << " loss "
           << fmt("%.4f", m.loss_mean) << " mmpp " << fmt("%.4f", m.mmpp) << " churn "
           << fmt("%.3f", m.churn);
      if (m.knn_acc) *log << " knn " << fmt("%.4f", *m.knn_acc);
      *log << "\n";
    }
    if (config.checkpoint_every > 0 && m.epoch % config.checkpoint_every == 0 &&
        m.epoch != config.train.epochs) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_epoch%04zu.bin", m.epoch);
      save(snapshot(state), name);
    }
  };

  const RunResult result = run(config.train, dataset.samples, hooks);
  const Checkpoint final_ckpt = snapshot(result.state);
  save(final_ckpt, "checkpoint_final.bin");
  manifest.final_eval = evaluate(final_ckpt.query, final_ckpt.bank, dataset, eval_options);
  manifest.finished_at = utc_timestamp();
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir, std::ostream& out,
              std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    apply_seed_override(config, std::getenv("CACO_SEED"));
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    const RunManifest manifest = run_experiment(config, out_dir, &out);
    if (manifest.final_eval) {
      out << "final " << eval_report_json(*manifest.final_eval) << "\n";
    }
    out << "wrote " << (out_dir / "manifest.json").string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFault& e) {
    err << "numerical fault: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const fs::path& checkpoint_path, std::string_view data, const fs::path& out_path,
             const EvalOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const Dataset dataset = load_dataset(data);
    check_input_dim(ckpt, dataset);
    const EvalReport report = evaluate(ckpt.query, ckpt.bank, dataset, options);
    nlohmann::json j = nlohmann::json::parse(eval_report_json(report));
    j["checkpoint"] = checkpoint_path.string();
    j["data"] = std::string(data);
    j["tau"] = options.tau;
    j["knn_k"] = options.knn_k;
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_file_atomic(out_path, j.dump() + "\n");
    out << eval_report_json(report) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_inspect_bank(const fs::path& checkpoint_path, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const BankSummary s = summarize_bank(ckpt.bank.entries, 5);
    out << "K " << s.size << "\n"
        << "D " << s.dim << "\n"
        << "row norm min " << fmt("%.9f", s.min_norm) << " max " << fmt("%.9f", s.max_norm)
        << " mean " << fmt("%.9f", s.mean_norm) << "\n";
    if (!s.max_cosine) {
      out << "pairwise max cosine n/a\n";
      return 0;
    }
    out << "pairwise max cosine " << fmt("%.6f", *s.max_cosine) << "\n"
        << "most aligned pairs:\n";
    for (const AlignedPair& p : s.top_pairs) {
      out << "  " << p.i << " " << p.j << " " << fmt("%.6f", p.cosine) << "\n";
    }
    return 0;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace caco
