#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "caco/commands.hpp"
#include "caco/metrics_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"caco: shared learnable memory bank contrastive training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(caco::version_string()));

  std::string config_path, out_dir;
  CLI::App* train = app.add_subcommand("train", "Train an encoder and memory bank");
  train->add_option("--config", config_path, "Config file (key = value lines)")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  std::string checkpoint, data = std::string(caco::kBuiltinDefault), eval_out;
  caco::EvalOptions options;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "CSV path or builtin:default")->capture_default_str();
  eval->add_option("--out", eval_out, "Where to write the JSON report")->required();
  eval->add_option("--tau", options.tau, "Temperature for MMPP")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_option("--knn-k", options.knn_k, "Neighbours for kNN")->capture_default_str();
  eval->add_option("--held-out-fraction", options.held_out_fraction)->capture_default_str();
  eval->add_option("--split-seed", options.split_seed)->capture_default_str();
  eval->add_option("--probe-epochs", options.probe_epochs)->capture_default_str();
  eval->add_option("--probe-lr", options.probe_lr)->capture_default_str();

  std::string inspect_checkpoint;
  CLI::App* inspect = app.add_subcommand("inspect-bank", "Summarize the stored memory bank");
  inspect->add_option("--checkpoint", inspect_checkpoint, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) return caco::cmd_train(config_path, out_dir, std::cout, std::cerr);
  if (eval->parsed()) {
    return caco::cmd_eval(checkpoint, data, eval_out, options, std::cout, std::cerr);
  }
  return caco::cmd_inspect_bank(inspect_checkpoint, std::cout, std::cerr);
}
