#include "caco/metrics_io.hpp"

#include <chrono>
#include <ctime>
#include <sstream>
#include <system_error>

#include "caco/errors.hpp"
#include "json.hpp"

namespace caco {

using nlohmann::json;

namespace {

json report_to_json(const EvalReport& r) {
  return json{{"knn_acc", r.knn_acc}, {"probe_acc", r.probe_acc}, {"mmpp", r.mmpp},
              {"spread", r.spread}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.knn_acc = j.at("knn_acc").get<double>();
  r.probe_acc = j.at("probe_acc").get<double>();
  r.mmpp = j.at("mmpp").get<double>();
  r.spread = j.at("spread").get<double>();
  return r;
}

json config_to_json(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  return json{
      {"mode", std::string(to_string(t.mode))},
      {"tau", t.tau},
      {"bank_lr", t.bank_lr},
      {"bank_momentum", t.bank_momentum},
      {"bank_lr_cosine", t.bank_lr_cosine},
      {"encoder_lr", t.encoder_lr},
      {"encoder_momentum", t.encoder_momentum},
      {"weight_decay", t.weight_decay},
      {"ema_m", t.ema_m},
      {"batch_size", t.batch_size},
      {"epochs", t.epochs},
      {"bank_size", t.bank_size},
      {"embed_dim", t.embed_dim},
      {"hidden_dims", t.hidden_dims},
      {"symmetric", t.symmetric},
      {"refresh_bank_embeddings", t.refresh_bank_embeddings},
      {"noise_sigma", t.augment.noise_sigma},
      {"scale_jitter", t.augment.scale_jitter},
      {"mask_prob", t.augment.mask_prob},
      {"seed", t.seed},
      {"data", c.data},
      {"knn_k", c.eval.knn_k},
      {"held_out_fraction", c.eval.held_out_fraction},
      {"split_seed", c.eval.split_seed},
      {"probe_epochs", c.eval.probe_epochs},
      {"probe_lr", c.eval.probe_lr},
      {"checkpoint_every", c.checkpoint_every},
  };
}

}  // namespace

std::string_view version_string() {
#ifdef CACO_VERSION_STRING
  return CACO_VERSION_STRING;
#else
  return "unknown";
#endif
}

std::string epoch_record(const EpochMetrics& m, TrainMode mode) {
  json j{{"epoch", m.epoch},   {"mode", std::string(to_string(mode))},
         {"loss", m.loss_mean}, {"mmpp", m.mmpp},
         {"bank_norm_dev", m.bank_norm_dev}, {"churn", m.churn}};
  j["knn_acc"] = m.knn_acc ? json(*m.knn_acc) : json(nullptr);
  return j.dump();
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, TrainMode mode)
    : path_(path), mode_(mode), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot open metrics file " + path.string());
}

void MetricsWriter::write(const EpochMetrics& metrics) {
  out_ << epoch_record(metrics, mode_) << '\n';
  out_.flush();
  if (!out_) throw Error("write failed for " + path_.string());
}

std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read metrics file " + path.string());
  std::vector<EpochMetrics> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EpochMetrics m;
      m.epoch = j.at("epoch").get<std::size_t>();
      m.loss_mean = j.at("loss").get<double>();
      m.mmpp = j.at("mmpp").get<double>();
      m.bank_norm_dev = j.at("bank_norm_dev").get<double>();
      m.churn = j.at("churn").get<double>();
      if (!j.at("knn_acc").is_null()) m.knn_acc = j.at("knn_acc").get<double>();
      out.push_back(m);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::string eval_report_json(const EvalReport& report) { return report_to_json(report).dump(); }

EvalReport parse_eval_report(std::string_view text) {
  try {
    return report_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(1, e.what());
  }
}

std::string manifest_json(const RunManifest& m) {
  json j{{"version", m.version},
         {"mode", std::string(to_string(m.config.train.mode))},
         {"seed", m.config.train.seed},
         {"tau", m.config.train.tau},
         {"data", m.config.data},
         {"config", config_to_json(m.config)},
         {"config_text", format_config(m.config)},
         {"artifacts", m.artifacts},
         {"started_at", m.started_at},
         {"finished_at", m.finished_at},
         {"epochs_completed", m.epochs_completed}};
  j["initial_eval"] = m.initial_eval ? report_to_json(*m.initial_eval) : json(nullptr);
  j["final_eval"] = m.final_eval ? report_to_json(*m.final_eval) : json(nullptr);
  return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_json(manifest));
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read manifest " + path.string());
  try {
    const json j = json::parse(in);
    RunManifest m;
    m.config = parse_config(j.at("config_text").get<std::string>());
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.epochs_completed = j.at("epochs_completed").get<std::size_t>();
    if (!j.at("initial_eval").is_null()) m.initial_eval = report_from_json(j.at("initial_eval"));
    if (!j.at("final_eval").is_null()) m.final_eval = report_from_json(j.at("final_eval"));
    return m;
  } catch (const json::exception& e) {
    throw Error("malformed manifest " + path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot move " + tmp.string() + " into place");
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace caco
