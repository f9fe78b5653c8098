#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/errors.hpp"
#include "cdcr/events.hpp"
#include "cdcr/ingestion.hpp"

namespace cdcr {

// Workbench configuration file. `sampling_seed` is required so that IAA
// membership is reproducible; everything else has a default.
struct AppConfig {
  std::filesystem::path data_dir = "cdcr-data";
  QueueConfig queue;
  std::size_t snapshot_every = 1000;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<AnnotatorId> annotators;
  MatchOptions match;
  std::size_t stub_dim = 64;
};

inline AppConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  if (!j.is_object()) throw Error(ErrorCode::schema, "configuration must be an object");
  if (!j.contains("sampling_seed") || !j["sampling_seed"].is_number_integer()) {
    throw Error(ErrorCode::validation, "configuration needs an integer sampling_seed");
  }
  AppConfig c;
  try {
    c.queue.sampling_seed = j["sampling_seed"].get<std::uint64_t>();
    c.queue.iaa_fraction = j.value("iaa_fraction", c.queue.iaa_fraction);
    c.queue.weekly_iaa_cap = j.value("weekly_iaa_cap", c.queue.weekly_iaa_cap);
    c.queue.claim_lease = std::chrono::seconds(j.value("claim_lease_seconds", c.queue.claim_lease.count()));
    c.queue.stratified_ranking = j.value("stratified_ranking", false);
    if (j.contains("data_dir")) {
      std::filesystem::path dir = j["data_dir"].get<std::string>();
      c.data_dir = dir.is_relative() && !base.empty() ? base / dir : dir;
    }
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.annotators = j.value("annotators", c.annotators);
    c.match.date_window_days = j.value("date_window_days", c.match.date_window_days);
    c.match.author_overlap_threshold = j.value("author_overlap_threshold", c.match.author_overlap_threshold);
    c.stub_dim = j.value("stub_dim", c.stub_dim);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, std::string("configuration: ") + e.what());
  }
  c.queue.validate();
  if (c.snapshot_every == 0) throw Error(ErrorCode::validation, "snapshot_every must be positive");
  return c;
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::storage, "cannot open configuration " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, "configuration " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace cdcr
