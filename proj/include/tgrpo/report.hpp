#pragma once

// Config files, trace and summary emission, and policy persistence. Every
// file is written to a temporary sibling first and renamed into place.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgrpo/trainer.hpp"

namespace tgrpo {

inline constexpr int kTraceSchemaVersion = 1;

/// Column order shared by the line-delimited trace and its CSV mirror.
const std::vector<std::string>& trace_columns();

/// Sections: method, optimization, temperature, budget, bank, evaluation,
/// plus a top-level seed. Missing keys keep their defaults; unknown keys
/// throw ConfigError.
TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json config_to_json(const TrainConfig& config);
TrainConfig load_config(const std::filesystem::path& path);

nlohmann::ordered_json trace_row(const TraceRecord& record);
std::string trace_jsonl(const std::vector<TraceRecord>& trace);
std::string trace_csv(const std::vector<TraceRecord>& trace);

nlohmann::ordered_json pass_table_json(const PassAtKTable& table);

struct RunManifest {
  TrainConfig config;
  std::string started_at;
  std::string finished_at;
  std::vector<std::filesystem::path> artifacts;
};

nlohmann::ordered_json summary_json(const RunManifest& manifest,
                                    const TrainResult& result);

/// Per-step mean and sample standard deviation of every numeric column over
/// runs of equal length.
std::string aggregate_csv(const std::vector<std::vector<TraceRecord>>& traces);

nlohmann::ordered_json policy_json(const PolicyTable& policy);
PolicyTable policy_from_json(const nlohmann::json& doc);

/// Writes `content` to `path.tmp` and renames it over `path`.
void write_atomically(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Formats a double exactly as the JSON emitter does.
std::string format_number(double value);

/// UTC timestamp, e.g. 2026-01-31T12:00:00Z.
std::string utc_now();

}  // namespace tgrpo
