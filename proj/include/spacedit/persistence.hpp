#pragma once

// JSON views of session state plus the on-disk session directory:
//
//   manifest.json      version, model config, classes, split, cursor, checkpoint checksums
//   dataset/*.csv      features, labels, splits
//   checkpoints/*.bin  model checkpoints (see checkpoint.hpp)
//   layouts/*.json     base, current and one snapshot per history entry
//   history.jsonl      one edit-script line per history entry
//   metrics.json

#include "spacedit/session.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace spacedit {

inline constexpr int kSessionFormatVersion = 1;

nlohmann::json layout_to_json(const Layout2D& layout);
Layout2D layout_from_json(const nlohmann::json& j);

nlohmann::json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

nlohmann::json retrain_config_to_json(const RetrainConfig& config);
/// Missing keys keep their defaults; accepts "lr" or "learning_rate".
RetrainConfig retrain_config_from_json(const nlohmann::json& j);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Edit-script line with extra keys: kind, label, created_at, checkpoint,
/// retrain (retrain boundaries) and undone (entries past the cursor).
std::string history_to_json_line(const HistoryEntry& entry, bool undone);

struct HistoryLine {
  HistoryEntry entry;  // layout left empty
  bool undone = false;
};
HistoryLine history_from_json_line(std::string_view line);

void save_session(const Session& session, const std::filesystem::path& directory);
Session load_session(const std::filesystem::path& directory);

}  // namespace spacedit
