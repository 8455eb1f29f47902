#pragma once

// The single source of truth behind the API and CLI: dataset, checkpoints,
// the current layout, edit history with a cursor, and metrics.
//
// Session is not internally synchronised; callers serialise mutations (the
// HTTP service holds one mutex). Retraining is split into plan / execute /
// commit so the expensive middle step can run without holding that lock.

#include "spacedit/dataset.hpp"
#include "spacedit/embedding.hpp"
#include "spacedit/feedback.hpp"
#include "spacedit/metrics.hpp"
#include "spacedit/model.hpp"
#include "spacedit/objective.hpp"
#include "spacedit/training.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace spacedit {

struct RetrainConfig {
  std::size_t epochs = 10;
  double learning_rate = kDefaultLearningRate;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t k = kDefaultReferenceCount;
  double delta = kDefaultMargin;
  double w_cls = 1.0;
  double w_dis = 0.1;
  AnchorMode anchor_mode = AnchorMode::live;
  AnchorWeighting weighting = AnchorWeighting::normalized;
  std::uint64_t seed = 0;
  bool allow_empty = false;

  void validate() const;
  bool operator==(const RetrainConfig&) const = default;
};

struct HistoryEntry {
  enum class Kind { edit, retrain };

  Kind kind = Kind::edit;
  EditTransaction transaction;          // empty for retrain entries
  std::optional<RetrainConfig> retrain;  // set for retrain entries
  Layout2D layout;                       // positions after this entry
  std::size_t checkpoint = 0;            // checkpoint in effect after this entry
  std::string label;
  std::int64_t timestamp = 0;
};

struct SessionData {
  std::shared_ptr<const DatasetBundle> dataset;
  ModelConfig model_config;
  std::size_t k_graph = kDefaultGraphNeighbors;
  std::vector<ClassifierModel> checkpoints;
  std::size_t base_checkpoint = 0;
  std::size_t current_checkpoint = 0;
  Layout2D base_layout;
  Layout2D layout;
  std::vector<HistoryEntry> history;
  std::size_t cursor = 0;  // number of history entries in effect
  MetricsReport metrics;
  std::vector<bool> class_visible;
  std::vector<std::string> warnings;  // from the last edit/retrain
};

/// Everything a retrain needs, copied out of the session.
struct RetrainPlan {
  RetrainConfig config;
  std::shared_ptr<const DatasetBundle> dataset;
  ClassifierModel start_model;
  EditFeedback feedback;
  Layout2D previous_layout;
  std::size_t k_graph = kDefaultGraphNeighbors;
  std::size_t next_checkpoint = 0;
  std::uint64_t session_version = 0;
  std::vector<std::string> warnings;
};

struct RetrainResult {
  RetrainConfig config;
  ClassifierModel model;
  TrainingTrace trace;
  Layout2D layout;
  MetricsReport metrics;
  std::uint64_t session_version = 0;
  std::vector<std::string> warnings;
};

struct PretrainOptions {
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double learning_rate = kDefaultLearningRate;
  std::size_t batch_size = kDefaultBatchSize;
};

class Session {
 public:
  /// A session with a dataset but no model yet; call pretrain().
  static Session create(DatasetBundle dataset, ModelConfig model_config,
                        std::size_t k_graph = kDefaultGraphNeighbors);
  explicit Session(SessionData data);

  const SessionData& data() const { return data_; }
  const DatasetBundle& dataset() const { return *data_.dataset; }
  bool has_model() const { return !data_.checkpoints.empty(); }
  const ClassifierModel& model() const;
  const Layout2D& layout() const { return data_.layout; }
  const Layout2D& base_layout() const { return data_.base_layout; }
  const std::vector<HistoryEntry>& history() const { return data_.history; }
  std::size_t cursor() const { return data_.cursor; }
  const MetricsReport& metrics() const { return data_.metrics; }
  std::uint64_t version() const { return version_; }

  /// Softmax outputs of the current checkpoint for every item.
  const MatrixF& probs() const { return probs_; }
  const std::vector<int>& predictions() const { return predictions_; }
  double test_accuracy() const;

  /// Layout at the most recent retrain boundary at or before the cursor.
  const Layout2D& boundary_layout() const;
  std::vector<EditTransaction> pending_edits() const;

  /// CE-only training from a freshly initialised model. Resets history.
  TrainingTrace pretrain(const PretrainOptions& options);

  /// Returns false (and records nothing) for an empty move list.
  bool apply_edits(EditTransaction tx);
  bool undo();
  bool redo();
  void restore(std::size_t history_index);
  /// Back to the base layout with history cleared.
  void reset();
  void set_class_visible(int class_id, bool visible);

  RetrainPlan plan_retrain(const RetrainConfig& config) const;
  static RetrainResult execute_retrain(const RetrainPlan& plan, const ProgressFn& on_epoch = {},
                                       const StepObserver& on_step = {},
                                       const std::atomic<bool>* cancel = nullptr);
  void commit_retrain(RetrainResult result);
  /// plan + execute + commit. On failure the session is unchanged.
  RetrainResult retrain(const RetrainConfig& config, const ProgressFn& on_epoch = {});

 private:
  void sync_to_cursor();
  void refresh_predictions();
  void touch() { ++version_; }
  void check_model() const;

  SessionData data_;
  MatrixF probs_;
  std::vector<int> predictions_;
  std::uint64_t version_ = 0;
};

/// Isomap of the model's latents for every item, tagged with `checkpoint`.
Layout2D project_latents(const ClassifierModel& model, const DatasetBundle& data,
                         std::size_t k_graph, int checkpoint);

/// Replays history entries [0, upto) from the base layout: edits overwrite
/// positions, retrain entries substitute their recorded layout.
Layout2D replay_layout(const Layout2D& base, const std::vector<HistoryEntry>& history,
                       std::size_t upto);

std::int64_t now_millis();

}  // namespace spacedit
