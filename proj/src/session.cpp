#include "spacedit/session.hpp"

#include "spacedit/error.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace spacedit {

std::int64_t now_millis() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void RetrainConfig::validate() const {
  if (epochs == 0) throw Error(ErrorCode::configuration, "epochs must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::configuration, "learning rate must be positive");
  if (batch_size == 0) throw Error(ErrorCode::configuration, "batch size must be positive");
  if (k == 0) throw Error(ErrorCode::configuration, "k must be positive");
  if (!(delta >= 0.0)) throw Error(ErrorCode::configuration, "delta must be non-negative");
  if (!(w_cls >= 0.0) || !(w_dis >= 0.0)) {
    throw Error(ErrorCode::configuration, "loss weights must be non-negative");
  }
}

Layout2D project_latents(const ClassifierModel& model, const DatasetBundle& data,
                         std::size_t k_graph, int checkpoint) {
  const auto fp = forward(model, data.features);
  const Eigen::MatrixXd latents = fp.latents().cast<double>();
  const auto k = std::min(k_graph, data.size() - 1);
  auto layout = isomap(latents, k);
  layout.epoch = checkpoint;
  return layout;
}

Layout2D replay_layout(const Layout2D& base, const std::vector<HistoryEntry>& history,
                       std::size_t upto) {
  Layout2D layout = base;
  for (std::size_t i = 0; i < upto && i < history.size(); ++i) {
    const auto& e = history[i];
    if (e.kind == HistoryEntry::Kind::retrain) {
      layout = e.layout;
    } else {
      for (const auto& m : e.transaction.moves) layout.points.at(m.item_id) = m.new_pos;
    }
  }
  return layout;
}

Session Session::create(DatasetBundle dataset, ModelConfig model_config, std::size_t k_graph) {
  dataset.validate();
  model_config.input_dim = dataset.input_dim();
  model_config.num_classes = dataset.num_classes();
  model_config.validate();
  if (k_graph == 0) throw Error(ErrorCode::configuration, "k_graph must be positive");
  SessionData data;
  data.class_visible.assign(dataset.num_classes(), true);
  data.dataset = std::make_shared<const DatasetBundle>(std::move(dataset));
  data.model_config = std::move(model_config);
  data.k_graph = k_graph;
  return Session(std::move(data));
}

Session::Session(SessionData data) : data_(std::move(data)) {
  if (!data_.dataset) throw Error(ErrorCode::precondition, "session needs a dataset");
  if (data_.class_visible.size() != data_.dataset->num_classes()) {
    data_.class_visible.assign(data_.dataset->num_classes(), true);
  }
  if (has_model()) {
    if (data_.current_checkpoint >= data_.checkpoints.size() ||
        data_.base_checkpoint >= data_.checkpoints.size()) {
      throw Error(ErrorCode::schema, "checkpoint index out of range");
    }
    if (data_.cursor > data_.history.size()) throw Error(ErrorCode::schema, "history cursor out of range");
    if (data_.layout.size() != data_.dataset->size() || data_.base_layout.size() != data_.dataset->size()) {
      throw Error(ErrorCode::schema, "layout does not cover every item");
    }
    refresh_predictions();
  }
}

void Session::check_model() const {
  if (!has_model()) throw Error(ErrorCode::precondition, "session has no model yet; run pretrain first");
}

const ClassifierModel& Session::model() const {
  check_model();
  return data_.checkpoints[data_.current_checkpoint];
}

void Session::refresh_predictions() {
  probs_ = forward(model(), dataset().features).probs;
  predictions_ = argmax_rows(probs_);
}

double Session::test_accuracy() const {
  check_model();
  const auto ids = dataset().ids_in(Split::test);
  if (ids.empty()) return 0.0;
  std::vector<int> pred;
  for (auto id : ids) pred.push_back(predictions_[id]);
  return accuracy(pred, dataset().labels_of(ids));
}

const Layout2D& Session::boundary_layout() const {
  for (std::size_t i = data_.cursor; i-- > 0;) {
    if (data_.history[i].kind == HistoryEntry::Kind::retrain) return data_.history[i].layout;
  }
  return data_.base_layout;
}

std::vector<EditTransaction> Session::pending_edits() const {
  std::vector<EditTransaction> out;
  for (std::size_t i = data_.cursor; i-- > 0;) {
    const auto& e = data_.history[i];
    if (e.kind == HistoryEntry::Kind::retrain) break;
    out.push_back(e.transaction);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

MetricsReport evaluate_test(const ClassifierModel& model, const DatasetBundle& data) {
  MetricsReport report;
  report.split = Split::test;
  const auto ids = data.ids_in(Split::test);
  if (ids.empty()) return report;
  const auto probs = forward(model, data.features_of(ids)).probs;
  const auto labels = data.labels_of(ids);
  report.accuracy_before = accuracy(argmax_rows(probs), labels);
  try {
    auto roc = roc_curve(probs, labels);
    report.roc_points = std::move(roc.points);
    report.auc = roc.auc;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate) throw;
  }
  return report;
}

}  // namespace

TrainingTrace Session::pretrain(const PretrainOptions& options) {
  auto config = data_.model_config;
  config.seed = options.seed;
  auto model = init_model(config);

  TrainOptions train;
  train.epochs = options.epochs;
  train.learning_rate = options.learning_rate;
  train.batch_size = options.batch_size;
  train.seed = options.seed;
  train.weights = {1.0, 0.0};
  auto trace = train_model(model, dataset(), EditFeedback{}, train);

  const auto id = data_.checkpoints.size();
  auto layout = project_latents(model, dataset(), data_.k_graph, static_cast<int>(id));
  auto metrics = evaluate_test(model, dataset());
  metrics.micro_f1_per_epoch = trace.val_micro_f1;

  data_.model_config = config;
  data_.checkpoints.push_back(std::move(model));
  data_.base_checkpoint = data_.current_checkpoint = id;
  data_.base_layout = layout;
  data_.layout = std::move(layout);
  data_.history.clear();
  data_.cursor = 0;
  data_.metrics = std::move(metrics);
  data_.warnings.clear();
  refresh_predictions();
  touch();
  return trace;
}

bool Session::apply_edits(EditTransaction tx) {
  check_model();
  if (tx.moves.empty()) return false;
  tx.validate();
  const auto n = dataset().size();
  for (const auto& m : tx.moves) {
    if (m.item_id >= n) throw Error(ErrorCode::input, "unknown item id " + std::to_string(m.item_id));
    if (dataset().splits[m.item_id] == Split::test) {
      throw Error(ErrorCode::rejected, "item " + std::to_string(m.item_id) +
                                           " belongs to the test split; test items cannot be moved");
    }
  }
  for (auto& m : tx.moves) m.old_pos = data_.layout.points[m.item_id];
  if (tx.created_at == 0) tx.created_at = now_millis();

  data_.history.resize(data_.cursor);
  for (const auto& m : tx.moves) data_.layout.points[m.item_id] = m.new_pos;
  HistoryEntry entry;
  entry.kind = HistoryEntry::Kind::edit;
  entry.label = tx.moves.size() == 1 ? "move item " + std::to_string(tx.moves.front().item_id)
                                     : "move " + std::to_string(tx.moves.size()) + " items";
  entry.timestamp = tx.created_at;
  entry.transaction = std::move(tx);
  entry.layout = data_.layout;
  entry.checkpoint = data_.current_checkpoint;
  data_.history.push_back(std::move(entry));
  data_.cursor = data_.history.size();
  touch();
  return true;
}

void Session::sync_to_cursor() {
  const bool at_base = data_.cursor == 0;
  data_.layout = at_base ? data_.base_layout : data_.history[data_.cursor - 1].layout;
  const auto ckpt = at_base ? data_.base_checkpoint : data_.history[data_.cursor - 1].checkpoint;
  if (ckpt != data_.current_checkpoint) {
    data_.current_checkpoint = ckpt;
    refresh_predictions();
  }
  touch();
}

bool Session::undo() {
  check_model();
  if (data_.cursor == 0) return false;
  --data_.cursor;
  sync_to_cursor();
  return true;
}

bool Session::redo() {
  check_model();
  if (data_.cursor == data_.history.size()) return false;
  ++data_.cursor;
  sync_to_cursor();
  return true;
}

void Session::restore(std::size_t history_index) {
  check_model();
  if (history_index > data_.history.size()) {
    throw Error(ErrorCode::input, "history index " + std::to_string(history_index) + " out of range (0.." +
                                      std::to_string(data_.history.size()) + ")");
  }
  data_.cursor = history_index;
  sync_to_cursor();
}

void Session::reset() {
  check_model();
  data_.cursor = 0;
  data_.history.clear();
  data_.warnings.clear();
  sync_to_cursor();
}

void Session::set_class_visible(int class_id, bool visible) {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= data_.class_visible.size()) {
    throw Error(ErrorCode::input, "unknown class " + std::to_string(class_id));
  }
  data_.class_visible[class_id] = visible;
  touch();
}

RetrainPlan Session::plan_retrain(const RetrainConfig& config) const {
  check_model();
  config.validate();
  const auto pending = pending_edits();
  if (pending.empty() && !config.allow_empty) {
    throw Error(ErrorCode::rejected, "no pending edits to retrain on");
  }

  std::set<std::size_t> moved_set;
  for (const auto& tx : pending) {
    for (const auto& m : tx.moves) moved_set.insert(m.item_id);
  }
  const std::vector<std::size_t> moved(moved_set.begin(), moved_set.end());

  RetrainPlan plan;
  plan.config = config;
  plan.dataset = data_.dataset;
  plan.start_model = model();
  plan.previous_layout = data_.layout;
  plan.k_graph = data_.k_graph;
  plan.next_checkpoint = data_.checkpoints.size();
  plan.session_version = version_;

  if (!moved.empty()) {
    std::vector<bool> eligible(dataset().size());
    for (std::size_t i = 0; i < eligible.size(); ++i) eligible[i] = dataset().splits[i] != Split::test;
    auto selection = select_references(boundary_layout(), data_.layout, dataset().labels, moved,
                                       config.k, eligible);
    plan.warnings = std::move(selection.warnings);
    for (auto& set : selection.sets) {
      if (set.usable()) plan.feedback.refs.push_back(std::move(set));
    }
    if (plan.feedback.refs.empty()) {
      throw Error(ErrorCode::rejected, "none of the moved items has both same-label and "
                                       "different-label reference candidates");
    }
  }
  plan.feedback.delta = config.delta;
  plan.feedback.mode = config.anchor_mode;
  plan.feedback.weighting = config.weighting;
  if (config.anchor_mode == AnchorMode::frozen) {
    plan.feedback.mode = AnchorMode::live;
    plan.feedback = freeze_anchors(plan.start_model, dataset().features, plan.feedback);
  }
  return plan;
}

RetrainResult Session::execute_retrain(const RetrainPlan& plan, const ProgressFn& on_epoch,
                                       const StepObserver& on_step, const std::atomic<bool>* cancel) {
  const auto& data = *plan.dataset;
  RetrainResult result;
  result.config = plan.config;
  result.session_version = plan.session_version;
  result.warnings = plan.warnings;
  result.model = plan.start_model;

  TrainOptions options;
  options.epochs = plan.config.epochs;
  options.learning_rate = plan.config.learning_rate;
  options.batch_size = plan.config.batch_size;
  options.seed = plan.config.seed;
  options.weights = {plan.config.w_cls, plan.config.w_dis};
  result.trace = train_model(result.model, data, plan.feedback, options, on_epoch, on_step, cancel);

  auto fresh = project_latents(result.model, data, plan.k_graph, static_cast<int>(plan.next_checkpoint));
  result.layout = procrustes_align(plan.previous_layout, fresh, false).aligned;
  result.layout.method = fresh.method;
  result.layout.epoch = fresh.epoch;

  const auto before = evaluate_test(plan.start_model, data);
  result.metrics = evaluate_test(result.model, data);
  result.metrics.accuracy_after = result.metrics.accuracy_before;
  result.metrics.accuracy_before = before.accuracy_before;
  result.metrics.micro_f1_per_epoch = result.trace.val_micro_f1;
  return result;
}

void Session::commit_retrain(RetrainResult result) {
  if (result.session_version != version_) {
    throw Error(ErrorCode::busy, "session changed while the retrain job was running");
  }
  const auto id = data_.checkpoints.size();
  data_.checkpoints.push_back(std::move(result.model));
  data_.current_checkpoint = id;
  data_.layout = result.layout;
  data_.metrics = result.metrics;
  data_.warnings = result.warnings;

  data_.history.resize(data_.cursor);
  HistoryEntry entry;
  entry.kind = HistoryEntry::Kind::retrain;
  entry.retrain = result.config;
  entry.transaction.source = EditSource::replay;
  entry.layout = data_.layout;
  entry.checkpoint = id;
  entry.label = "retrain " + std::to_string(result.config.epochs) + " epochs";
  entry.timestamp = now_millis();
  data_.history.push_back(std::move(entry));
  data_.cursor = data_.history.size();
  refresh_predictions();
  touch();
}

RetrainResult Session::retrain(const RetrainConfig& config, const ProgressFn& on_epoch) {
  auto plan = plan_retrain(config);
  auto result = execute_retrain(plan, on_epoch);
  commit_retrain(result);
  return result;
}

}  // namespace spacedit
