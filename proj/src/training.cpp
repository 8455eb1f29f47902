#include "spacedit/training.hpp"

#include "spacedit/error.hpp"
#include "spacedit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spacedit {

double validation_micro_f1(const ClassifierModel& model, const DatasetBundle& data) {
  auto ids = data.ids_in(Split::validation);
  if (ids.empty()) ids = data.ids_in(Split::train);
  const auto fp = forward(model, data.features_of(ids));
  return micro_f1(argmax_rows(fp.probs), data.labels_of(ids));
}

TrainingTrace train_model(ClassifierModel& model, const DatasetBundle& data,
                          const EditFeedback& feedback, const TrainOptions& options,
                          const ProgressFn& on_epoch, const StepObserver& on_step,
                          const std::atomic<bool>* cancel) {
  auto train_ids = data.ids_in(Split::train);
  if (train_ids.empty()) throw Error(ErrorCode::precondition, "train split is empty");
  if (options.batch_size == 0) throw Error(ErrorCode::configuration, "batch size must be positive");
  const std::size_t batch_size = std::min(options.batch_size, train_ids.size());

  TrainingTrace trace;
  trace.val_micro_f1.push_back(validation_micro_f1(model, data));
  trace.loss_dis.push_back(evaluate_distance_loss(model, data.features, feedback).loss);

  auto optimizer = AdamState::create(model, options.learning_rate);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    if (cancel && cancel->load()) throw Error(ErrorCode::rejected, "training cancelled");
    order = train_ids;
    std::shuffle(order.begin(), order.end(), rng);
    double cls_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + std::min(start + batch_size, order.size()));
      const auto labels = data.labels_of(batch);
      const auto result = evaluate_objective(model, data.features_of(batch), labels, data.features,
                                             feedback, options.weights);
      if (!std::isfinite(result.loss.total)) {
        throw Error(ErrorCode::optimization,
                    "training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
      }
      try {
        adam_step(model, result.grads, optimizer);
      } catch (const Error& e) {
        throw Error(e.code(), "epoch " + std::to_string(epoch) + ": " + e.what());
      }
      ++step;
      if (on_step) on_step(step, model);
      cls_sum += result.loss.loss_cls;
      ++batches;
    }
    EpochProgress progress;
    progress.epoch = epoch;
    progress.val_micro_f1 = validation_micro_f1(model, data);
    progress.loss_dis = evaluate_distance_loss(model, data.features, feedback).loss;
    progress.mean_loss_cls = cls_sum / static_cast<double>(batches);
    if (!std::isfinite(progress.loss_dis)) {
      throw Error(ErrorCode::optimization,
                  "training diverged at epoch " + std::to_string(epoch) + " (non-finite distance loss)");
    }
    trace.val_micro_f1.push_back(progress.val_micro_f1);
    trace.loss_dis.push_back(progress.loss_dis);
    trace.mean_loss_cls.push_back(progress.mean_loss_cls);
    if (on_epoch) on_epoch(progress);
  }
  return trace;
}

}  // namespace spacedit
