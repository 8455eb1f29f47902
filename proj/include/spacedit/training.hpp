#pragma once

#include "spacedit/dataset.hpp"
#include "spacedit/objective.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace spacedit {

inline constexpr double kDefaultLearningRate = 1e-3;
inline constexpr std::size_t kDefaultBatchSize = 128;

struct TrainOptions {
  std::size_t epochs = 10;
  double learning_rate = kDefaultLearningRate;
  std::size_t batch_size = kDefaultBatchSize;  // clamped to the train split size
  std::uint64_t seed = 0;                      // batch shuffling
  ObjectiveWeights weights{1.0, 0.0};
};

struct EpochProgress {
  std::size_t epoch = 0;  // 1-based
  double val_micro_f1 = 0.0;
  double loss_dis = 0.0;
  double mean_loss_cls = 0.0;
};

/// Index 0 of each series is measured before the first update.
struct TrainingTrace {
  std::vector<double> val_micro_f1;
  std::vector<double> loss_dis;
  std::vector<double> mean_loss_cls;  // per completed epoch
};

using ProgressFn = std::function<void(const EpochProgress&)>;
using StepObserver = std::function<void(std::size_t step, const ClassifierModel&)>;

/// Minibatch Adam over the train split. Every step uses w_cls * CE on the batch
/// plus w_dis * distance loss over all moved items in `feedback`.
TrainingTrace train_model(ClassifierModel& model, const DatasetBundle& data,
                          const EditFeedback& feedback, const TrainOptions& options,
                          const ProgressFn& on_epoch = {}, const StepObserver& on_step = {},
                          const std::atomic<bool>* cancel = nullptr);

/// Validation micro-F1 (train split if validation is empty).
double validation_micro_f1(const ClassifierModel& model, const DatasetBundle& data);

}  // namespace spacedit
