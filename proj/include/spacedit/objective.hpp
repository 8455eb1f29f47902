#pragma once

// Composite retraining objective: w_cls * cross-entropy over a batch plus
// w_dis * distance loss over every moved item, with gradients for all
// parameters. Also hosts the finite-difference gradient check.

#include "spacedit/feedback.hpp"
#include "spacedit/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace spacedit {

/// live: anchors are recomputed from the current network every step (no
/// gradient through them). frozen: anchors computed once at edit time.
enum class AnchorMode { live, frozen };

std::string_view to_string(AnchorMode mode);
AnchorMode anchor_mode_from_string(std::string_view name);

/// Reference index sets are fixed when retraining starts.
struct EditFeedback {
  std::vector<TripletRefSet> refs;  // usable sets only
  double delta = kDefaultMargin;
  AnchorMode mode = AnchorMode::live;
  AnchorWeighting weighting = AnchorWeighting::normalized;
  FeedbackTargets frozen;  // used when mode == frozen

  bool empty() const { return refs.empty(); }
  std::vector<std::size_t> moved_ids() const;
  /// Sorted union of moved and reference ids.
  std::vector<std::size_t> involved_ids() const;
};

struct ObjectiveWeights {
  double w_cls = 1.0;
  double w_dis = 0.1;
};

template <typename T>
struct ObjectiveResult {
  LossBreakdown loss;
  BasicGradients<T> grads;
};

/// `all_features` holds every dataset item (row = id); moved and reference
/// items are looked up there.
template <typename T>
ObjectiveResult<T> evaluate_objective(const BasicClassifier<T>& model, const Matrix<T>& batch_inputs,
                                      std::span<const int> batch_labels,
                                      const Matrix<T>& all_features, const EditFeedback& feedback,
                                      const ObjectiveWeights& weights);

/// Distance loss of all moved items under the current network, anchors per
/// `feedback.mode`.
template <typename T>
DistanceLoss evaluate_distance_loss(const BasicClassifier<T>& model, const Matrix<T>& all_features,
                                    const EditFeedback& feedback);

/// Anchors evaluated now and frozen; this is the stop-gradient view of the
/// live objective at the current parameters.
template <typename T>
EditFeedback freeze_anchors(const BasicClassifier<T>& model, const Matrix<T>& all_features,
                            const EditFeedback& feedback);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_skipped = 0;  // perturbation crossed a ReLU or hinge kink
  std::size_t items_excluded = 0;       // moved items with |hinge argument| < 1e-3
};

/// Compares analytic gradients of the total loss with central differences in
/// double precision over a seeded sample of at least `min_coordinates`
/// parameters.
GradientCheckReport gradient_check(const ClassifierModel& model, const MatrixF& batch_inputs,
                                   std::span<const int> batch_labels, const MatrixF& all_features,
                                   const EditFeedback& feedback, const ObjectiveWeights& weights,
                                   std::uint64_t seed = 0, std::size_t min_coordinates = 100);

}  // namespace spacedit
