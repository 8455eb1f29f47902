#include "spacedit/objective.hpp"

#include "spacedit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace spacedit {

std::string_view to_string(AnchorMode mode) {
  return mode == AnchorMode::live ? "live" : "frozen";
}

AnchorMode anchor_mode_from_string(std::string_view name) {
  if (name == "live") return AnchorMode::live;
  if (name == "frozen") return AnchorMode::frozen;
  throw Error(ErrorCode::parse, "unknown anchor mode '" + std::string(name) + "'");
}

std::vector<std::size_t> EditFeedback::moved_ids() const {
  std::vector<std::size_t> ids;
  for (const auto& r : refs) ids.push_back(r.moved_id);
  return ids;
}

std::vector<std::size_t> EditFeedback::involved_ids() const {
  std::vector<std::size_t> ids;
  for (const auto& r : refs) {
    ids.push_back(r.moved_id);
    ids.insert(ids.end(), r.positive_ids.begin(), r.positive_ids.end());
    ids.insert(ids.end(), r.negative_ids.begin(), r.negative_ids.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

template <typename T>
Matrix<T> gather_rows(const Matrix<T>& source, std::span<const std::size_t> ids) {
  Matrix<T> out(static_cast<Eigen::Index>(ids.size()), source.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= static_cast<std::size_t>(source.rows())) {
      throw Error(ErrorCode::input, "item id " + std::to_string(ids[i]) + " outside the dataset");
    }
    out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(ids[i]));
  }
  return out;
}

/// Forward pass over every item the feedback touches.
template <typename T>
struct FeedbackPass {
  std::vector<std::size_t> ids;
  BasicForwardPass<T> fp;
  LatentTable table;
  FeedbackTargets targets;
  std::vector<Eigen::Index> moved_rows;  // row in fp for targets.moved_ids[i]
  Eigen::MatrixXd moved_latents;
};

template <typename T>
FeedbackPass<T> run_feedback_pass(const BasicClassifier<T>& model, const Matrix<T>& all_features,
                                  const EditFeedback& feedback) {
  FeedbackPass<T> pass;
  pass.ids = feedback.involved_ids();
  pass.fp = forward(model, gather_rows(all_features, pass.ids));
  pass.table.ids = pass.ids;
  pass.table.rows = pass.fp.latents().template cast<double>();
  pass.targets = feedback.mode == AnchorMode::live
                     ? compute_targets(feedback.refs, pass.table, feedback.delta, feedback.weighting)
                     : feedback.frozen;
  pass.moved_latents.resize(static_cast<Eigen::Index>(pass.targets.count()), pass.table.rows.cols());
  for (std::size_t i = 0; i < pass.targets.count(); ++i) {
    const auto row = pass.table.row_of(pass.targets.moved_ids[i]);
    pass.moved_rows.push_back(row);
    pass.moved_latents.row(static_cast<Eigen::Index>(i)) = pass.table.rows.row(row);
  }
  return pass;
}

}  // namespace

template <typename T>
ObjectiveResult<T> evaluate_objective(const BasicClassifier<T>& model, const Matrix<T>& batch_inputs,
                                      std::span<const int> batch_labels,
                                      const Matrix<T>& all_features, const EditFeedback& feedback,
                                      const ObjectiveWeights& weights) {
  const auto fp = forward(model, batch_inputs);
  const auto ce = cross_entropy(fp.probs, batch_labels);
  const Matrix<T> grad_logits = ce.grad_logits * static_cast<T>(weights.w_cls);
  ObjectiveResult<T> result;
  result.grads = backward(model, fp, grad_logits, Matrix<T>());

  double loss_dis = 0.0;
  if (!feedback.empty()) {
    const auto pass = run_feedback_pass(model, all_features, feedback);
    const auto dl = distance_loss(pass.moved_latents, pass.targets);
    loss_dis = dl.loss;
    if (weights.w_dis > 0.0 && dl.loss > 0.0) {
      Matrix<T> grad_latents = Matrix<T>::Zero(pass.fp.latents().rows(), pass.fp.latents().cols());
      for (std::size_t i = 0; i < pass.moved_rows.size(); ++i) {
        grad_latents.row(pass.moved_rows[i]) +=
            (weights.w_dis * dl.grads.row(static_cast<Eigen::Index>(i))).template cast<T>();
      }
      const Matrix<T> no_logit_grad = Matrix<T>::Zero(pass.fp.logits.rows(), pass.fp.logits.cols());
      result.grads += backward(model, pass.fp, no_logit_grad, grad_latents);
    }
  }
  result.loss = total_loss(ce.loss, loss_dis, weights.w_cls, weights.w_dis);
  return result;
}

template <typename T>
DistanceLoss evaluate_distance_loss(const BasicClassifier<T>& model, const Matrix<T>& all_features,
                                    const EditFeedback& feedback) {
  if (feedback.empty()) return {};
  const auto pass = run_feedback_pass(model, all_features, feedback);
  return distance_loss(pass.moved_latents, pass.targets);
}

template <typename T>
EditFeedback freeze_anchors(const BasicClassifier<T>& model, const Matrix<T>& all_features,
                            const EditFeedback& feedback) {
  EditFeedback frozen = feedback;
  if (feedback.mode == AnchorMode::frozen || feedback.empty()) {
    frozen.mode = AnchorMode::frozen;
    return frozen;
  }
  const auto pass = run_feedback_pass(model, all_features, feedback);
  frozen.frozen = pass.targets;
  frozen.mode = AnchorMode::frozen;
  return frozen;
}

namespace {

// Activation pattern of every ReLU plus the hinge state of every moved item;
// a finite-difference probe is only valid if this does not change.
std::vector<bool> kink_signature(const BasicClassifier<double>& model, const MatrixD& batch,
                                 const MatrixD& features, const EditFeedback& frozen) {
  std::vector<bool> sig;
  auto add_masks = [&](const BasicForwardPass<double>& fp) {
    for (const auto& h : fp.hidden) {
      for (Eigen::Index k = 0; k < h.size(); ++k) sig.push_back(h.data()[k] > 0.0);
    }
  };
  add_masks(forward(model, batch));
  if (!frozen.empty()) {
    const auto pass = run_feedback_pass(model, features, frozen);
    add_masks(pass.fp);
    for (double a : distance_loss(pass.moved_latents, pass.targets).hinge_args) sig.push_back(a > 0.0);
  }
  return sig;
}

}  // namespace

GradientCheckReport gradient_check(const ClassifierModel& model, const MatrixF& batch_inputs,
                                   std::span<const int> batch_labels, const MatrixF& all_features,
                                   const EditFeedback& feedback, const ObjectiveWeights& weights,
                                   std::uint64_t seed, std::size_t min_coordinates) {
  if (batch_inputs.rows() == 0) throw Error(ErrorCode::input, "gradient check needs a non-empty batch");
  GradientCheckReport report;
  const auto md = model.cast<double>();
  const MatrixD batch = batch_inputs.cast<double>();
  const MatrixD features = all_features.cast<double>();

  EditFeedback frozen = freeze_anchors(md, features, feedback);
  if (!frozen.empty()) {
    const auto pass = run_feedback_pass(md, features, frozen);
    const auto dl = distance_loss(pass.moved_latents, pass.targets);
    EditFeedback kept = frozen;
    kept.refs.clear();
    kept.frozen = FeedbackTargets{};
    kept.frozen.delta = frozen.delta;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < dl.hinge_args.size(); ++i) {
      if (std::abs(dl.hinge_args[i]) < 1e-3) {
        ++report.items_excluded;
        continue;
      }
      rows.push_back(static_cast<Eigen::Index>(i));
      kept.frozen.moved_ids.push_back(frozen.frozen.moved_ids[i]);
      auto it = std::find_if(frozen.refs.begin(), frozen.refs.end(), [&](const TripletRefSet& r) {
        return r.moved_id == frozen.frozen.moved_ids[i];
      });
      kept.refs.push_back(*it);
    }
    kept.frozen.anchor_p = frozen.frozen.anchor_p(rows, Eigen::all);
    kept.frozen.anchor_n = frozen.frozen.anchor_n(rows, Eigen::all);
    frozen = std::move(kept);
  }

  const auto analytic = evaluate_objective(md, batch, batch_labels, features, frozen, weights).grads;
  const auto base_signature = kink_signature(md, batch, features, frozen);

  const std::size_t total = md.parameter_count();
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto loss_at = [&](const BasicClassifier<double>& m) {
    return evaluate_objective(m, batch, batch_labels, features, frozen, weights).loss.total;
  };

  const std::size_t wanted = std::min(total, std::max<std::size_t>(min_coordinates, 1));
  for (std::size_t idx : order) {
    if (report.coordinates_checked >= wanted) break;
    auto plus = md;
    auto minus = md;
    const double theta = plus.parameter(idx);
    const double h = 1e-5 * std::max(1.0, std::abs(theta));
    plus.parameter(idx) = theta + h;
    minus.parameter(idx) = theta - h;
    if (kink_signature(plus, batch, features, frozen) != base_signature ||
        kink_signature(minus, batch, features, frozen) != base_signature) {
      ++report.coordinates_skipped;
      continue;
    }
    const double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
    const double exact = analytic.at(idx);
    const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-6});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(numeric - exact) / scale);
    ++report.coordinates_checked;
  }
  return report;
}

#define SPACEDIT_INSTANTIATE(T)                                                                   \
  template ObjectiveResult<T> evaluate_objective<T>(const BasicClassifier<T>&, const Matrix<T>&, \
                                                    std::span<const int>, const Matrix<T>&,      \
                                                    const EditFeedback&, const ObjectiveWeights&); \
  template DistanceLoss evaluate_distance_loss<T>(const BasicClassifier<T>&, const Matrix<T>&,   \
                                                  const EditFeedback&);                           \
  template EditFeedback freeze_anchors<T>(const BasicClassifier<T>&, const Matrix<T>&,           \
                                          const EditFeedback&);

SPACEDIT_INSTANTIATE(float)
SPACEDIT_INSTANTIATE(double)

#undef SPACEDIT_INSTANTIATE

}  // namespace spacedit
