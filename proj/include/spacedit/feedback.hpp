#pragma once

// Translates 2D point moves into latent-space targets and the hinge loss that
// pulls each moved latent toward same-label references (anchor P) and away from
// different-label references (anchor N).

#include "spacedit/embedding.hpp"
#include "spacedit/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spacedit {

enum class EditSource { human, oracle, replay };

std::string_view to_string(EditSource source);
EditSource edit_source_from_string(std::string_view name);

struct EditMove {
  std::size_t item_id = 0;
  Point2 old_pos;
  Point2 new_pos;
  bool operator==(const EditMove&) const = default;
};

struct EditTransaction {
  std::vector<EditMove> moves;
  std::int64_t created_at = 0;  // unix milliseconds
  EditSource source = EditSource::human;

  /// Unique ids, finite positions.
  void validate() const;
  std::vector<std::size_t> item_ids() const;
  bool operator==(const EditTransaction&) const = default;
};

struct TripletRefSet {
  std::size_t moved_id = 0;
  std::vector<std::size_t> positive_ids;  // nearest to the new 2D position
  std::vector<std::size_t> negative_ids;  // nearest to the old 2D position
  std::size_t k = 0;

  bool usable() const { return !positive_ids.empty() && !negative_ids.empty(); }
  bool operator==(const TripletRefSet&) const = default;
};

struct ReferenceSelection {
  std::vector<TripletRefSet> sets;  // one per moved id, input order
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultReferenceCount = 5;
inline constexpr double kDefaultMargin = 1.0;
inline constexpr double kAnchorEpsilon = 1e-8;

/// `candidate_mask`, when non-empty, marks items allowed as references
/// (test items are masked out by the session). Moved items are never
/// candidates. Ties in 2D distance go to the lower id.
ReferenceSelection select_references(const Layout2D& layout_before, const Layout2D& layout_after,
                                     std::span<const int> labels,
                                     std::span<const std::size_t> moved_ids, std::size_t k,
                                     const std::vector<bool>& candidate_mask = {});

enum class AnchorWeighting { normalized, unnormalized };

/// Inverse squared latent distance per reference (plus epsilon); normalized to
/// sum to one unless `weighting` is unnormalized.
Eigen::VectorXd anchor_weights(const Eigen::VectorXd& latent_m, const Eigen::MatrixXd& ref_latents,
                               AnchorWeighting weighting = AnchorWeighting::normalized);

Eigen::VectorXd compute_anchor(const Eigen::VectorXd& latent_m, const Eigen::MatrixXd& ref_latents,
                               AnchorWeighting weighting = AnchorWeighting::normalized);

/// Latent rows keyed by item id (ids sorted ascending).
struct LatentTable {
  std::vector<std::size_t> ids;
  Eigen::MatrixXd rows;

  Eigen::Index row_of(std::size_t id) const;
  Eigen::MatrixXd gather(std::span<const std::size_t> wanted) const;
};

/// Per moved item anchors; row i belongs to `moved_ids[i]`.
struct FeedbackTargets {
  std::vector<std::size_t> moved_ids;
  Eigen::MatrixXd anchor_p;
  Eigen::MatrixXd anchor_n;
  double delta = kDefaultMargin;

  std::size_t count() const { return moved_ids.size(); }
};

/// Builds anchors for every usable reference set from the current latents.
FeedbackTargets compute_targets(std::span<const TripletRefSet> refs, const LatentTable& latents,
                                double delta,
                                AnchorWeighting weighting = AnchorWeighting::normalized);

struct DistanceLoss {
  double loss = 0.0;
  Eigen::MatrixXd grads;            // D x latent_dim
  std::vector<double> hinge_args;   // |m-P|^2 - |m-N|^2 + delta per item
};

/// Sum over moved items of max(|m-P|^2 - |m-N|^2 + delta, 0). Anchors are
/// constants: no gradient reaches reference items.
DistanceLoss distance_loss(const Eigen::MatrixXd& moved_latents, const FeedbackTargets& targets);

LossBreakdown total_loss(double loss_cls, double loss_dis, double w_cls, double w_dis);

// Edit-script JSON lines:
// {"moves":[{"id":int,"old":[x,y],"new":[x,y]}],"source":"human|oracle|replay"}
std::string edit_to_json_line(const EditTransaction& tx);
EditTransaction edit_from_json_line(std::string_view line);
std::vector<EditTransaction> read_edit_script(std::istream& in);

}  // namespace spacedit
