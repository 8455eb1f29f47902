#include "spacedit/feedback.hpp"

#include "spacedit/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <utility>

namespace spacedit {

using nlohmann::json;

std::string_view to_string(EditSource source) {
  switch (source) {
    case EditSource::human: return "human";
    case EditSource::oracle: return "oracle";
    case EditSource::replay: return "replay";
  }
  return "human";
}

EditSource edit_source_from_string(std::string_view name) {
  if (name == "human") return EditSource::human;
  if (name == "oracle") return EditSource::oracle;
  if (name == "replay") return EditSource::replay;
  throw Error(ErrorCode::parse, "unknown edit source '" + std::string(name) + "'");
}

void EditTransaction::validate() const {
  std::set<std::size_t> seen;
  for (const auto& m : moves) {
    if (!seen.insert(m.item_id).second) {
      throw Error(ErrorCode::input, "item " + std::to_string(m.item_id) + " moved twice in one transaction");
    }
    if (!std::isfinite(m.old_pos.x) || !std::isfinite(m.old_pos.y) ||
        !std::isfinite(m.new_pos.x) || !std::isfinite(m.new_pos.y)) {
      throw Error(ErrorCode::input, "non-finite position for item " + std::to_string(m.item_id));
    }
  }
}

std::vector<std::size_t> EditTransaction::item_ids() const {
  std::vector<std::size_t> ids;
  ids.reserve(moves.size());
  for (const auto& m : moves) ids.push_back(m.item_id);
  return ids;
}

namespace {

double squared_distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::vector<std::size_t> nearest(std::vector<std::pair<double, std::size_t>>& candidates,
                                 std::size_t k) {
  const auto take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end());
  std::vector<std::size_t> ids;
  ids.reserve(take);
  for (std::size_t i = 0; i < take; ++i) ids.push_back(candidates[i].second);
  return ids;
}

}  // namespace

ReferenceSelection select_references(const Layout2D& layout_before, const Layout2D& layout_after,
                                     std::span<const int> labels,
                                     std::span<const std::size_t> moved_ids, std::size_t k,
                                     const std::vector<bool>& candidate_mask) {
  const auto n = labels.size();
  if (k == 0) throw Error(ErrorCode::configuration, "k must be at least 1");
  if (layout_before.size() != n || layout_after.size() != n) {
    throw Error(ErrorCode::shape, "layouts must cover every item");
  }
  if (!candidate_mask.empty() && candidate_mask.size() != n) {
    throw Error(ErrorCode::shape, "candidate mask size does not match item count");
  }
  std::vector<bool> moved(n, false);
  for (auto id : moved_ids) {
    if (id >= n) throw Error(ErrorCode::input, "unknown item id " + std::to_string(id));
    moved[id] = true;
  }

  ReferenceSelection out;
  std::vector<std::pair<double, std::size_t>> same, other;
  for (auto m : moved_ids) {
    const Point2 old_pos = layout_before.points[m];
    const Point2 new_pos = layout_after.points[m];
    same.clear();
    other.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (moved[j] || (!candidate_mask.empty() && !candidate_mask[j])) continue;
      const Point2& p = layout_before.points[j];
      if (labels[j] == labels[m]) same.emplace_back(squared_distance(p, new_pos), j);
      else other.emplace_back(squared_distance(p, old_pos), j);
    }
    TripletRefSet set;
    set.moved_id = m;
    set.k = k;
    set.positive_ids = nearest(same, k);
    set.negative_ids = nearest(other, k);
    const auto tag = "item " + std::to_string(m) + ": ";
    if (set.positive_ids.empty() || set.negative_ids.empty()) {
      out.warnings.push_back(tag + "no " + (set.positive_ids.empty() ? "same-label" : "different-label") +
                             " references available; excluded from the distance loss");
    } else {
      if (set.positive_ids.size() < k) {
        out.warnings.push_back(tag + "only " + std::to_string(set.positive_ids.size()) +
                               " same-label references (k=" + std::to_string(k) + ")");
      }
      if (set.negative_ids.size() < k) {
        out.warnings.push_back(tag + "only " + std::to_string(set.negative_ids.size()) +
                               " different-label references (k=" + std::to_string(k) + ")");
      }
    }
    out.sets.push_back(std::move(set));
  }
  return out;
}

Eigen::VectorXd anchor_weights(const Eigen::VectorXd& latent_m, const Eigen::MatrixXd& ref_latents,
                               AnchorWeighting weighting) {
  if (ref_latents.rows() == 0) throw Error(ErrorCode::input, "anchor needs at least one reference");
  if (ref_latents.cols() != latent_m.size()) {
    throw Error(ErrorCode::shape, "reference latent dimension does not match moved latent");
  }
  Eigen::VectorXd w(ref_latents.rows());
  for (Eigen::Index i = 0; i < ref_latents.rows(); ++i) {
    w(i) = 1.0 / ((ref_latents.row(i).transpose() - latent_m).squaredNorm() + kAnchorEpsilon);
  }
  if (weighting == AnchorWeighting::normalized) w /= w.sum();
  return w;
}

Eigen::VectorXd compute_anchor(const Eigen::VectorXd& latent_m, const Eigen::MatrixXd& ref_latents,
                               AnchorWeighting weighting) {
  const Eigen::VectorXd w = anchor_weights(latent_m, ref_latents, weighting);
  return ref_latents.transpose() * w;
}

Eigen::Index LatentTable::row_of(std::size_t id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) {
    throw Error(ErrorCode::input, "no latent for item " + std::to_string(id));
  }
  return static_cast<Eigen::Index>(it - ids.begin());
}

Eigen::MatrixXd LatentTable::gather(std::span<const std::size_t> wanted) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(wanted.size()), rows.cols());
  for (std::size_t i = 0; i < wanted.size(); ++i) out.row(i) = rows.row(row_of(wanted[i]));
  return out;
}

FeedbackTargets compute_targets(std::span<const TripletRefSet> refs, const LatentTable& latents,
                                double delta, AnchorWeighting weighting) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::configuration, "margin must be non-negative");
  FeedbackTargets t;
  t.delta = delta;
  const auto dim = latents.rows.cols();
  std::vector<const TripletRefSet*> usable;
  for (const auto& r : refs) {
    if (r.usable()) usable.push_back(&r);
  }
  t.anchor_p.resize(static_cast<Eigen::Index>(usable.size()), dim);
  t.anchor_n.resize(static_cast<Eigen::Index>(usable.size()), dim);
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const auto& r = *usable[i];
    const Eigen::VectorXd m = latents.rows.row(latents.row_of(r.moved_id)).transpose();
    t.moved_ids.push_back(r.moved_id);
    t.anchor_p.row(i) = compute_anchor(m, latents.gather(r.positive_ids), weighting).transpose();
    t.anchor_n.row(i) = compute_anchor(m, latents.gather(r.negative_ids), weighting).transpose();
  }
  return t;
}

DistanceLoss distance_loss(const Eigen::MatrixXd& moved_latents, const FeedbackTargets& targets) {
  const auto d = static_cast<Eigen::Index>(targets.count());
  if (moved_latents.rows() != d || targets.anchor_p.rows() != d || targets.anchor_n.rows() != d) {
    throw Error(ErrorCode::shape, "moved latents and anchors disagree in count");
  }
  if (d > 0 && (moved_latents.cols() != targets.anchor_p.cols() ||
                moved_latents.cols() != targets.anchor_n.cols())) {
    throw Error(ErrorCode::shape, "moved latents and anchors disagree in dimension");
  }
  DistanceLoss out;
  out.grads = Eigen::MatrixXd::Zero(d, moved_latents.cols());
  out.hinge_args.resize(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::RowVectorXd to_p = moved_latents.row(i) - targets.anchor_p.row(i);
    const Eigen::RowVectorXd to_n = moved_latents.row(i) - targets.anchor_n.row(i);
    const double arg = to_p.squaredNorm() - to_n.squaredNorm() + targets.delta;
    out.hinge_args[i] = arg;
    if (arg > 0.0) {
      out.loss += arg;
      out.grads.row(i) = 2.0 * to_p - 2.0 * to_n;
    }
  }
  return out;
}

LossBreakdown total_loss(double loss_cls, double loss_dis, double w_cls, double w_dis) {
  if (!(w_cls >= 0.0) || !(w_dis >= 0.0)) {
    throw Error(ErrorCode::configuration, "loss weights must be non-negative");
  }
  LossBreakdown b;
  b.loss_cls = loss_cls;
  b.loss_dis = loss_dis;
  b.w_cls = w_cls;
  b.w_dis = w_dis;
  b.total = w_cls * loss_cls + w_dis * loss_dis;
  return b;
}

std::string edit_to_json_line(const EditTransaction& tx) {
  json moves = json::array();
  for (const auto& m : tx.moves) {
    moves.push_back({{"id", m.item_id},
                     {"old", {m.old_pos.x, m.old_pos.y}},
                     {"new", {m.new_pos.x, m.new_pos.y}}});
  }
  json j = {{"moves", std::move(moves)}, {"source", std::string(to_string(tx.source))}};
  return j.dump();
}

namespace {

Point2 parse_point(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::parse, std::string("'") + what + "' must be a [x, y] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

EditTransaction edit_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("invalid edit JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("moves") || !j["moves"].is_array()) {
    throw Error(ErrorCode::parse, "edit line must be an object with a 'moves' array");
  }
  EditTransaction tx;
  tx.source = edit_source_from_string(j.value("source", std::string("human")));
  if (j.contains("created_at") && j["created_at"].is_number_integer()) {
    tx.created_at = j["created_at"].get<std::int64_t>();
  }
  for (const auto& m : j["moves"]) {
    if (!m.is_object() || !m.contains("id") || !m["id"].is_number_integer() || m["id"].get<long long>() < 0) {
      throw Error(ErrorCode::parse, "each move needs a non-negative integer 'id'");
    }
    EditMove move;
    move.item_id = m["id"].get<std::size_t>();
    move.old_pos = m.contains("old") ? parse_point(m["old"], "old") : Point2{};
    if (!m.contains("new")) throw Error(ErrorCode::parse, "move is missing 'new'");
    move.new_pos = parse_point(m["new"], "new");
    tx.moves.push_back(move);
  }
  return tx;
}

std::vector<EditTransaction> read_edit_script(std::istream& in) {
  std::vector<EditTransaction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(edit_from_json_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace spacedit
