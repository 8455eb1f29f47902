#include "spacedit/oracle.hpp"

#include "spacedit/error.hpp"
#include "spacedit/metrics.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace spacedit {

std::string_view to_string(OraclePolicy policy) {
  switch (policy) {
    case OraclePolicy::to_true_centroid: return "to_true_centroid";
    case OraclePolicy::separate_mixed: return "separate_mixed";
    case OraclePolicy::aggregate_within_class: return "aggregate_within_class";
  }
  return "to_true_centroid";
}

OraclePolicy oracle_policy_from_string(std::string_view name) {
  if (name == "to_true_centroid") return OraclePolicy::to_true_centroid;
  if (name == "separate_mixed") return OraclePolicy::separate_mixed;
  if (name == "aggregate_within_class") return OraclePolicy::aggregate_within_class;
  throw Error(ErrorCode::parse, "unknown oracle policy '" + std::string(name) + "'");
}

namespace {

bool editable(const DatasetBundle& data, std::size_t id) { return data.splits[id] != Split::test; }

void add_move(EditTransaction& tx, const Layout2D& layout, std::size_t id, Point2 target) {
  tx.moves.push_back({id, layout.points[id], target});
}

}  // namespace

EditTransaction oracle_edit(const Session& session, OraclePolicy policy, const OracleOptions& options) {
  const auto& data = session.dataset();
  const auto& layout = session.layout();
  const auto& predicted = session.predictions();
  const auto guides = guide_geometry(layout, data.labels, data.num_classes());

  EditTransaction tx;
  tx.source = EditSource::oracle;
  tx.created_at = 0;

  switch (policy) {
    case OraclePolicy::to_true_centroid: {
      std::mt19937_64 rng(options.seed);
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      for (std::size_t id = 0; id < data.size(); ++id) {
        if (!editable(data, id) || predicted[id] == data.labels[id]) continue;
        const auto& g = guides[data.labels[id]];
        const double r = options.jitter * g.radius;
        const double a = angle(rng);
        add_move(tx, layout, id, {g.centroid.x + r * std::cos(a), g.centroid.y + r * std::sin(a)});
      }
      break;
    }
    case OraclePolicy::separate_mixed: {
      const auto classes = data.num_classes();
      std::vector<std::size_t> confusion(classes * classes, 0);
      for (std::size_t id = 0; id < data.size(); ++id) {
        if (!editable(data, id) || predicted[id] == data.labels[id]) continue;
        const auto a = static_cast<std::size_t>(data.labels[id]);
        const auto b = static_cast<std::size_t>(predicted[id]);
        ++confusion[std::min(a, b) * classes + std::max(a, b)];
      }
      std::size_t best = 0, best_a = 0, best_b = 0;
      for (std::size_t a = 0; a < classes; ++a) {
        for (std::size_t b = a + 1; b < classes; ++b) {
          if (confusion[a * classes + b] > best) {
            best = confusion[a * classes + b];
            best_a = a;
            best_b = b;
          }
        }
      }
      if (best == 0) break;
      const Point2 ca = guides[best_a].centroid;
      const Point2 cb = guides[best_b].centroid;
      const double dx = cb.x - ca.x;
      const double dy = cb.y - ca.y;
      // Each class shifts a quarter of the centroid gap away from the other.
      for (std::size_t id = 0; id < data.size(); ++id) {
        if (!editable(data, id)) continue;
        const auto c = static_cast<std::size_t>(data.labels[id]);
        if (c != best_a && c != best_b) continue;
        const double s = c == best_a ? -0.25 : 0.25;
        const auto& p = layout.points[id];
        add_move(tx, layout, id, {p.x + s * dx, p.y + s * dy});
      }
      break;
    }
    case OraclePolicy::aggregate_within_class: {
      for (std::size_t id = 0; id < data.size(); ++id) {
        if (!editable(data, id)) continue;
        const auto& g = guides[data.labels[id]];
        const auto& p = layout.points[id];
        if (std::hypot(p.x - g.centroid.x, p.y - g.centroid.y) <= g.radius) continue;
        add_move(tx, layout, id, {0.5 * (p.x + g.centroid.x), 0.5 * (p.y + g.centroid.y)});
      }
      break;
    }
  }
  return tx;
}

}  // namespace spacedit
