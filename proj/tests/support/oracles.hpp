#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Everything here is written the slow, obvious way on purpose.

#include "spacedit/dataset.hpp"
#include "spacedit/embedding.hpp"
#include "spacedit/feedback.hpp"
#include "spacedit/model.hpp"
#include "spacedit/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using spacedit::Layout2D;
using spacedit::Point2;

/// Undirected k-NN edge set by full sort of every row, ties by id.
inline std::set<std::pair<std::size_t, std::size_t>> knn_edges(const Eigen::MatrixXd& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) all.emplace_back((x.row(i) - x.row(j)).squaredNorm(), j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < std::min(k, all.size()); ++r) {
      edges.insert({std::min(i, all[r].second), std::max(i, all[r].second)});
    }
  }
  return edges;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::size_t groups() {
    std::set<std::size_t> roots;
    for (std::size_t i = 0; i < parent.size(); ++i) roots.insert(find(i));
    return roots.size();
  }
};

inline std::size_t component_count(const spacedit::NeighborGraph& g) {
  UnionFind uf(g.node_count());
  for (std::size_t a = 0; a < g.node_count(); ++a) {
    for (const auto& e : g.adjacency[a]) uf.unite(a, e.to);
  }
  return uf.groups();
}

/// Spiral arc length ∫ sqrt(1 + t²) dt from 0 to t.
inline double spiral_arc(double t) { return 0.5 * (t * std::sqrt(1 + t * t) + std::asinh(t)); }

/// One turn of a swiss roll, (t cos t, h, t sin t) for t in [1.5π, 3.5π],
/// sampled uniformly over the sheet's area. Items 0 and 1 sit at mid height
/// just inside the two ends of the roll.
struct SwissRoll {
  static constexpr double t_begin = 1.5 * M_PI;
  static constexpr double t_end = 3.5 * M_PI;
  Eigen::MatrixXd points;
  std::vector<double> t, h;

  SwissRoll(std::size_t n, double height, std::uint64_t seed) : points(n, 3), t(n), h(n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a0 = spiral_arc(t_begin), a1 = spiral_arc(t_end);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < 2) {
        t[i] = i == 0 ? t_begin + 0.5 : t_end - 0.3;
        h[i] = 0.5 * height;
      } else {
        const double target = a0 + u(rng) * (a1 - a0);
        double lo = t_begin, hi = t_end;
        for (int it = 0; it < 100; ++it) {
          const double mid = 0.5 * (lo + hi);
          (spiral_arc(mid) < target ? lo : hi) = mid;
        }
        t[i] = lo;
        h[i] = height * u(rng);
      }
      points.row(i) << t[i] * std::cos(t[i]), h[i], t[i] * std::sin(t[i]);
    }
  }

  double intrinsic(std::size_t a, std::size_t b) const {
    return std::hypot(spiral_arc(t[a]) - spiral_arc(t[b]), h[a] - h[b]);
  }
};

/// Rotation/reflection-only Procrustes RMSE after centring both sets.
inline double procrustes_rmse(const Eigen::MatrixXd& target, const Eigen::MatrixXd& source) {
  const Eigen::MatrixXd a = target.rowwise() - target.colwise().mean();
  const Eigen::MatrixXd b = source.rowwise() - source.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.transpose() * a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd r = svd.matrixU() * svd.matrixV().transpose();
  return std::sqrt((b * r - a).squaredNorm() / static_cast<double>(a.rows()));
}

/// Positives: same label, nearest to the new position. Negatives: other
/// labels, nearest to the old position. Candidates are unmoved and allowed.
inline spacedit::TripletRefSet references(const Layout2D& before, const Layout2D& after,
                                          const std::vector<int>& labels,
                                          const std::vector<std::size_t>& moved, std::size_t m,
                                          std::size_t k, const std::vector<bool>& allowed) {
  auto d2 = [](Point2 a, Point2 b) { return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y); };
  std::vector<std::tuple<double, std::size_t>> pos, neg;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (std::find(moved.begin(), moved.end(), j) != moved.end()) continue;
    if (!allowed.empty() && !allowed[j]) continue;
    if (labels[j] == labels[m]) pos.emplace_back(d2(before.points[j], after.points[m]), j);
    else neg.emplace_back(d2(before.points[j], before.points[m]), j);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  spacedit::TripletRefSet s;
  s.moved_id = m;
  s.k = k;
  for (std::size_t i = 0; i < std::min(k, pos.size()); ++i) s.positive_ids.push_back(std::get<1>(pos[i]));
  for (std::size_t i = 0; i < std::min(k, neg.size()); ++i) s.negative_ids.push_back(std::get<1>(neg[i]));
  return s;
}

/// Σ ŵ_i ref_i with ŵ ∝ 1 / (|m - ref_i|^2 + 1e-8), summed term by term.
inline Eigen::VectorXd weighted_anchor(const Eigen::VectorXd& m, const Eigen::MatrixXd& refs, bool normalise) {
  std::vector<double> w;
  double total = 0.0;
  for (Eigen::Index i = 0; i < refs.rows(); ++i) {
    double d = 0.0;
    for (Eigen::Index c = 0; c < m.size(); ++c) d += (m(c) - refs(i, c)) * (m(c) - refs(i, c));
    w.push_back(1.0 / (d + 1e-8));
    total += w.back();
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.size());
  for (Eigen::Index i = 0; i < refs.rows(); ++i) {
    const double wi = normalise ? w[i] / total : w[i];
    for (Eigen::Index c = 0; c < m.size(); ++c) out(c) += wi * refs(i, c);
  }
  return out;
}

/// Micro-F1 from a confusion matrix: pooled TP / FP / FN over classes.
inline double confusion_micro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int classes) {
  std::vector<std::vector<int>> cm(classes, std::vector<int>(classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++cm[truth[i]][pred[i]];
  double tp = 0, fp = 0, fn = 0;
  for (int c = 0; c < classes; ++c) {
    tp += cm[c][c];
    for (int o = 0; o < classes; ++o) {
      if (o == c) continue;
      fp += cm[o][c];
      fn += cm[c][o];
    }
  }
  return 2 * tp / (2 * tp + fp + fn);
}

/// P(score+ > score-) + P(tie)/2 over all positive/negative pairs.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Plain CE-only minibatch Adam loop: shuffle train ids each epoch with
/// mt19937_64(seed), cross-entropy, backward, Adam. No feedback machinery.
inline std::vector<spacedit::ClassifierModel> ce_trajectory(spacedit::ClassifierModel model,
                                                            const spacedit::DatasetBundle& data,
                                                            std::size_t epochs, double lr,
                                                            std::size_t batch_size, std::uint64_t seed) {
  using namespace spacedit;
  auto ids = data.ids_in(Split::train);
  batch_size = std::min(batch_size, ids.size());
  auto adam = AdamState::create(model, lr);
  std::mt19937_64 rng(seed);
  std::vector<ClassifierModel> out;
  for (std::size_t e = 0; e < epochs; ++e) {
    auto order = ids;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += batch_size) {
      std::vector<std::size_t> batch(order.begin() + s, order.begin() + std::min(s + batch_size, order.size()));
      const auto fp = forward(model, data.features_of(batch));
      const auto labels = data.labels_of(batch);
      const auto ce = cross_entropy(fp.probs, labels);
      adam_step(model, backward(model, fp, ce.grad_logits, MatrixF()), adam);
      out.push_back(model);
    }
  }
  return out;
}

/// Small pretrained session over the synthetic generator.
inline spacedit::Session pretrained_session(std::uint64_t seed, std::size_t n = 140, double overlap = 0.6,
                                            std::size_t epochs = 5) {
  spacedit::SyntheticConfig sc;
  sc.n = n;
  sc.overlap = overlap;
  sc.seed = seed;
  spacedit::ModelConfig mc;
  mc.hidden_dims = {16, 8};
  auto s = spacedit::Session::create(spacedit::generate_synthetic(sc), mc, 6);
  spacedit::PretrainOptions po;
  po.epochs = epochs;
  po.seed = seed;
  po.learning_rate = 5e-3;
  s.pretrain(po);
  return s;
}

/// A random edit: `count` distinct non-test items moved by a Gaussian offset.
inline spacedit::EditTransaction random_edit(const spacedit::Session& s, std::mt19937_64& rng,
                                             std::size_t count) {
  auto eligible = s.dataset().ids_in(spacedit::Split::train);
  const auto val = s.dataset().ids_in(spacedit::Split::validation);
  eligible.insert(eligible.end(), val.begin(), val.end());
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::normal_distribution<double> step(0.0, 1.0);
  spacedit::EditTransaction tx;
  for (std::size_t i = 0; i < std::min(count, eligible.size()); ++i) {
    const auto id = eligible[i];
    const auto old = s.layout().points[id];
    tx.moves.push_back({id, old, {old.x + step(rng), old.y + step(rng)}});
  }
  tx.source = spacedit::EditSource::oracle;
  return tx;
}

/// Net effect of an edit/undo/redo sequence: a stack of applied transactions
/// and a redo stack, then positions overwritten in order from the base.
struct ReplayModel {
  std::vector<spacedit::EditTransaction> applied;
  std::vector<spacedit::EditTransaction> redo_stack;

  void edit(spacedit::EditTransaction tx) {
    applied.push_back(std::move(tx));
    redo_stack.clear();
  }
  void undo() {
    if (applied.empty()) return;
    redo_stack.push_back(applied.back());
    applied.pop_back();
  }
  void redo() {
    if (redo_stack.empty()) return;
    applied.push_back(redo_stack.back());
    redo_stack.pop_back();
  }
  Layout2D layout(const Layout2D& base) const {
    Layout2D out = base;
    for (const auto& tx : applied) {
      for (const auto& m : tx.moves) out.points[m.item_id] = m.new_pos;
    }
    return out;
  }
};

}  // namespace oracle
