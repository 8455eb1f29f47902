#include "spacedit/metrics.hpp"

#include "spacedit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace spacedit {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw Error(ErrorCode::parse, "unknown split '" + std::string(name) + "'");
}

namespace {

void check_pair(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::shape, "predictions and labels differ in length");
  }
  if (labels.empty()) throw Error(ErrorCode::input, "metrics need at least one item");
}

}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_pair(predictions, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double micro_f1(std::span<const int> predictions, std::span<const int> labels) {
  check_pair(predictions, labels);
  int classes = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || predictions[i] < 0) throw Error(ErrorCode::input, "negative class index");
    classes = std::max({classes, labels[i] + 1, predictions[i] + 1});
  }
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) {
      ++tp[labels[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[labels[i]];
    }
  }
  const double tp_sum = std::accumulate(tp.begin(), tp.end(), 0.0);
  const double fp_sum = std::accumulate(fp.begin(), fp.end(), 0.0);
  const double fn_sum = std::accumulate(fn.begin(), fn.end(), 0.0);
  const double denom = 2.0 * tp_sum + fp_sum + fn_sum;
  return denom == 0.0 ? 0.0 : 2.0 * tp_sum / denom;
}

RocCurve roc_curve(const MatrixF& probs, std::span<const int> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw Error(ErrorCode::shape, "probability rows and labels differ in count");
  }
  if (labels.empty()) throw Error(ErrorCode::input, "roc needs at least one item");
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; })) {
    throw Error(ErrorCode::degenerate, "all labels belong to a single class");
  }
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> pairs;
  pairs.reserve(probs.size());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= probs.cols()) {
      throw Error(ErrorCode::input, "label " + std::to_string(labels[r]) + " out of range");
    }
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      pairs.push_back({static_cast<double>(probs(r, c)), labels[r] == c});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  const double pos = static_cast<double>(probs.rows());
  const double neg = static_cast<double>(pairs.size()) - pos;

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j].score == pairs[i].score) {
      (pairs[j].positive ? tp : fp) += 1;
      ++j;
    }
    curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    i = j;
  }
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return curve;
}

std::vector<Importance> importance_scores(const MatrixF& probs) {
  std::vector<Importance> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    out[r] = {static_cast<std::size_t>(r), static_cast<double>(probs.row(r).maxCoeff())};
  }
  std::stable_sort(out.begin(), out.end(), [](const Importance& a, const Importance& b) {
    return a.importance > b.importance;
  });
  return out;
}

std::pair<std::size_t, std::size_t> HeatmapGrid::cell_of(const Point2& p) const {
  auto index = [](double v, double lo, double step, std::size_t count) {
    const double f = std::floor((v - lo) / step);
    if (!(f > 0.0)) return std::size_t{0};
    return std::min(static_cast<std::size_t>(f), count - 1);
  };
  return {index(p.y, min_y, cell_height(), height), index(p.x, min_x, cell_width(), width)};
}

std::pair<std::size_t, std::size_t> HeatmapGrid::argmax() const {
  const auto it = std::max_element(density.begin(), density.end());
  const auto flat = static_cast<std::size_t>(it - density.begin());
  return {flat / width, flat % width};
}

namespace {

double scott_bandwidth(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double sd = 0.0;
  if (values.size() > 1) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    sd = std::sqrt(ss / (n - 1.0));
  }
  return std::max(std::pow(n, -1.0 / 6.0) * sd, 1e-6);
}

}  // namespace

HeatmapGrid class_heatmap(const Layout2D& layout, std::span<const int> labels, int class_id,
                          std::size_t grid, std::optional<double> bandwidth) {
  if (layout.size() != labels.size()) throw Error(ErrorCode::shape, "layout and labels differ in size");
  if (grid == 0) throw Error(ErrorCode::configuration, "grid size must be positive");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == class_id) {
      xs.push_back(layout.points[i].x);
      ys.push_back(layout.points[i].y);
    }
  }
  if (xs.empty()) throw Error(ErrorCode::empty_class, "class " + std::to_string(class_id) + " has no members");

  HeatmapGrid g;
  g.class_id = class_id;
  g.width = g.height = grid;
  g.min_x = g.min_y = std::numeric_limits<double>::infinity();
  g.max_x = g.max_y = -std::numeric_limits<double>::infinity();
  for (const auto& p : layout.points) {
    g.min_x = std::min(g.min_x, p.x);
    g.max_x = std::max(g.max_x, p.x);
    g.min_y = std::min(g.min_y, p.y);
    g.max_y = std::max(g.max_y, p.y);
  }
  if (g.max_x - g.min_x <= 0.0) {
    g.min_x -= 0.5;
    g.max_x += 0.5;
  }
  if (g.max_y - g.min_y <= 0.0) {
    g.min_y -= 0.5;
    g.max_y += 0.5;
  }
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw Error(ErrorCode::configuration, "bandwidth must be positive");
    g.bandwidth_x = g.bandwidth_y = *bandwidth;
  } else {
    g.bandwidth_x = scott_bandwidth(xs);
    g.bandwidth_y = scott_bandwidth(ys);
  }

  // Log-domain accumulation keeps tiny bandwidths from underflowing to zero.
  std::vector<double> log_density(grid * grid);
  std::vector<double> terms(xs.size());
  for (std::size_t r = 0; r < grid; ++r) {
    const double cy = g.min_y + (static_cast<double>(r) + 0.5) * g.cell_height();
    for (std::size_t c = 0; c < grid; ++c) {
      const double cx = g.min_x + (static_cast<double>(c) + 0.5) * g.cell_width();
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double u = (cx - xs[i]) / g.bandwidth_x;
        const double v = (cy - ys[i]) / g.bandwidth_y;
        terms[i] = -0.5 * (u * u + v * v);
        peak = std::max(peak, terms[i]);
      }
      double sum = 0.0;
      for (double t : terms) sum += std::exp(t - peak);
      log_density[r * grid + c] = peak + std::log(sum);
    }
  }
  const double top = *std::max_element(log_density.begin(), log_density.end());
  g.density.resize(log_density.size());
  for (std::size_t i = 0; i < log_density.size(); ++i) g.density[i] = std::exp(log_density[i] - top);
  return g;
}

std::vector<GuideCircle> guide_geometry(const Layout2D& layout, std::span<const int> labels,
                                        std::size_t num_classes) {
  if (layout.size() != labels.size()) throw Error(ErrorCode::shape, "layout and labels differ in size");
  std::vector<GuideCircle> out(num_classes);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || c >= num_classes) throw Error(ErrorCode::input, "label out of range");
    out[c].centroid.x += layout.points[i].x;
    out[c].centroid.y += layout.points[i].y;
    ++counts[c];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::empty_class, "class " + std::to_string(c) + " has no members in the layout");
    }
    out[c].class_id = static_cast<int>(c);
    out[c].centroid.x /= static_cast<double>(counts[c]);
    out[c].centroid.y /= static_cast<double>(counts[c]);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& g = out[static_cast<std::size_t>(labels[i])];
    const double dx = layout.points[i].x - g.centroid.x;
    const double dy = layout.points[i].y - g.centroid.y;
    g.radius += dx * dx + dy * dy;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    out[c].radius = std::sqrt(out[c].radius / static_cast<double>(counts[c]));
  }
  return out;
}

std::string heatmap_to_pgm(const HeatmapGrid& grid) {
  std::ostringstream out;
  out << "P2\n" << grid.width << ' ' << grid.height << "\n255\n";
  // PGM rows run top to bottom; layout y grows upward.
  for (std::size_t r = grid.height; r-- > 0;) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      out << static_cast<int>(std::lround(255.0 * grid.at(r, c))) << (c + 1 < grid.width ? ' ' : '\n');
    }
  }
  return out.str();
}

}  // namespace spacedit
