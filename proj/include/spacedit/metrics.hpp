#pragma once

#include "spacedit/embedding.hpp"
#include "spacedit/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spacedit {

enum class Split { train, validation, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by FPR, (0,0) ... (1,1)
  double auc = 0.0;
};

struct MetricsReport {
  std::optional<double> accuracy_before;
  std::optional<double> accuracy_after;
  std::vector<double> micro_f1_per_epoch;  // validation; entry 0 is before training
  std::vector<RocPoint> roc_points;
  std::optional<double> auc;
  Split split = Split::test;
  bool operator==(const MetricsReport&) const = default;
};

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Pools TP/FP/FN over all classes before computing F1.
double micro_f1(std::span<const int> predictions, std::span<const int> labels);

/// Micro-averaged one-vs-rest ROC over all (item, class) pairs.
RocCurve roc_curve(const MatrixF& probs, std::span<const int> labels);

struct Importance {
  std::size_t item_id = 0;
  double importance = 0.0;
};

/// Max softmax probability per item, descending, ties by lower id.
std::vector<Importance> importance_scores(const MatrixF& probs);

struct HeatmapGrid {
  int class_id = 0;
  std::size_t width = 64;
  std::size_t height = 64;
  double min_x = 0.0, min_y = 0.0, max_x = 1.0, max_y = 1.0;
  double bandwidth_x = 0.0, bandwidth_y = 0.0;
  std::vector<double> density;  // row-major, height rows of width cells; peak-normalised to 1

  double at(std::size_t row, std::size_t col) const { return density[row * width + col]; }
  double cell_width() const { return (max_x - min_x) / static_cast<double>(width); }
  double cell_height() const { return (max_y - min_y) / static_cast<double>(height); }
  /// (row, col) of the cell containing p, clamped to the grid.
  std::pair<std::size_t, std::size_t> cell_of(const Point2& p) const;
  std::pair<std::size_t, std::size_t> argmax() const;
};

/// Gaussian KDE of one class over the bounding box of the whole layout.
/// Bandwidth per axis defaults to Scott's rule n^(-1/6) * std, floored at 1e-6.
HeatmapGrid class_heatmap(const Layout2D& layout, std::span<const int> labels, int class_id,
                          std::size_t grid = 64, std::optional<double> bandwidth = std::nullopt);

struct GuideCircle {
  int class_id = 0;
  Point2 centroid;
  double radius = 0.0;  // RMS member distance to the centroid
};

std::vector<GuideCircle> guide_geometry(const Layout2D& layout, std::span<const int> labels,
                                        std::size_t num_classes);

/// Plain-text portable graymap of a heatmap, for debugging.
std::string heatmap_to_pgm(const HeatmapGrid& grid);

}  // namespace spacedit
