#pragma once

#include "spacedit/metrics.hpp"
#include "spacedit/model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spacedit {

/// Items are identified by row index 0..n-1.
struct DatasetBundle {
  MatrixF features;
  std::vector<int> labels;
  std::vector<Split> splits;
  std::vector<std::string> class_names;
  std::vector<std::string> class_colors;
  std::vector<std::string> thumbnails;  // optional; empty or one per item

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::size_t input_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::vector<std::size_t> ids_in(Split split) const;
  std::vector<int> labels_of(const std::vector<std::size_t>& ids) const;
  MatrixF features_of(const std::vector<std::size_t>& ids) const;
  void validate() const;
  bool operator==(const DatasetBundle&) const = default;
};

struct SyntheticConfig {
  std::size_t n = 700;
  std::size_t classes = 4;
  std::size_t input_dim = 16;
  double overlap = 0.5;  // 0 = separable pairs, 1 = coincident pair means
  std::uint64_t seed = 0;
};

/// Gaussian clusters; classes (0,1) and (2,3) form confusable pairs whose mean
/// separation shrinks by (1 - overlap).
DatasetBundle generate_synthetic(const SyntheticConfig& config);

/// Seeded 4:1:2 train/validation/test partition (400/100/200 for n = 700).
std::vector<Split> seeded_split(std::size_t n, std::uint64_t seed);

DatasetBundle ingest_csv(const std::filesystem::path& features_path,
                         const std::filesystem::path& labels_path,
                         const std::optional<std::filesystem::path>& split_path,
                         std::uint64_t seed = 0);

/// Writes features.csv, labels.csv and splits.csv into `directory`.
void write_dataset_csv(const DatasetBundle& bundle, const std::filesystem::path& directory);

std::vector<std::string> default_class_colors(std::size_t classes);

}  // namespace spacedit
