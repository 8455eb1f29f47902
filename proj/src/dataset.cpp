#include "spacedit/dataset.hpp"

#include "spacedit/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace spacedit {

std::vector<std::size_t> DatasetBundle::ids_in(Split split) const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) ids.push_back(i);
  }
  return ids;
}

std::vector<int> DatasetBundle::labels_of(const std::vector<std::size_t>& ids) const {
  std::vector<int> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(labels.at(id));
  return out;
}

MatrixF DatasetBundle::features_of(const std::vector<std::size_t>& ids) const {
  MatrixF out(static_cast<Eigen::Index>(ids.size()), features.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(i) = features.row(static_cast<Eigen::Index>(ids[i]));
  return out;
}

void DatasetBundle::validate() const {
  const auto n = labels.size();
  if (static_cast<std::size_t>(features.rows()) != n || splits.size() != n) {
    throw Error(ErrorCode::schema, "features, labels and splits disagree in item count");
  }
  if (!thumbnails.empty() && thumbnails.size() != n) {
    throw Error(ErrorCode::schema, "thumbnail list must be empty or one per item");
  }
  if (class_colors.size() != class_names.size()) {
    throw Error(ErrorCode::schema, "class colors and names differ in count");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= class_names.size()) {
      throw Error(ErrorCode::schema, "label " + std::to_string(l) + " has no class name");
    }
  }
  if (!features.allFinite()) throw Error(ErrorCode::schema, "non-finite feature value");
  std::set<int> train_classes;
  for (std::size_t i = 0; i < n; ++i) {
    if (splits[i] == Split::train) train_classes.insert(labels[i]);
  }
  if (train_classes.size() < 2) throw Error(ErrorCode::schema, "train split must contain at least two classes");
}

std::vector<std::string> default_class_colors(std::size_t classes) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::vector<std::string> out;
  for (std::size_t c = 0; c < classes; ++c) out.emplace_back(palette[c % std::size(palette)]);
  return out;
}

namespace {

std::vector<std::string> default_class_names(std::size_t classes) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < classes; ++c) out.push_back("class_" + std::to_string(c));
  return out;
}

// Pair centres sit this far apart along their own axes; within a pair the
// class means are kSeparation * (1 - overlap) apart. Noise is unit variance.
constexpr double kPairDistance = 6.0;
constexpr double kSeparation = 5.0;

}  // namespace

std::vector<Split> seeded_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 4.0 / 7.0));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 7.0));
  std::vector<Split> splits(n, Split::test);
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_train) splits[order[r]] = Split::train;
    else if (r < n_train + n_val) splits[order[r]] = Split::validation;
  }
  return splits;
}

DatasetBundle generate_synthetic(const SyntheticConfig& config) {
  if (!(config.overlap >= 0.0 && config.overlap <= 1.0)) {
    throw Error(ErrorCode::configuration, "overlap must lie in [0, 1]");
  }
  if (config.classes < 2) throw Error(ErrorCode::configuration, "need at least two classes");
  if (config.n < 4 * config.classes) throw Error(ErrorCode::configuration, "n must be at least 4 * classes");
  const std::size_t pairs = (config.classes + 1) / 2;
  if (config.input_dim < 2 * pairs) {
    throw Error(ErrorCode::configuration, "input_dim too small for the requested class count");
  }

  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(config.classes, config.input_dim);
  const double half_gap = 0.5 * kSeparation * (1.0 - config.overlap);
  for (std::size_t c = 0; c < config.classes; ++c) {
    const std::size_t pair = c / 2;
    means(c, 2 * pair) = kPairDistance;
    const bool alone = c + 1 == config.classes && c % 2 == 0;
    if (!alone) means(c, 2 * pair + 1) = c % 2 == 0 ? -half_gap : half_gap;
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  DatasetBundle bundle;
  bundle.features.resize(config.n, config.input_dim);
  bundle.labels.resize(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const auto c = static_cast<int>(i % config.classes);
    bundle.labels[i] = c;
    for (std::size_t d = 0; d < config.input_dim; ++d) {
      bundle.features(i, d) = static_cast<float>(means(c, d) + noise(rng));
    }
  }
  bundle.splits = seeded_split(config.n, config.seed);
  bundle.class_names = default_class_names(config.classes);
  bundle.class_colors = default_class_colors(config.classes);
  bundle.validate();
  return bundle;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) lines.pop_back();
  return lines;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.filename().string() + " line " + std::to_string(line);
}

}  // namespace

DatasetBundle ingest_csv(const std::filesystem::path& features_path,
                         const std::filesystem::path& labels_path,
                         const std::optional<std::filesystem::path>& split_path, std::uint64_t seed) {
  const auto feature_lines = read_lines(features_path);
  const auto label_lines = read_lines(labels_path);
  if (feature_lines.size() != label_lines.size()) {
    throw Error(ErrorCode::schema, "features has " + std::to_string(feature_lines.size()) +
                                       " rows but labels has " + std::to_string(label_lines.size()));
  }
  const auto n = feature_lines.size();
  if (n == 0) throw Error(ErrorCode::schema, "dataset is empty");

  std::vector<std::vector<float>> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> row;
    std::stringstream ss(feature_lines[i]);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto t = trim(field);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::parse, where(features_path, i + 1) + ": non-numeric field '" + t + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::schema, where(features_path, i + 1) + ": expected " +
                                         std::to_string(rows.front().size()) + " columns, found " +
                                         std::to_string(row.size()));
    }
    if (row.empty()) throw Error(ErrorCode::parse, where(features_path, i + 1) + ": empty row");
    rows.push_back(std::move(row));
  }

  DatasetBundle bundle;
  bundle.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < rows[i].size(); ++d) bundle.features(i, d) = rows[i][d];
  }
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = trim(label_lines[i]);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || v < 0) {
      throw Error(ErrorCode::parse, where(labels_path, i + 1) + ": invalid label '" + t + "'");
    }
    bundle.labels.push_back(v);
    max_label = std::max(max_label, v);
  }
  if (split_path) {
    const auto split_lines = read_lines(*split_path);
    if (split_lines.size() != n) throw Error(ErrorCode::schema, "split file row count does not match features");
    for (std::size_t i = 0; i < n; ++i) {
      try {
        bundle.splits.push_back(split_from_string(trim(split_lines[i])));
      } catch (const Error&) {
        throw Error(ErrorCode::parse, where(*split_path, i + 1) + ": invalid split '" + split_lines[i] + "'");
      }
    }
  } else {
    bundle.splits = seeded_split(n, seed);
  }
  const auto classes = static_cast<std::size_t>(max_label + 1);
  bundle.class_names = default_class_names(classes);
  bundle.class_colors = default_class_colors(classes);
  bundle.validate();
  return bundle;
}

void write_dataset_csv(const DatasetBundle& bundle, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  auto open = [&](const char* name) {
    std::ofstream out(directory / name, std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + (directory / name).string());
    return out;
  };
  {
    auto out = open("features.csv");
    char buf[32];
    for (Eigen::Index r = 0; r < bundle.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < bundle.features.cols(); ++c) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), bundle.features(r, c));
        if (c) out << ',';
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }
  {
    auto out = open("labels.csv");
    for (int l : bundle.labels) out << l << '\n';
  }
  {
    auto out = open("splits.csv");
    for (auto s : bundle.splits) out << to_string(s) << '\n';
  }
}

}  // namespace spacedit
