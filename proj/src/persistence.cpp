#include "spacedit/persistence.hpp"

#include "spacedit/checkpoint.hpp"
#include "spacedit/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace spacedit {

using nlohmann::json;
namespace fs = std::filesystem;

json layout_to_json(const Layout2D& layout) {
  json arr = json::array();
  const std::string method(to_string(layout.method));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    arr.push_back({{"id", i},
                   {"x", layout.points[i].x},
                   {"y", layout.points[i].y},
                   {"method", method},
                   {"epoch", layout.epoch}});
  }
  return arr;
}

Layout2D layout_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::format, "layout JSON must be an array");
  Layout2D layout;
  layout.points.resize(j.size());
  std::vector<bool> seen(j.size(), false);
  for (const auto& p : j) {
    const auto id = p.at("id").get<std::size_t>();
    if (id >= j.size() || seen[id]) throw Error(ErrorCode::format, "layout ids must be dense and unique");
    seen[id] = true;
    layout.points[id] = {p.at("x").get<double>(), p.at("y").get<double>()};
    layout.method = layout_method_from_string(p.at("method").get<std::string>());
    layout.epoch = p.at("epoch").get<int>();
  }
  return layout;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

json metrics_to_json(const MetricsReport& report) {
  json roc = json::array();
  for (const auto& p : report.roc_points) roc.push_back({p.fpr, p.tpr});
  return {{"accuracy_before", optional_number(report.accuracy_before)},
          {"accuracy_after", optional_number(report.accuracy_after)},
          {"micro_f1_per_epoch", report.micro_f1_per_epoch},
          {"roc_points", std::move(roc)},
          {"auc", optional_number(report.auc)},
          {"split", std::string(to_string(report.split))}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport r;
  r.accuracy_before = read_optional(j, "accuracy_before");
  r.accuracy_after = read_optional(j, "accuracy_after");
  r.micro_f1_per_epoch = j.value("micro_f1_per_epoch", std::vector<double>{});
  for (const auto& p : j.value("roc_points", json::array())) {
    r.roc_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  r.auc = read_optional(j, "auc");
  r.split = split_from_string(j.value("split", std::string("test")));
  return r;
}

json retrain_config_to_json(const RetrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.learning_rate},
          {"batch_size", c.batch_size},
          {"k", c.k},
          {"delta", c.delta},
          {"w_cls", c.w_cls},
          {"w_dis", c.w_dis},
          {"anchor_mode", std::string(to_string(c.anchor_mode))},
          {"weighting", c.weighting == AnchorWeighting::normalized ? "normalized" : "unnormalized"},
          {"seed", c.seed},
          {"allow_empty", c.allow_empty}};
}

RetrainConfig retrain_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse, "retrain config must be a JSON object");
  RetrainConfig c;
  try {
    auto count = [&](const char* key, std::size_t fallback) {
      if (!j.contains(key)) return fallback;
      const auto v = j[key].get<long long>();
      if (v < 0) throw Error(ErrorCode::configuration, std::string(key) + " must be non-negative");
      return static_cast<std::size_t>(v);
    };
    c.epochs = count("epochs", c.epochs);
    c.batch_size = count("batch_size", c.batch_size);
    c.k = count("k", c.k);
    c.learning_rate = j.value("lr", j.value("learning_rate", c.learning_rate));
    c.delta = j.value("delta", c.delta);
    c.w_cls = j.value("w_cls", c.w_cls);
    c.w_dis = j.value("w_dis", c.w_dis);
    c.seed = j.value("seed", c.seed);
    c.allow_empty = j.value("allow_empty", c.allow_empty);
    if (j.contains("anchor_mode")) c.anchor_mode = anchor_mode_from_string(j["anchor_mode"].get<std::string>());
    if (j.contains("weighting")) {
      const auto w = j["weighting"].get<std::string>();
      if (w == "normalized") c.weighting = AnchorWeighting::normalized;
      else if (w == "unnormalized") c.weighting = AnchorWeighting::unnormalized;
      else throw Error(ErrorCode::parse, "unknown weighting '" + w + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("invalid retrain config: ") + e.what());
  }
  c.validate();
  return c;
}

json model_config_to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_dims", c.hidden_dims},
          {"num_classes", c.num_classes},
          {"activation", "relu"},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  if (j.value("activation", std::string("relu")) != "relu") {
    throw Error(ErrorCode::format, "unsupported activation");
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

std::string history_to_json_line(const HistoryEntry& entry, bool undone) {
  auto j = json::parse(edit_to_json_line(entry.transaction));
  j["kind"] = entry.kind == HistoryEntry::Kind::edit ? "edit" : "retrain";
  j["label"] = entry.label;
  j["created_at"] = entry.timestamp;
  j["checkpoint"] = entry.checkpoint;
  if (entry.retrain) j["retrain"] = retrain_config_to_json(*entry.retrain);
  if (undone) j["undone"] = true;
  return j.dump();
}

HistoryLine history_from_json_line(std::string_view line) {
  HistoryLine out;
  out.entry.transaction = edit_from_json_line(line);
  const auto j = json::parse(line);
  const auto kind = j.value("kind", std::string(j.contains("retrain") ? "retrain" : "edit"));
  if (kind == "retrain") {
    out.entry.kind = HistoryEntry::Kind::retrain;
    out.entry.retrain = retrain_config_from_json(j.value("retrain", json::object()));
  } else if (kind != "edit") {
    throw Error(ErrorCode::parse, "unknown history entry kind '" + kind + "'");
  }
  out.entry.label = j.value("label", std::string{});
  out.entry.timestamp = j.value("created_at", std::int64_t{0});
  out.entry.checkpoint = j.value("checkpoint", std::size_t{0});
  out.undone = j.value("undone", false);
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::format, path.filename().string() + ": " + e.what());
  }
}

std::string entry_layout_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "entry_%04zu.json", index + 1);
  return buf;
}

std::string checkpoint_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%04zu.bin", index);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_session(const Session& session, const fs::path& directory) {
  const auto& d = session.data();
  fs::create_directories(directory / "checkpoints");
  fs::create_directories(directory / "layouts");
  write_dataset_csv(*d.dataset, directory / "dataset");

  json checkpoints = json::array();
  for (std::size_t i = 0; i < d.checkpoints.size(); ++i) {
    const auto bytes = encode_checkpoint(d.checkpoints[i]);
    write_file_bytes(directory / "checkpoints" / checkpoint_name(i), bytes);
    checkpoints.push_back({{"file", "checkpoints/" + checkpoint_name(i)}, {"fnv1a64", hex64(fnv1a64(bytes))}});
  }

  json manifest = {{"version", kSessionFormatVersion},
                   {"model_config", model_config_to_json(d.model_config)},
                   {"k_graph", d.k_graph},
                   {"class_names", d.dataset->class_names},
                   {"class_colors", d.dataset->class_colors},
                   {"class_visible", d.class_visible},
                   {"thumbnails", d.dataset->thumbnails},
                   {"checkpoints", std::move(checkpoints)},
                   {"base_checkpoint", d.base_checkpoint},
                   {"current_checkpoint", d.current_checkpoint},
                   {"cursor", d.cursor},
                   {"warnings", d.warnings}};
  json split = json::array();
  for (auto s : d.dataset->splits) split.push_back(std::string(to_string(s)));
  manifest["split"] = std::move(split);
  write_text(directory / "manifest.json", manifest.dump(2) + "\n");

  write_text(directory / "layouts" / "base.json", layout_to_json(d.base_layout).dump() + "\n");
  write_text(directory / "layouts" / "current.json", layout_to_json(d.layout).dump() + "\n");
  std::string history;
  for (std::size_t i = 0; i < d.history.size(); ++i) {
    history += history_to_json_line(d.history[i], i >= d.cursor) + "\n";
    write_text(directory / "layouts" / entry_layout_name(i), layout_to_json(d.history[i].layout).dump() + "\n");
  }
  write_text(directory / "history.jsonl", history);
  write_text(directory / "metrics.json", metrics_to_json(d.metrics).dump(2) + "\n");
}

Session load_session(const fs::path& directory) {
  if (!fs::exists(directory / "manifest.json")) {
    throw Error(ErrorCode::not_found, "no session manifest in " + directory.string());
  }
  const auto manifest = read_json(directory / "manifest.json");
  const auto version = manifest.value("version", 0);
  if (version != kSessionFormatVersion) {
    throw Error(ErrorCode::migration, "session format version " + std::to_string(version) +
                                          " cannot be migrated to version " +
                                          std::to_string(kSessionFormatVersion));
  }
  try {
    auto dataset = ingest_csv(directory / "dataset" / "features.csv", directory / "dataset" / "labels.csv",
                              directory / "dataset" / "splits.csv");
    dataset.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    dataset.class_colors = manifest.at("class_colors").get<std::vector<std::string>>();
    dataset.thumbnails = manifest.value("thumbnails", std::vector<std::string>{});
    dataset.validate();

    SessionData data;
    data.model_config = model_config_from_json(manifest.at("model_config"));
    data.k_graph = manifest.at("k_graph").get<std::size_t>();
    data.class_visible = manifest.value("class_visible", std::vector<bool>{});
    data.base_checkpoint = manifest.at("base_checkpoint").get<std::size_t>();
    data.current_checkpoint = manifest.at("current_checkpoint").get<std::size_t>();
    data.cursor = manifest.at("cursor").get<std::size_t>();
    data.warnings = manifest.value("warnings", std::vector<std::string>{});
    for (const auto& c : manifest.at("checkpoints")) {
      const auto path = directory / c.at("file").get<std::string>();
      const auto bytes = read_file_bytes(path);
      if (hex64(fnv1a64(bytes)) != c.at("fnv1a64").get<std::string>()) {
        throw Error(ErrorCode::format, "checksum mismatch for " + path.filename().string());
      }
      data.checkpoints.push_back(decode_checkpoint(bytes, data.model_config.seed));
    }
    data.dataset = std::make_shared<const DatasetBundle>(std::move(dataset));

    if (!data.checkpoints.empty()) {
      data.base_layout = layout_from_json(read_json(directory / "layouts" / "base.json"));
      data.layout = layout_from_json(read_json(directory / "layouts" / "current.json"));
    }
    std::ifstream history(directory / "history.jsonl");
    std::string line;
    std::size_t index = 0;
    while (std::getline(history, line)) {
      if (line.empty()) continue;
      auto parsed = history_from_json_line(line);
      parsed.entry.layout = layout_from_json(read_json(directory / "layouts" / entry_layout_name(index)));
      data.history.push_back(std::move(parsed.entry));
      ++index;
    }
    data.metrics = metrics_from_json(read_json(directory / "metrics.json"));
    return Session(std::move(data));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::format, std::string("malformed session file: ") + e.what());
  }
}

}  // namespace spacedit
