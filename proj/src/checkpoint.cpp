#include "spacedit/checkpoint.hpp"

#include "spacedit/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace spacedit {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw Error(ErrorCode::format, "checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ClassifierModel& model) {
  std::vector<std::uint8_t> out{'S', 'P', 'E', 'D'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(model.num_layers()));
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(model.layer(i).weights.rows()));
    put_u32(out, static_cast<std::uint32_t>(model.layer(i).weights.cols()));
  }
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const auto& w = model.layer(i).weights;  // row-major storage
    for (Eigen::Index k = 0; k < w.size(); ++k) put_f32(out, w.data()[k]);
  }
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const auto& b = model.layer(i).bias;
    for (Eigen::Index k = 0; k < b.size(); ++k) put_f32(out, b[k]);
  }
  return out;
}

ClassifierModel decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::uint64_t seed) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "SPED", 4) != 0) {
    throw Error(ErrorCode::format, "checkpoint magic mismatch");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::format, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.u32();
  if (count < 2 || count > 64) throw Error(ErrorCode::format, "implausible layer count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(count);
  for (auto& d : dims) {
    d.first = r.u32();
    d.second = r.u32();
    if (d.first == 0 || d.second == 0) throw Error(ErrorCode::format, "zero layer dimension");
  }
  ModelConfig config;
  config.seed = seed;
  config.input_dim = dims.front().first;
  config.hidden_dims.clear();
  for (std::uint32_t i = 0; i + 1 < count; ++i) {
    if (dims[i].second != dims[i + 1].first) throw Error(ErrorCode::format, "layer shapes do not chain");
    config.hidden_dims.push_back(dims[i].second);
  }
  config.num_classes = dims.back().second;

  std::vector<Layer<float>> layers(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    layers[i].weights.resize(dims[i].first, dims[i].second);
    for (Eigen::Index k = 0; k < layers[i].weights.size(); ++k) layers[i].weights.data()[k] = r.f32();
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    layers[i].bias.resize(dims[i].second);
    for (Eigen::Index k = 0; k < layers[i].bias.size(); ++k) layers[i].bias[k] = r.f32();
  }
  if (!r.at_end()) throw Error(ErrorCode::format, "trailing bytes after checkpoint payload");
  for (const auto& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorCode::format, "checkpoint contains non-finite parameters");
    }
  }
  return ClassifierModel(config, std::move(layers));
}

void write_checkpoint(const ClassifierModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

ClassifierModel read_checkpoint(const std::filesystem::path& path, std::uint64_t seed) {
  return decode_checkpoint(read_file_bytes(path), seed);
}

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace spacedit
