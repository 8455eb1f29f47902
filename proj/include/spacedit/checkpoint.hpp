#pragma once

// Binary checkpoint, little-endian:
//   "SPED" | version u32 | layer count u32 | (rows u32, cols u32) per layer
//   | all weights float32 row-major, layer order | all biases float32, layer order

#include "spacedit/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spacedit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ClassifierModel& model);
ClassifierModel decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::uint64_t seed = 0);

void write_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel read_checkpoint(const std::filesystem::path& path, std::uint64_t seed = 0);

/// FNV-1a 64-bit; recorded alongside checkpoints to catch payload corruption.
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace spacedit
