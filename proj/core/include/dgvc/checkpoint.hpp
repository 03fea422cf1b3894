#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgvc/model.hpp"

namespace dgvc {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Fixed-width little-endian block holding every ModelConfig field.
std::vector<std::uint8_t> encode_model_config(const model::ModelConfig& config);
model::ModelConfig decode_model_config(std::span<const std::uint8_t> bytes, std::size_t* consumed);

// Checksum of the raw parameter bytes; this is the model hash carried by
// every bitstream.
std::uint32_t model_hash(const model::VideoModel& model);

std::vector<std::uint8_t> encode_checkpoint(const model::VideoModel& model);
model::VideoModel decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const model::VideoModel& model);
model::VideoModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dgvc
