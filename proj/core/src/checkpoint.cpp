#include "dgvc/checkpoint.hpp"

#include <cstring>
#include <string>
#include <zlib.h>

#include "byteio.hpp"
#include "dgvc/data.hpp"

namespace dgvc {

namespace {

constexpr char kMagic[9] = {'D', 'G', 'V', 'C', '-', 'C', 'K', 'P', 'T'};

std::vector<std::uint8_t> parameter_bytes(const model::VideoModel& model) {
  io::ByteWriter w;
  for (const auto& p : model.params().all()) {
    for (double v : p.value.values()) w.f64(v);
  }
  return w.take();
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_model_config(const model::ModelConfig& c) {
  io::ByteWriter w;
  w.u16(c.frame_h);
  w.u16(c.frame_w);
  w.u16(c.frame_c);
  w.u16(c.frames);
  w.u16(c.dim_z);
  w.u16(c.dim_f);
  w.u16(c.hidden);
  w.u16(c.mlp_hidden);
  w.u8(static_cast<std::uint8_t>(c.arch));
  w.u8(static_cast<std::uint8_t>(c.conv_channels.size()));
  for (auto ch : c.conv_channels) w.u16(ch);
  w.u16(c.alphabet_bound);
  w.u8(c.flow_layers);
  return w.take();
}

model::ModelConfig decode_model_config(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  io::ByteReader r(bytes);
  model::ModelConfig c;
  c.frame_h = r.u16();
  c.frame_w = r.u16();
  c.frame_c = r.u16();
  c.frames = r.u16();
  c.dim_z = r.u16();
  c.dim_f = r.u16();
  c.hidden = r.u16();
  c.mlp_hidden = r.u16();
  const std::uint8_t arch = r.u8();
  if (arch > 2) throw CheckpointError("unknown architecture id " + std::to_string(arch));
  c.arch = static_cast<model::ArchVariant>(arch);
  c.conv_channels.resize(r.u8());
  for (auto& ch : c.conv_channels) ch = r.u16();
  c.alphabet_bound = r.u16();
  c.flow_layers = r.u8();
  if (consumed) *consumed = r.position();
  return c;
}

std::uint32_t model_hash(const model::VideoModel& model) { return crc32(parameter_bytes(model)); }

std::vector<std::uint8_t> encode_checkpoint(const model::VideoModel& model) {
  io::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u16(kCheckpointVersion);
  const auto config = encode_model_config(model.config());
  w.bytes(config.data(), config.size());
  const auto params = parameter_bytes(model);
  w.bytes(params.data(), params.size());
  w.u32(crc32(params));
  return w.take();
}

model::VideoModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  try {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
      throw CheckpointError("not a checkpoint (bad magic)");
    }
    io::ByteReader r(bytes);
    r.skip(sizeof kMagic);
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    std::size_t used = 0;
    const auto config = decode_model_config(bytes.subspan(r.position()), &used);
    r.skip(used);
    model::VideoModel model(config, 0);
    const std::size_t count = model.params().scalar_count();
    if (r.remaining() != count * 8 + 4) {
      throw CheckpointError("checkpoint size mismatch: expected " + std::to_string(count) +
                            " parameters for this configuration");
    }
    const auto raw = r.bytes(count * 8);
    io::ByteReader pr(raw);
    for (auto& p : model.params().all()) {
      for (double& v : p.value.data()) v = pr.f64();
    }
    const std::uint32_t stored = r.u32();
    if (stored != crc32(raw)) throw CheckpointError("checkpoint parameter checksum mismatch");
    return model;
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint configuration: ") + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw CheckpointError(std::string("checkpoint truncated: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const model::VideoModel& model) {
  // Write then rename so an interrupted save never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  data::write_file(tmp, encode_checkpoint(model));
  std::filesystem::rename(tmp, path);
}

model::VideoModel load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = data::read_file(path);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return decode_checkpoint(bytes);
}

}  // namespace dgvc
