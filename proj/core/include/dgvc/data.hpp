#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgvc/tensor.hpp"

namespace dgvc::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// T frames of planar 8-bit pixels, index ((t*C + c)*H + y)*W + x.
struct VideoSegment {
  std::uint16_t frames = 0, height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;
  std::string source;  // free-form provenance, not serialized

  static VideoSegment blank(std::uint16_t t, std::uint16_t h, std::uint16_t w, std::uint16_t c);

  std::size_t frame_size() const { return std::size_t{height} * width * channels; }
  std::size_t pixel_count() const { return std::size_t{frames} * height * width; }
  std::uint8_t& at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) {
    return pixels[((t * channels + c) * height + y) * width + x];
  }
  std::uint8_t at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[((t * channels + c) * height + y) * width + x];
  }
  bool same_dims(const VideoSegment& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }

  // [T, C, H, W] scaled to [0, 1].
  ad::Tensor to_tensor() const;
  // Inverse mapping: x*255 rounded half away from zero, clamped to [0, 255].
  static VideoSegment from_tensor(const ad::Tensor& t);
};

enum class SpriteShape : std::uint8_t { Square, Circle, Triangle, Bar };

struct SpriteSceneSpec {
  std::uint64_t seed = 0;
  std::uint8_t background = 0;  // palette index, 0..3
  SpriteShape shape = SpriteShape::Square;
  std::uint8_t color[3] = {255, 255, 255};
  int size = 8;        // bounding box side in pixels
  int x = 0, y = 0;    // top-left corner at t = 0
  int vx = 0, vy = 0;  // pixels per frame, each in [-3, 3]
  bool oscillate = false;
  double phase = 0.0;  // brightness oscillation phase (radians)

  // Random scene that fits an h x w frame.
  static SpriteSceneSpec random(std::uint64_t seed, int height, int width);
};

inline constexpr int kPaletteCount = 4;

// Deterministic rendering; the sprite bounces off the frame borders.
VideoSegment gen_sprite_video(const SpriteSceneSpec& spec, std::uint16_t frames,
                              std::uint16_t height, std::uint16_t width);

// Sprite top-left corner at frame t after border reflection.
std::pair<int, int> sprite_position(const SpriteSceneSpec& spec, int t, int height, int width);

// ---- metrics ----------------------------------------------------------

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double frame_psnr(const VideoSegment& a, const VideoSegment& b, std::size_t t);
// Mean of per-frame PSNR over the frames that differ; +inf when every frame
// is identical.
double psnr(const VideoSegment& a, const VideoSegment& b);

struct MsSsimOptions {
  int scales = 3;
  int window = 7;
  double sigma = 1.5;
};
double frame_ms_ssim(const VideoSegment& a, const VideoSegment& b, std::size_t t,
                     const MsSsimOptions& options = {});
double ms_ssim(const VideoSegment& a, const VideoSegment& b, const MsSsimOptions& options = {});

double bpp(std::uint64_t bytes, std::size_t frames, std::size_t height, std::size_t width);

// ---- files ------------------------------------------------------------

inline constexpr std::size_t kRawHeaderSize = 16;

std::vector<std::uint8_t> encode_raw(const VideoSegment& v);
VideoSegment decode_raw(const std::vector<std::uint8_t>& bytes);
void save_raw(const std::filesystem::path& path, const VideoSegment& v);
VideoSegment load_raw(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

struct ManifestEntry {
  std::filesystem::path path;
  std::string split;
};

// Plain text, one "<path> <split>" per line; relative paths resolve against
// the manifest's directory. Blank lines and '#' comments are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<VideoSegment> load_split(const std::filesystem::path& manifest, const std::string& split,
                                     std::size_t limit = 0);

struct DatasetSpec {
  std::size_t train = 2000;
  std::size_t test = 200;
  std::uint16_t frames = 10, height = 32, width = 32;
  std::uint64_t seed = 1;
};

// Writes seg_<split>_<index>.raw files plus manifest.txt into dir and returns
// the manifest path.
std::filesystem::path generate_dataset(const std::filesystem::path& dir, const DatasetSpec& spec);

}  // namespace dgvc::data
