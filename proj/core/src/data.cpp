#include "dgvc/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "byteio.hpp"

namespace dgvc::data {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, kPaletteCount> kPalettes{{
    {16, 16, 24},
    {200, 200, 190},
    {40, 90, 140},
    {120, 60, 50},
}};

constexpr char kRawMagic[8] = {'D', 'G', 'V', 'C', '-', 'R', 'A', 'W'};

bool inside_shape(SpriteShape shape, int size, int dx, int dy) {
  switch (shape) {
    case SpriteShape::Square:
      return true;
    case SpriteShape::Circle: {
      const double c = (size - 1) / 2.0;
      const double r = size / 2.0;
      return (dx - c) * (dx - c) + (dy - c) * (dy - c) <= r * r;
    }
    case SpriteShape::Triangle: {
      // Apex on top, base on the bottom row.
      const double c = (size - 1) / 2.0;
      return std::fabs(dx - c) <= (dy + 1) / 2.0;
    }
    case SpriteShape::Bar: {
      const int thick = std::max(2, size / 3);
      const int top = (size - thick) / 2;
      return dy >= top && dy < top + thick;
    }
  }
  return false;
}

int reflect(int p, int span) {
  if (span <= 0) return 0;
  const int period = 2 * span;
  int m = p % period;
  if (m < 0) m += period;
  return m > span ? period - m : m;
}

}  // namespace

VideoSegment VideoSegment::blank(std::uint16_t t, std::uint16_t h, std::uint16_t w,
                                 std::uint16_t c) {
  VideoSegment v;
  v.frames = t;
  v.height = h;
  v.width = w;
  v.channels = c;
  v.pixels.assign(std::size_t{t} * h * w * c, 0);
  return v;
}

ad::Tensor VideoSegment::to_tensor() const {
  ad::Tensor out(ad::Shape{frames, channels, height, width});
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = pixels[i] / 255.0;
  return out;
}

VideoSegment VideoSegment::from_tensor(const ad::Tensor& t) {
  if (t.rank() != 4) throw DataError("expected a [T, C, H, W] tensor");
  VideoSegment v = blank(static_cast<std::uint16_t>(t.dim(0)), static_cast<std::uint16_t>(t.dim(2)),
                         static_cast<std::uint16_t>(t.dim(3)), static_cast<std::uint16_t>(t.dim(1)));
  for (std::size_t i = 0; i < v.pixels.size(); ++i) {
    const double r = std::round(t[i] * 255.0);
    v.pixels[i] = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
  }
  return v;
}

SpriteSceneSpec SpriteSceneSpec::random(std::uint64_t seed, int height, int width) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  SpriteSceneSpec s;
  s.seed = seed;
  s.background = static_cast<std::uint8_t>(uniform(0, kPaletteCount - 1));
  s.shape = static_cast<SpriteShape>(uniform(0, 3));
  const int side = std::min(height, width);
  s.size = uniform(std::max(3, side / 5), std::max(3, side / 3));
  s.x = uniform(0, width - s.size);
  s.y = uniform(0, height - s.size);
  s.vx = uniform(-3, 3);
  s.vy = uniform(-3, 3);
  // Sprite colour keeps a visible contrast to the background.
  const auto& bg = kPalettes[s.background];
  for (int c = 0; c < 3; ++c) {
    s.color[c] = static_cast<std::uint8_t>(bg[c] < 128 ? uniform(150, 255) : uniform(0, 100));
  }
  s.oscillate = uniform(0, 3) == 0;
  s.phase = std::uniform_real_distribution<double>(0.0, 6.283185307179586)(rng);
  return s;
}

std::pair<int, int> sprite_position(const SpriteSceneSpec& spec, int t, int height, int width) {
  return {reflect(spec.x + spec.vx * t, width - spec.size),
          reflect(spec.y + spec.vy * t, height - spec.size)};
}

VideoSegment gen_sprite_video(const SpriteSceneSpec& spec, std::uint16_t frames,
                              std::uint16_t height, std::uint16_t width) {
  if (spec.background >= kPaletteCount) throw DataError("background palette index out of range");
  if (spec.size < 1 || spec.size > std::min<int>(height, width)) throw DataError("sprite does not fit");
  if (std::abs(spec.vx) > 3 || std::abs(spec.vy) > 3) throw DataError("velocity outside [-3, 3]");
  VideoSegment v = VideoSegment::blank(frames, height, width, 3);
  v.source = "sprite:" + std::to_string(spec.seed);
  const auto& bg = kPalettes[spec.background];
  for (int t = 0; t < frames; ++t) {
    double gain = 1.0;
    if (spec.oscillate) gain = 0.75 + 0.25 * std::sin(spec.phase + 0.6 * t);
    std::array<std::uint8_t, 3> color{};
    for (int c = 0; c < 3; ++c) {
      color[c] = static_cast<std::uint8_t>(std::clamp(std::round(spec.color[c] * gain), 0.0, 255.0));
    }
    for (int c = 0; c < 3; ++c) {
      auto* plane = &v.pixels[(std::size_t(t) * 3 + c) * height * width];
      std::fill(plane, plane + std::size_t{height} * width, bg[c]);
    }
    const auto [px, py] = sprite_position(spec, t, height, width);
    for (int dy = 0; dy < spec.size; ++dy) {
      for (int dx = 0; dx < spec.size; ++dx) {
        if (!inside_shape(spec.shape, spec.size, dx, dy)) continue;
        for (int c = 0; c < 3; ++c) v.at(t, c, py + dy, px + dx) = color[c];
      }
    }
  }
  return v;
}

// ---- metrics ------------------------------------------------------------

double frame_psnr(const VideoSegment& a, const VideoSegment& b, std::size_t t) {
  if (!a.same_dims(b)) throw DataError("psnr: segment dimensions differ");
  if (t >= a.frames) throw DataError("psnr: frame index out of range");
  const std::size_t n = a.frame_size();
  const std::uint8_t* pa = a.pixels.data() + t * n;
  const std::uint8_t* pb = b.pixels.data() + t * n;
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int d = int{pa[i]} - int{pb[i]};
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return kPsnrIdentical;
  const double mse = static_cast<double>(sse) / static_cast<double>(n);
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr(const VideoSegment& a, const VideoSegment& b) {
  if (!a.same_dims(b)) throw DataError("psnr: segment dimensions differ");
  double sum = 0.0;
  std::size_t finite = 0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    const double p = frame_psnr(a, b, t);
    if (std::isfinite(p)) {
      sum += p;
      ++finite;
    }
  }
  return finite == 0 ? kPsnrIdentical : sum / static_cast<double>(finite);
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

// Separable Gaussian filtering with the window truncated and renormalized at
// the borders, so the output has the input's size.
std::vector<double> blur(const std::vector<double>& img, int h, int w, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  std::vector<double> tmp(img.size()), out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        acc += k[i + r] * img[std::size_t(y) * w + xx];
        norm += k[i + r];
      }
      tmp[std::size_t(y) * w + x] = acc / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        acc += k[i + r] * tmp[std::size_t(yy) * w + x];
        norm += k[i + r];
      }
      out[std::size_t(y) * w + x] = acc / norm;
    }
  }
  return out;
}

// Mean luminance term and mean contrast-structure term at one scale.
std::pair<double, double> ssim_terms(const std::vector<double>& a, const std::vector<double>& b,
                                     int h, int w, const std::vector<double>& k) {
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto ma = blur(a, h, w, k), mb = blur(b, h, w, k);
  const auto saa = blur(aa, h, w, k), sbb = blur(bb, h, w, k), sab = blur(ab, h, w, k);
  double l_sum = 0.0, cs_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double va = std::max(0.0, saa[i] - ma[i] * ma[i]);
    const double vb = std::max(0.0, sbb[i] - mb[i] * mb[i]);
    const double cov = sab[i] - ma[i] * mb[i];
    l_sum += (2.0 * ma[i] * mb[i] + c1) / (ma[i] * ma[i] + mb[i] * mb[i] + c1);
    cs_sum += (2.0 * cov + c2) / (va + vb + c2);
  }
  const double n = static_cast<double>(a.size());
  return {l_sum / n, cs_sum / n};
}

std::vector<double> downsample(const std::vector<double>& img, int h, int w) {
  std::vector<double> out(std::size_t(h / 2) * (w / 2));
  for (int y = 0; y < h / 2; ++y) {
    for (int x = 0; x < w / 2; ++x) {
      const std::size_t i = std::size_t(2 * y) * w + 2 * x;
      out[std::size_t(y) * (w / 2) + x] = 0.25 * (img[i] + img[i + 1] + img[i + w] + img[i + w + 1]);
    }
  }
  return out;
}

double ms_ssim_channel(const std::vector<double>& a0, const std::vector<double>& b0, int h0, int w0,
                       const MsSsimOptions& opt) {
  static constexpr double kStandardWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double weight_total = 0.0;
  for (int j = 0; j < opt.scales; ++j) weight_total += kStandardWeights[j];
  const auto k = gaussian_window(opt.window, opt.sigma);
  std::vector<double> a = a0, b = b0;
  int h = h0, w = w0;
  double score = 1.0;
  for (int j = 0; j < opt.scales; ++j) {
    const auto [l, cs] = ssim_terms(a, b, h, w, k);
    const double weight = kStandardWeights[j] / weight_total;
    const double term = j + 1 == opt.scales ? l * cs : cs;
    score *= std::pow(std::max(term, 0.0), weight);
    if (j + 1 < opt.scales) {
      a = downsample(a, h, w);
      b = downsample(b, h, w);
      h /= 2;
      w /= 2;
    }
  }
  return score;
}

}  // namespace

double frame_ms_ssim(const VideoSegment& a, const VideoSegment& b, std::size_t t,
                     const MsSsimOptions& opt) {
  if (!a.same_dims(b)) throw DataError("ms_ssim: segment dimensions differ");
  if (opt.scales < 1 || opt.scales > 5) throw DataError("ms_ssim: scales must be in [1, 5]");
  if (opt.window < 1 || opt.window % 2 == 0) throw DataError("ms_ssim: window must be odd");
  const int need = 4 << (opt.scales - 1);
  if (std::min(a.height, a.width) < need) {
    throw DataError("ms_ssim: frames smaller than " + std::to_string(need) + " pixels for " +
                    std::to_string(opt.scales) + " scales");
  }
  const int h = a.height, w = a.width;
  const std::size_t plane = std::size_t(h) * w;
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    const std::size_t off = (t * a.channels + c) * plane;
    std::vector<double> pa(plane), pb(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = a.pixels[off + i];
      pb[i] = b.pixels[off + i];
    }
    total += ms_ssim_channel(pa, pb, h, w, opt);
  }
  return total / a.channels;
}

double ms_ssim(const VideoSegment& a, const VideoSegment& b, const MsSsimOptions& opt) {
  if (!a.same_dims(b)) throw DataError("ms_ssim: segment dimensions differ");
  double total = 0.0;
  for (std::size_t t = 0; t < a.frames; ++t) total += frame_ms_ssim(a, b, t, opt);
  return a.frames == 0 ? 1.0 : total / a.frames;
}

double bpp(std::uint64_t bytes, std::size_t frames, std::size_t height, std::size_t width) {
  if (frames == 0 || height == 0 || width == 0) throw DataError("bpp: dimensions must be positive");
  return 8.0 * static_cast<double>(bytes) / static_cast<double>(frames * height * width);
}

// ---- files --------------------------------------------------------------

std::vector<std::uint8_t> encode_raw(const VideoSegment& v) {
  if (v.pixels.size() != v.frame_size() * v.frames) throw DataError("segment pixel count mismatch");
  io::ByteWriter w;
  w.bytes(kRawMagic, sizeof kRawMagic);
  w.u16(v.frames);
  w.u16(v.height);
  w.u16(v.width);
  w.u16(v.channels);
  w.bytes(v.pixels.data(), v.pixels.size());
  return w.take();
}

VideoSegment decode_raw(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kRawHeaderSize) throw DataError("raw file truncated: incomplete header");
  if (std::memcmp(bytes.data(), kRawMagic, sizeof kRawMagic) != 0) throw DataError("raw file: bad magic");
  io::ByteReader r(bytes);
  r.skip(sizeof kRawMagic);
  const auto t = r.u16(), h = r.u16(), w = r.u16(), c = r.u16();
  VideoSegment v = VideoSegment::blank(t, h, w, c);
  if (bytes.size() != kRawHeaderSize + v.pixels.size()) {
    throw DataError("raw file truncated: expected " + std::to_string(kRawHeaderSize + v.pixels.size()) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  std::copy(bytes.begin() + kRawHeaderSize, bytes.end(), v.pixels.begin());
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void save_raw(const std::filesystem::path& path, const VideoSegment& v) { write_file(path, encode_raw(v)); }

VideoSegment load_raw(const std::filesystem::path& path) {
  VideoSegment v = decode_raw(read_file(path));
  v.source = path.string();
  return v;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string p;
    if (!(ss >> p >> e.split)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected '<path> <split>'");
    }
    e.path = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : path.parent_path() / p;
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.path.generic_string() << ' ' << e.split << '\n';
}

std::vector<VideoSegment> load_split(const std::filesystem::path& manifest, const std::string& split,
                                     std::size_t limit) {
  std::vector<VideoSegment> out;
  for (const auto& e : read_manifest(manifest)) {
    if (e.split != split) continue;
    out.push_back(load_raw(e.path));
    if (limit != 0 && out.size() == limit) break;
  }
  if (out.empty()) throw DataError("no segments with split '" + split + "' in " + manifest.string());
  return out;
}

std::filesystem::path generate_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  std::mt19937_64 seeds(spec.seed);
  auto emit = [&](const std::string& split, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto scene = SpriteSceneSpec::random(seeds(), spec.height, spec.width);
      const auto video = gen_sprite_video(scene, spec.frames, spec.height, spec.width);
      const std::string name = "seg_" + split + "_" + std::to_string(i) + ".raw";
      save_raw(dir / name, video);
      entries.push_back({name, split});
    }
  };
  emit("train", spec.train);
  emit("test", spec.test);
  const auto manifest = dir / "manifest.txt";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace dgvc::data
