#include "dgvc/codec.hpp"

#include <cmath>
#include <cstring>
#include <ostream>
#include <string>

#include "byteio.hpp"
#include "dgvc/checkpoint.hpp"
#include "dgvc/pmf.hpp"

namespace dgvc::codec {

using ad::Shape;
using ad::Tensor;

// ---- header ----------------------------------------------------------------

std::vector<std::uint8_t> BitstreamHeader::encode() const {
  io::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u16(version);
  w.u32(model_checksum);
  w.u8(arch);
  w.u16(frames);
  w.u16(height);
  w.u16(width);
  w.u8(channels);
  w.u16(dim_z);
  w.u16(dim_f);
  w.u16(alphabet_bound);
  w.u8(precision);
  w.u64(payload_len);
  w.u32(payload_checksum);
  return w.take();
}

BitstreamHeader BitstreamHeader::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw CodecError("bitstream truncated: incomplete header");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw CodecError("not a bitstream (bad magic)");
  io::ByteReader r(bytes);
  r.skip(sizeof kMagic);
  BitstreamHeader h;
  h.version = r.u16();
  if (h.version != kFormatVersion) {
    throw CodecError("unsupported bitstream version " + std::to_string(h.version));
  }
  h.model_checksum = r.u32();
  h.arch = r.u8();
  h.frames = r.u16();
  h.height = r.u16();
  h.width = r.u16();
  h.channels = r.u8();
  h.dim_z = r.u16();
  h.dim_f = r.u16();
  h.alphabet_bound = r.u16();
  h.precision = r.u8();
  h.payload_len = r.u64();
  h.payload_checksum = r.u32();
  return h;
}

double SegmentReport::estimate_bits() const {
  double total = estimate_bits_f;
  for (double b : estimate_bits_z) total += b;
  return total;
}

// ---- codec -----------------------------------------------------------------

namespace {

std::pair<coding::CdfTable, std::vector<double>> table_for(const model::LatentDistribution& dist,
                                                           int bound, unsigned precision) {
  auto pmf = model::integer_pmf_table(dist, bound);
  auto table = coding::build_cdf_table(pmf, precision);
  return {std::move(table), std::move(pmf)};
}

Tensor row_tensor(const std::vector<int>& v) {
  Tensor t(Shape{v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

}  // namespace

Codec::Codec(const model::VideoModel& model, unsigned precision)
    : model_(model), precision_(precision), hash_(dgvc::model_hash(model)) {
  const auto& cfg = model.config();
  const int bound = cfg.alphabet_bound;
  if (model::has_global(cfg.arch)) {
    for (std::size_t d = 0; d < cfg.dim_f; ++d) {
      auto [table, pmf] = table_for(model::FactorizedDim{&model.prior_f(), &model.params(), d},
                                    bound, precision);
      f_tables_.push_back(std::move(table));
      f_pmfs_.push_back(std::move(pmf));
    }
  }
  for (std::size_t d = 0; d < cfg.dim_z; ++d) {
    auto [table, pmf] = table_for(model::FactorizedDim{&model.prior_z1(), &model.params(), d},
                                  bound, precision);
    z1_tables_.push_back(std::move(table));
    z1_pmfs_.push_back(std::move(pmf));
  }
}

QuantizedLatents Codec::analyze(const data::VideoSegment& video) const {
  const auto& cfg = model_.config();
  if (video.frames != cfg.frames || video.height != cfg.frame_h || video.width != cfg.frame_w ||
      video.channels != cfg.frame_c) {
    throw CodecError("video is " + std::to_string(video.frames) + "x" + std::to_string(video.channels) +
                     "x" + std::to_string(video.height) + "x" + std::to_string(video.width) +
                     ", checkpoint expects " + std::to_string(cfg.frames) + "x" +
                     std::to_string(cfg.frame_c) + "x" + std::to_string(cfg.frame_h) + "x" +
                     std::to_string(cfg.frame_w));
  }
  const Tensor frames = video.to_tensor();
  QuantizedLatents q;
  if (model::has_global(cfg.arch)) {
    q.f = coding::quantize(model_.encode_global(frames).data(), cfg.alphabet_bound);
  }
  const Tensor z = model_.encode_local_all(frames);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    q.z.push_back(coding::quantize(z.data().subspan(t * cfg.dim_z, cfg.dim_z), cfg.alphabet_bound));
  }
  return q;
}

template <typename Sink, typename Mark>
void Codec::walk(QuantizedLatents& lat, Sink&& sink, Mark&& end_of_section) const {
  const auto& cfg = model_.config();
  const int bound = cfg.alphabet_bound;
  lat.f.resize(f_tables_.size());
  for (std::size_t d = 0; d < f_tables_.size(); ++d) lat.f[d] = sink(f_tables_[d], f_pmfs_[d], -1, d);
  end_of_section(-1);

  lat.z.resize(cfg.frames, std::vector<int>(cfg.dim_z));
  for (std::size_t d = 0; d < cfg.dim_z; ++d) lat.z[0][d] = sink(z1_tables_[d], z1_pmfs_[d], 0, d);
  end_of_section(0);

  model::PriorState state = model_.initial_prior_state();
  for (std::size_t t = 1; t < cfg.frames; ++t) {
    auto [next, prior] = model_.prior_step(state, row_tensor(lat.z[t - 1]));
    state = std::move(next);
    for (std::size_t d = 0; d < cfg.dim_z; ++d) {
      auto [table, pmf] = table_for(model::NormalDist{prior.mu[d], prior.sigma[d]}, bound, precision_);
      lat.z[t][d] = sink(table, pmf, static_cast<int>(t), d);
    }
    end_of_section(static_cast<int>(t));
  }
}

data::VideoSegment Codec::reconstruct(const QuantizedLatents& lat) const {
  const auto& cfg = model_.config();
  Tensor z(Shape{cfg.frames, cfg.dim_z});
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    for (std::size_t d = 0; d < cfg.dim_z; ++d) z[t * cfg.dim_z + d] = lat.z[t][d];
  }
  const Tensor f = row_tensor(lat.f);
  return data::VideoSegment::from_tensor(
      model_.decode_all(z, model::has_global(cfg.arch) ? &f : nullptr));
}

CompressResult Codec::compress(const data::VideoSegment& video) const {
  const auto& cfg = model_.config();
  const int bound = cfg.alphabet_bound;
  CompressResult out;
  const QuantizedLatents q = analyze(video);

  coding::RangeEncoder enc;
  SegmentReport& rep = out.report;
  rep.bits_z.assign(cfg.frames, 0.0);
  rep.estimate_bits_z.assign(cfg.frames, 0.0);
  double mark = 0.0;
  QuantizedLatents walked;
  walk(
      walked,
      [&](const coding::CdfTable& table, const std::vector<double>& pmf, int t, std::size_t d) {
        const int v = t < 0 ? q.f[d] : q.z[static_cast<std::size_t>(t)][d];
        const auto sym = static_cast<std::size_t>(v + bound);
        enc.encode(table, sym);
        const double bits = -std::log2(pmf[sym]);
        if (t < 0) {
          rep.estimate_bits_f += bits;
        } else {
          rep.estimate_bits_z[static_cast<std::size_t>(t)] += bits;
        }
        return v;
      },
      [&](int t) {
        const double now = enc.bits_consumed();
        (t < 0 ? rep.bits_f : rep.bits_z[static_cast<std::size_t>(t)]) = now - mark;
        mark = now;
      });
  const auto payload = enc.finish();
  rep.bits_flush = 8.0 * static_cast<double>(payload.size()) - mark;

  BitstreamHeader h;
  h.model_checksum = hash_;
  h.arch = static_cast<std::uint8_t>(cfg.arch);
  h.frames = cfg.frames;
  h.height = cfg.frame_h;
  h.width = cfg.frame_w;
  h.channels = static_cast<std::uint8_t>(cfg.frame_c);
  h.dim_z = cfg.dim_z;
  h.dim_f = cfg.dim_f;
  h.alphabet_bound = cfg.alphabet_bound;
  h.precision = static_cast<std::uint8_t>(precision_);
  h.payload_len = payload.size();
  h.payload_checksum = crc32(payload);
  out.bytes = h.encode();
  out.bytes.insert(out.bytes.end(), payload.begin(), payload.end());

  out.latents = q;
  out.reconstruction = reconstruct(q);
  rep.bytes = out.bytes.size();
  rep.bits_header = 8.0 * kHeaderSize;
  rep.bpp = data::bpp(rep.bytes, cfg.frames, cfg.frame_h, cfg.frame_w);
  rep.rate_estimate_bpp =
      rep.estimate_bits() / (static_cast<double>(cfg.frames) * cfg.pixels_per_frame());
  rep.psnr_db = data::psnr(video, out.reconstruction);
  rep.ms_ssim = data::ms_ssim(video, out.reconstruction);
  return out;
}

DecompressResult Codec::decompress(std::span<const std::uint8_t> bytes) const {
  const auto& cfg = model_.config();
  const BitstreamHeader h = BitstreamHeader::decode(bytes);
  if (h.model_checksum != hash_) {
    throw ModelMismatchError("bitstream was produced by a different checkpoint (model checksum " +
                             std::to_string(h.model_checksum) + ", loaded " + std::to_string(hash_) + ")");
  }
  if (h.arch != static_cast<std::uint8_t>(cfg.arch) || h.frames != cfg.frames ||
      h.height != cfg.frame_h || h.width != cfg.frame_w || h.channels != cfg.frame_c ||
      h.dim_z != cfg.dim_z || h.dim_f != cfg.dim_f || h.alphabet_bound != cfg.alphabet_bound) {
    throw ModelMismatchError("bitstream configuration does not match the checkpoint");
  }
  if (h.precision != precision_) throw CodecError("unsupported table precision " + std::to_string(h.precision));
  if (bytes.size() - kHeaderSize != h.payload_len) {
    throw CodecError("bitstream truncated: header announces " + std::to_string(h.payload_len) +
                     " payload bytes, found " + std::to_string(bytes.size() - kHeaderSize));
  }
  const auto payload = bytes.subspan(kHeaderSize);
  if (crc32(payload) != h.payload_checksum) throw PayloadChecksumError("payload checksum mismatch");

  DecompressResult out;
  try {
    coding::RangeDecoder dec(payload);
    const int bound = cfg.alphabet_bound;
    walk(
        out.latents,
        [&](const coding::CdfTable& table, const std::vector<double>&, int, std::size_t) {
          return static_cast<int>(dec.decode(table)) - bound;
        },
        [](int) {});
  } catch (const coding::CodingError& e) {
    throw CodecError(std::string("payload decode failed: ") + e.what());
  }
  out.video = reconstruct(out.latents);
  return out;
}

// ---- evaluation -------------------------------------------------------------

Evaluation evaluate(const Codec& codec, std::span<const data::VideoSegment> segments) {
  if (segments.empty()) throw CodecError("evaluate: no segments");
  Evaluation ev;
  const std::size_t frames = codec.model().config().frames;
  SegmentReport& m = ev.mean;
  m.bits_z.assign(frames, 0.0);
  m.estimate_bits_z.assign(frames, 0.0);
  std::size_t finite_psnr = 0;
  for (const auto& seg : segments) {
    auto res = codec.compress(seg);
    const auto back = codec.decompress(res.bytes);
    if (!(back.latents == res.latents) || back.video.pixels != res.reconstruction.pixels) {
      throw CodecError("decoder output differs from the encoder's reconstruction");
    }
    ev.segments.push_back(std::move(res.report));
  }
  const double n = static_cast<double>(ev.segments.size());
  for (const auto& r : ev.segments) {
    m.bytes += r.bytes;
    m.bpp += r.bpp / n;
    m.bits_header += r.bits_header / n;
    m.bits_f += r.bits_f / n;
    m.bits_flush += r.bits_flush / n;
    m.ms_ssim += r.ms_ssim / n;
    m.estimate_bits_f += r.estimate_bits_f / n;
    m.rate_estimate_bpp += r.rate_estimate_bpp / n;
    for (std::size_t t = 0; t < frames; ++t) {
      m.bits_z[t] += r.bits_z[t] / n;
      m.estimate_bits_z[t] += r.estimate_bits_z[t] / n;
    }
    if (std::isfinite(r.psnr_db)) {
      m.psnr_db += r.psnr_db;
      ++finite_psnr;
    }
  }
  m.bytes = static_cast<std::size_t>(std::llround(static_cast<double>(m.bytes) / n));
  m.psnr_db = finite_psnr == 0 ? data::kPsnrIdentical : m.psnr_db / static_cast<double>(finite_psnr);
  return ev;
}

void write_evaluation_csv(std::ostream& out, const Evaluation& ev) {
  const std::size_t frames = ev.mean.bits_z.size();
  out << "segment,bytes,bpp,psnr_db,ms_ssim,rate_estimate_bpp,bits_header,bits_f";
  for (std::size_t t = 1; t <= frames; ++t) out << ",bits_z" << t;
  out << ",bits_flush\n";
  auto row = [&](const std::string& name, const SegmentReport& r) {
    out << name << ',' << r.bytes << ',' << r.bpp << ',' << r.psnr_db << ',' << r.ms_ssim << ','
        << r.rate_estimate_bpp << ',' << r.bits_header << ',' << r.bits_f;
    for (double b : r.bits_z) out << ',' << b;
    out << ',' << r.bits_flush << '\n';
  };
  for (std::size_t i = 0; i < ev.segments.size(); ++i) row(std::to_string(i), ev.segments[i]);
  row("mean", ev.mean);
}

// ---- latent statistics -------------------------------------------------------

double LatentHistogram::total_variation() const {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    tv += std::fabs(static_cast<double>(counts[i]) / static_cast<double>(total) - prior_pmf[i]);
  }
  return 0.5 * tv;
}

std::vector<LatentHistogram> latent_stats(const model::VideoModel& model,
                                          std::span<const data::VideoSegment> segments) {
  const auto& cfg = model.config();
  const int bound = cfg.alphabet_bound;
  std::vector<LatentHistogram> out;
  auto add = [&](char latent, const model::FactorizedDensity& density, std::size_t dims) {
    for (std::size_t d = 0; d < dims; ++d) {
      LatentHistogram h;
      h.latent = latent;
      h.dim = d;
      h.counts.assign(cfg.alphabet_size(), 0);
      h.prior_pmf = model::integer_pmf_table(model::FactorizedDim{&density, &model.params(), d}, bound);
      out.push_back(std::move(h));
    }
  };
  const bool global = model::has_global(cfg.arch);
  if (global) add('f', model.prior_f(), cfg.dim_f);
  add('z', model.prior_z1(), cfg.dim_z);
  const std::size_t z_base = global ? cfg.dim_f : 0;

  for (const auto& seg : segments) {
    const Tensor frames = seg.to_tensor();
    if (global) {
      const auto f = coding::quantize(model.encode_global(frames).data(), bound);
      for (std::size_t d = 0; d < f.size(); ++d) ++out[d].counts[static_cast<std::size_t>(f[d] + bound)];
    }
    const Tensor z = model.encode_local_all(frames);
    const auto z1 = coding::quantize(z.data().first(cfg.dim_z), bound);
    for (std::size_t d = 0; d < z1.size(); ++d) {
      ++out[z_base + d].counts[static_cast<std::size_t>(z1[d] + bound)];
    }
  }
  return out;
}

void write_latent_stats_csv(std::ostream& out, const std::vector<LatentHistogram>& stats, int bound) {
  out << "latent,dim,value,count,empirical,prior_pmf\n";
  for (const auto& h : stats) {
    std::uint64_t total = 0;
    for (auto c : h.counts) total += c;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      const double emp = total == 0 ? 0.0 : static_cast<double>(h.counts[i]) / static_cast<double>(total);
      out << h.latent << ',' << h.dim << ',' << static_cast<int>(i) - bound << ',' << h.counts[i] << ','
          << emp << ',' << h.prior_pmf[i] << '\n';
    }
  }
}

}  // namespace dgvc::codec
