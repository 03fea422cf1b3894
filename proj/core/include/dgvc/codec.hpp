#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgvc/coding.hpp"
#include "dgvc/data.hpp"
#include "dgvc/model.hpp"

namespace dgvc::codec {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// Bitstream produced by a different checkpoint.
class ModelMismatchError : public CodecError {
 public:
  using CodecError::CodecError;
};
// Payload bytes do not match the stored checksum.
class PayloadChecksumError : public CodecError {
 public:
  using CodecError::CodecError;
};

inline constexpr char kMagic[4] = {'D', 'G', 'V', 'C'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 37;

struct BitstreamHeader {
  std::uint16_t version = kFormatVersion;
  std::uint32_t model_checksum = 0;
  std::uint8_t arch = 0;
  std::uint16_t frames = 0, height = 0, width = 0;
  std::uint8_t channels = 0;
  std::uint16_t dim_z = 0, dim_f = 0, alphabet_bound = 0;
  std::uint8_t precision = 0;
  std::uint64_t payload_len = 0;
  std::uint32_t payload_checksum = 0;

  std::vector<std::uint8_t> encode() const;
  // Throws CodecError on bad magic, version or short input.
  static BitstreamHeader decode(std::span<const std::uint8_t> bytes);
  bool operator==(const BitstreamHeader&) const = default;
};

struct QuantizedLatents {
  std::vector<int> f;               // empty for local-only models
  std::vector<std::vector<int>> z;  // T rows of dim_z
  bool operator==(const QuantizedLatents&) const = default;
};

struct SegmentReport {
  std::size_t bytes = 0;
  double bpp = 0.0;
  double bits_header = 0.0;
  double bits_f = 0.0;
  std::vector<double> bits_z;  // per frame
  double bits_flush = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
  // -log2 of the model probabilities of the coded symbols, before table
  // quantization.
  double estimate_bits_f = 0.0;
  std::vector<double> estimate_bits_z;
  double estimate_bits() const;
  double rate_estimate_bpp = 0.0;
};

struct CompressResult {
  std::vector<std::uint8_t> bytes;
  QuantizedLatents latents;
  data::VideoSegment reconstruction;  // what the decoder will output
  SegmentReport report;
};

struct DecompressResult {
  data::VideoSegment video;
  QuantizedLatents latents;
};

// Binds a model to the coder: caches the checkpoint hash and the tables of the
// stationary priors. The model must outlive the codec and stay unchanged.
class Codec {
 public:
  explicit Codec(const model::VideoModel& model, unsigned precision = coding::kDefaultPrecision);

  std::uint32_t model_hash() const { return hash_; }
  const model::VideoModel& model() const { return model_; }

  QuantizedLatents analyze(const data::VideoSegment& video) const;
  CompressResult compress(const data::VideoSegment& video) const;
  DecompressResult decompress(std::span<const std::uint8_t> bytes) const;

  data::VideoSegment reconstruct(const QuantizedLatents& latents) const;

 private:
  // Visits every symbol in stream order with its table; sink returns the
  // symbol value, which becomes history for later conditional priors.
  template <typename Sink, typename Mark>
  void walk(QuantizedLatents& latents, Sink&& sink, Mark&& end_of_section) const;

  const model::VideoModel& model_;
  unsigned precision_;
  std::uint32_t hash_;
  std::vector<coding::CdfTable> f_tables_, z1_tables_;
  std::vector<std::vector<double>> f_pmfs_, z1_pmfs_;
};

struct Evaluation {
  std::vector<SegmentReport> segments;
  SegmentReport mean;  // field-wise mean; psnr over finite values
};

Evaluation evaluate(const Codec& codec, std::span<const data::VideoSegment> segments);
void write_evaluation_csv(std::ostream& out, const Evaluation& eval);

struct LatentHistogram {
  char latent = 'f';  // 'f' or 'z' (z_1)
  std::size_t dim = 0;
  std::vector<std::uint64_t> counts;  // index value + L
  std::vector<double> prior_pmf;
  double total_variation() const;
};

// Empirical distribution of the rounded posterior means against the
// stationary prior, for every f dimension and every z_1 dimension.
std::vector<LatentHistogram> latent_stats(const model::VideoModel& model,
                                          std::span<const data::VideoSegment> segments);
void write_latent_stats_csv(std::ostream& out, const std::vector<LatentHistogram>& stats, int bound);

}  // namespace dgvc::codec
