#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace dgvc::coding {

class CodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- quantization ---------------------------------------------------------

// out[i] = v[i] + u[i], u[i] ~ U[-1/2, 1/2).
std::vector<double> inject_noise(std::span<const double> v, std::mt19937_64& rng);

// Round half away from zero, then clamp to [-bound, bound].
std::vector<int> quantize(std::span<const double> v, int bound);
int quantize(double v, int bound);

// ---- fixed-point tables ---------------------------------------------------

inline constexpr unsigned kDefaultPrecision = 16;

// cum[s] / 2^precision = P(symbol < s); every symbol owns at least one count.
struct CdfTable {
  unsigned precision = kDefaultPrecision;
  std::vector<std::uint32_t> cum;

  std::size_t alphabet_size() const { return cum.empty() ? 0 : cum.size() - 1; }
  std::uint32_t total() const { return std::uint32_t{1} << precision; }
  std::uint32_t frequency(std::size_t s) const { return cum[s + 1] - cum[s]; }
  // Throws CodingError unless cum[0] == 0, cum[A] == 2^precision, strictly increasing.
  void validate() const;

  bool operator==(const CdfTable&) const = default;
};

// Largest-remainder apportionment of 2^precision counts with a floor of one
// count per symbol; remainder ties go to the lower symbol index.
CdfTable build_cdf_table(std::span<const double> pmf, unsigned precision = kDefaultPrecision);

// ---- range coder ----------------------------------------------------------
//
// Byte-oriented range coder: 33-bit low held in a 64-bit word, 32-bit range,
// carry propagation through a cached byte plus a run of pending 0xFF bytes.
// Byte order and flush are specified in docs/bitstream.md.

class RangeEncoder {
 public:
  void encode(const CdfTable& table, std::size_t symbol);
  // Information written so far in bits (fractional); 0 before any symbol.
  double bits_consumed() const;
  // Flushes and returns the payload; the encoder must not be reused.
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
  bool started_ = false;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  // Throws CodingError if the input is shorter than the initial window.
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  std::size_t decode(const CdfTable& table);
  std::size_t bytes_read() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

// Provider of the table for the next symbol given every symbol coded before it.
using TableProvider = std::function<CdfTable(std::span<const std::uint32_t> history)>;

std::vector<std::uint8_t> ac_encode(std::span<const std::uint32_t> symbols,
                                    const TableProvider& provider);
std::vector<std::uint32_t> ac_decode(std::span<const std::uint8_t> bytes, std::size_t count,
                                     const TableProvider& provider);

}  // namespace dgvc::coding
