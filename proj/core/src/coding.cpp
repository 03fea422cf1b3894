#include "dgvc/coding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dgvc::coding {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
constexpr unsigned kMaxPrecision = 16;
}  // namespace

std::vector<double> inject_noise(std::span<const double> v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x += unit(rng);
  return out;
}

int quantize(double v, int bound) {
  const double r = std::round(v);  // halves round away from zero
  if (!(r > -bound)) return -bound;  // also maps NaN to the lower bound
  if (r > bound) return bound;
  return static_cast<int>(r);
}

std::vector<int> quantize(std::span<const double> v, int bound) {
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = quantize(v[i], bound);
  return out;
}

void CdfTable::validate() const {
  if (precision == 0 || precision > kMaxPrecision) {
    throw CodingError("cdf table precision " + std::to_string(precision) + " out of range");
  }
  if (cum.size() < 2) throw CodingError("cdf table needs at least one symbol");
  if (cum.front() != 0) throw CodingError("cdf table must start at 0");
  if (cum.back() != total()) throw CodingError("cdf table must end at 2^precision");
  for (std::size_t i = 0; i + 1 < cum.size(); ++i) {
    if (cum[i + 1] <= cum[i]) {
      throw CodingError("cdf table not strictly increasing at symbol " + std::to_string(i));
    }
  }
}

CdfTable build_cdf_table(std::span<const double> pmf, unsigned precision) {
  if (precision == 0 || precision > kMaxPrecision) {
    throw CodingError("precision must be in [1, 16]");
  }
  const std::size_t n = pmf.size();
  const std::uint64_t total = std::uint64_t{1} << precision;
  if (n == 0) throw CodingError("empty pmf");
  if (n > total) throw CodingError("alphabet larger than 2^precision");
  double sum = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw CodingError("pmf entries must be finite and >= 0");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw CodingError("pmf sums to " + std::to_string(sum) + ", expected 1 within 1e-6");
  }

  const std::uint64_t spare = total - n;
  std::vector<std::uint64_t> counts(n, 1);
  std::vector<double> remainder(n);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = pmf[i] / sum * static_cast<double>(spare);
    const double whole = std::floor(quota);
    counts[i] += static_cast<std::uint64_t>(whole);
    remainder[i] = quota - whole;
    assigned += static_cast<std::uint64_t>(whole);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  if (assigned <= spare) {
    std::uint64_t leftover = spare - assigned;
    for (std::size_t k = 0; leftover > 0; k = (k + 1) % n, --leftover) ++counts[order[k]];
  } else {
    // Floating-point overshoot; take back from the smallest remainders.
    std::uint64_t excess = assigned - spare;
    for (std::size_t k = n; excess > 0;) {
      k = k == 0 ? n - 1 : k - 1;
      if (counts[order[k]] > 1) {
        --counts[order[k]];
        --excess;
      }
    }
  }

  CdfTable table;
  table.precision = precision;
  table.cum.resize(n + 1);
  table.cum[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    table.cum[i + 1] = table.cum[i] + static_cast<std::uint32_t>(counts[i]);
  }
  return table;
}

// ---------------------------------------------------------------------------

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(const CdfTable& table, std::size_t symbol) {
  if (finished_) throw CodingError("encoder already finished");
  if (symbol >= table.alphabet_size()) {
    throw CodingError("symbol " + std::to_string(symbol) + " outside table alphabet");
  }
  const std::uint32_t lo = table.cum[symbol];
  const std::uint32_t hi = table.cum[symbol + 1];
  if (hi <= lo) throw CodingError("symbol has zero mass");
  started_ = true;
  const std::uint32_t r = range_ >> table.precision;
  low_ += std::uint64_t{r} * lo;
  // The last symbol absorbs the truncation remainder of the range.
  range_ = hi == table.total() ? range_ - r * lo : r * (hi - lo);
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

double RangeEncoder::bits_consumed() const {
  if (!started_) return 0.0;  // 32 - log2(0xFFFFFFFF) is not exactly zero
  return 8.0 * static_cast<double>(out_.size() + cache_size_ - 1) + 32.0 -
         std::log2(static_cast<double>(range_));
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (finished_) throw CodingError("encoder already finished");
  for (int i = 0; i < 5; ++i) shift_low();
  finished_ = true;
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
  if (bytes.size() < 5) throw CodingError("payload truncated: shorter than the coder window");
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw CodingError("payload truncated");
  return in_[pos_++];
}

std::size_t RangeDecoder::decode(const CdfTable& table) {
  const std::uint32_t r = range_ >> table.precision;
  const std::uint32_t target = std::min<std::uint32_t>(code_ / r, table.total() - 1);
  const auto it = std::upper_bound(table.cum.begin() + 1, table.cum.end(), target);
  const auto symbol = static_cast<std::size_t>(it - table.cum.begin() - 1);
  const std::uint32_t lo = table.cum[symbol];
  const std::uint32_t hi = table.cum[symbol + 1];
  code_ -= r * lo;
  range_ = hi == table.total() ? range_ - r * lo : r * (hi - lo);
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return symbol;
}

std::vector<std::uint8_t> ac_encode(std::span<const std::uint32_t> symbols,
                                    const TableProvider& provider) {
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable table = provider(symbols.first(i));
    enc.encode(table, symbols[i]);
  }
  return enc.finish();
}

std::vector<std::uint32_t> ac_decode(std::span<const std::uint8_t> bytes, std::size_t count,
                                     const TableProvider& provider) {
  RangeDecoder dec(bytes);
  std::vector<std::uint32_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const CdfTable table = provider(out);
    out.push_back(static_cast<std::uint32_t>(dec.decode(table)));
  }
  return out;
}

}  // namespace dgvc::coding
