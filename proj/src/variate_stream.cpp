#include "lintsamp/variate_stream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "sobol_directions.hpp"

namespace lintsamp {
namespace detail {

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::array<std::uint32_t, 4> c = counter;
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return c;
}

std::uint32_t owen_scramble(std::uint32_t x, std::uint64_t key) {
  std::uint32_t y = 0;
  for (int bit = 31; bit >= 0; --bit) {
    const int level = 31 - bit;
    const std::uint64_t prefix = (level == 0) ? 0u : (x >> (bit + 1));
    // (1 << level) | prefix uniquely encodes the dyadic interval at this level
    const std::uint64_t code = (std::uint64_t{1} << level) | prefix;
    const std::uint64_t h = mix64(mix64(code) ^ key);
    y |= (((x >> bit) ^ static_cast<std::uint32_t>(h)) & 1u) << bit;
  }
  return y;
}

std::array<std::uint32_t, 32> sobol_directions(int dim) {
  std::array<std::uint32_t, 32> v{};
  if (dim < 0 || dim >= kSobolTableDims)
    throw std::out_of_range("sobol_directions: dimension outside shipped table");
  if (dim == 0) {
    for (int j = 0; j < 32; ++j) v[j] = 1u << (31 - j);
    return v;
  }

  // Offset of this dimension's initial values in the flattened table.
  std::size_t offset = 0;
  for (int d = 0; d < dim - 1; ++d)
    offset += static_cast<std::size_t>(std::bit_width(kSobolPoly[d])) - 1;

  const std::uint32_t poly = kSobolPoly[dim - 1];
  const int s = std::bit_width(poly) - 1;

  std::array<std::uint32_t, 32> m{};
  for (int j = 0; j < s && j < 32; ++j) m[j] = kSobolMinit[offset + j];
  for (int j = s; j < 32; ++j) {
    std::uint32_t mj = m[j - s] ^ (m[j - s] << s);
    for (int i = 1; i < s; ++i)
      if ((poly >> (s - i)) & 1u) mj ^= (m[j - i] << i);
    m[j] = mj;
  }
  for (int j = 0; j < 32; ++j) v[j] = m[j] << (31 - j);
  return v;
}

double radical_inverse(std::uint64_t index, std::uint32_t base) {
  double r = 0.0;
  double m = 1.0 / base;
  while (index > 0) {
    r += m * static_cast<double>(index % base);
    index /= base;
    m /= base;
  }
  return r;
}

std::uint32_t nth_prime(int n) {
  std::uint32_t candidate = 2;
  for (int found = 0;; ++candidate) {
    bool prime = true;
    for (std::uint32_t d = 2; d * d <= candidate; ++d)
      if (candidate % d == 0) { prime = false; break; }
    if (prime && found++ == n) return candidate;
  }
}

namespace {

// Largest double below 1; guards summed radical inverses against rounding up.
const double kBelowOne = std::nextafter(1.0, 0.0);

double u64_to_unit_double(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace
}  // namespace detail

std::string to_string(StreamKind kind) {
  switch (kind) {
    case StreamKind::kPseudorandom: return "pseudorandom";
    case StreamKind::kSobol: return "sobol";
    case StreamKind::kHalton: return "halton";
  }
  return "unknown";
}

VariateStream::VariateStream(StreamKind kind, int width, std::uint64_t seed, bool scrambled)
    : kind_(kind), width_(width), seed_(seed), scrambled_(scrambled) {
  if (width < 1 || width > kDimMax + 1)
    throw std::invalid_argument("VariateStream: width must be in [1, " +
                                std::to_string(kDimMax + 1) + "]");
  if (kind == StreamKind::kSobol) {
    directions_.reserve(width);
    for (int c = 0; c < width; ++c) directions_.push_back(detail::sobol_directions(c));
    if (scrambled) {
      owen_keys_.resize(width);
      for (int c = 0; c < width; ++c)
        owen_keys_[c] = detail::mix64(seed + 0x9E3779B97F4A7C15ull * (c + 1));
    }
  } else if (kind == StreamKind::kHalton) {
    bases_.resize(width);
    for (int c = 0; c < width; ++c) bases_[c] = detail::nth_prime(c);
    if (scrambled) {
      digit_shifts_.resize(width);
      for (int c = 0; c < width; ++c) {
        const std::uint32_t base = bases_[c];
        // enough digits that base^-D underflows the 53-bit mantissa
        const int digits = static_cast<int>(std::ceil(64.0 / std::log2(double(base))));
        digit_shifts_[c].resize(digits);
        std::uint64_t state = detail::mix64(seed + 0x9E3779B97F4A7C15ull * (c + 1));
        for (int j = 0; j < digits; ++j) {
          state = detail::mix64(state);
          digit_shifts_[c][j] = static_cast<std::uint8_t>(state % base);
        }
      }
    }
  }
}

VariateStream VariateStream::pseudorandom(int width, std::uint64_t seed) {
  return VariateStream(StreamKind::kPseudorandom, width, seed, false);
}

VariateStream VariateStream::sobol(int width) {
  return VariateStream(StreamKind::kSobol, width, 0, false);
}

VariateStream VariateStream::halton(int width) {
  return VariateStream(StreamKind::kHalton, width, 0, false);
}

VariateStream VariateStream::scrambled(std::uint64_t seed) const {
  if (kind_ == StreamKind::kPseudorandom)
    throw std::logic_error("scramble: not applicable to the pseudorandom kind");
  return VariateStream(kind_, width_, seed, true);
}

double VariateStream::pseudorandom_at(std::uint64_t index) const {
  // Two doubles per Philox block: block index in the counter, lane picks
  // which output word pair becomes the 64-bit payload.
  const std::uint64_t block = index >> 1;
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0u, 0u};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = detail::philox4x32(counter, key);
  const std::uint64_t payload =
      (index & 1) ? (std::uint64_t{out[2]} << 32) | out[3]
                  : (std::uint64_t{out[0]} << 32) | out[1];
  return detail::u64_to_unit_double(payload);
}

double VariateStream::sobol_at(std::uint64_t index, int col) const {
  std::uint32_t x = 0;
  std::uint64_t bits = index;
  for (int b = 0; bits != 0; ++b, bits >>= 1)
    if (bits & 1) x ^= directions_[col][b];
  if (scrambled_) x = detail::owen_scramble(x, owen_keys_[col]);
  return static_cast<double>(x) * 0x1.0p-32;
}

double VariateStream::halton_at(std::uint64_t index, int col) const {
  const std::uint32_t base = bases_[col];
  if (!scrambled_) return detail::radical_inverse(index, base);

  const auto& shifts = digit_shifts_[col];
  double r = 0.0;
  double m = 1.0 / base;
  std::uint64_t rest = index;
  for (std::uint8_t shift : shifts) {
    const std::uint32_t digit = (static_cast<std::uint32_t>(rest % base) + shift) % base;
    r += m * static_cast<double>(digit);
    rest /= base;
    m /= base;
  }
  return std::min(r, detail::kBelowOne);
}

double VariateStream::value_at(std::uint64_t row, int col) const {
  if (col < 0 || col >= width_) throw std::out_of_range("value_at: column outside width");
  switch (kind_) {
    case StreamKind::kPseudorandom:
      return pseudorandom_at(row * static_cast<std::uint64_t>(width_) + col);
    case StreamKind::kSobol:
      // index 0 (the all-zeros point) is skipped
      if (row + 1 >= (std::uint64_t{1} << 31))
        throw std::runtime_error("sobol stream exhausted: beyond 2^31 rows");
      return sobol_at(row + 1, col);
    case StreamKind::kHalton:
      return halton_at(row + 1, col);
  }
  throw std::logic_error("value_at: bad stream kind");
}

Eigen::MatrixXd VariateStream::next_rows(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("next_rows: n must be >= 1");
  Eigen::MatrixXd rows(n, width_);
  for (Eigen::Index r = 0; r < n; ++r)
    for (int c = 0; c < width_; ++c) rows(r, c) = value_at(row_ + r, c);
  row_ += static_cast<std::uint64_t>(n);
  return rows;
}

}  // namespace lintsamp
