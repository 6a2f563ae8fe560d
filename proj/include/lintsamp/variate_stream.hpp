#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lintsamp/config.hpp"

namespace lintsamp {

enum class StreamKind { kPseudorandom, kSobol, kHalton };

std::string to_string(StreamKind kind);

// Deterministic supplier of uniform variates in [0,1), emitted in rows of a
// fixed width (one column per inverse-transform stage). Rows are randomly
// addressable, so skipping ahead to row i is exact and O(1) per value:
//   - pseudorandom: Philox4x32-10 counter-based generator keyed by the seed;
//   - sobol: Joe-Kuo direction numbers, natural (binary) indexing, the
//     all-zeros point at index 0 skipped; optional Owen nested-uniform
//     scrambling keyed by a seed;
//   - halton: 1-indexed radical inverse in the first `width` prime bases;
//     optional per-digit shift scrambling keyed by a seed.
// (kind, seed, width) fully determine the emitted sequence on any platform.
class VariateStream {
 public:
  static VariateStream pseudorandom(int width, std::uint64_t seed);
  static VariateStream sobol(int width);
  static VariateStream halton(int width);

  // Returns a scrambled copy of a quasi-random stream, counter reset to 0.
  // Not applicable to the pseudorandom kind.
  VariateStream scrambled(std::uint64_t seed) const;

  // Next n rows as an n x width matrix; advances the row counter.
  Eigen::MatrixXd next_rows(Eigen::Index n);

  // Value at (row, col) without touching the counter.
  double value_at(std::uint64_t row, int col) const;

  void skip_to(std::uint64_t row) { row_ = row; }
  std::uint64_t position() const { return row_; }

  int width() const { return width_; }
  StreamKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  bool is_scrambled() const { return scrambled_; }

 private:
  VariateStream(StreamKind kind, int width, std::uint64_t seed, bool scrambled);

  double pseudorandom_at(std::uint64_t index) const;
  double sobol_at(std::uint64_t index, int col) const;
  double halton_at(std::uint64_t index, int col) const;

  StreamKind kind_;
  int width_;
  std::uint64_t seed_ = 0;
  bool scrambled_ = false;
  std::uint64_t row_ = 0;

  // sobol: per-column direction numbers and per-column scramble keys
  std::vector<std::array<std::uint32_t, 32>> directions_;
  std::vector<std::uint64_t> owen_keys_;
  // halton: per-column base and per-digit shift table (scrambled only)
  std::vector<std::uint32_t> bases_;
  std::vector<std::vector<std::uint8_t>> digit_shifts_;
};

namespace detail {

// SplitMix64 finalizer; the fixed bit mixer behind seeding and Owen hashing.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3"). Returns the four output words.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Owen-style nested uniform scramble of a 32-bit Sobol integer: the flip of
// each bit depends only on the more significant bits, which permutes every
// dyadic interval independently and preserves net properties.
std::uint32_t owen_scramble(std::uint32_t x, std::uint64_t key);

// Direction numbers v_1..v_32 (as 32-bit fixed point) for a given Sobol
// dimension; dimension 0 is the van der Corput sequence.
std::array<std::uint32_t, 32> sobol_directions(int dim);

// Radical inverse of a 1-based index in the given base.
double radical_inverse(std::uint64_t index, std::uint32_t base);

std::uint32_t nth_prime(int n);  // 0-based: 2, 3, 5, ...

}  // namespace detail
}  // namespace lintsamp
