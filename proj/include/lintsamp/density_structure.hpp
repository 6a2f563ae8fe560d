#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>

#include "lintsamp/cell.hpp"

namespace lintsamp {

struct Extent {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Contract shared by every sampleable domain decomposition: a set of cells
// with known masses, exposed through a normalized cumulative table. The
// sampler consumes only this interface, so grids, trees and user extensions
// are interchangeable.
class DensityStructure {
 public:
  virtual ~DensityStructure() = default;

  virtual int dim() const = 0;
  virtual double total_mass() const = 0;
  virtual Extent extent() const = 0;
  virtual Eigen::Index cell_count() const = 0;

  // Normalized cumulative cell masses, non-decreasing, last element exactly 1.
  virtual const Eigen::VectorXd& cum_mass() const = 0;

  virtual Cell cell(Eigen::Index index) const = 0;

  // Stable 64-bit digest of the structure's geometry and vertex densities.
  virtual std::uint64_t fingerprint() const = 0;
};

// Discrete inverse transform over the cumulative mass table: the smallest
// index whose cumulative mass exceeds u0. Ties at table values resolve to the
// higher cell. O(log M).
inline Eigen::Index choose_cell(const DensityStructure& structure, double u0) {
  if (u0 < 0.0 || u0 >= 1.0)
    throw std::domain_error("choose_cell: u0 outside [0,1)");
  const Eigen::VectorXd& cum = structure.cum_mass();
  const double* begin = cum.data();
  const double* end = begin + cum.size();
  const double* it = std::upper_bound(begin, end, u0);
  return std::min<Eigen::Index>(it - begin, cum.size() - 1);
}

namespace detail {

// FNV-1a over raw bytes; the library-wide fingerprint primitive.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= bytes[i];
      hash_ *= 0x100000001B3ull;
    }
  }
  void update_u64(std::uint64_t v) { update(&v, sizeof v); }
  void update_doubles(const double* data, std::size_t count) {
    update(data, count * sizeof(double));
  }
  std::uint64_t digest() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

}  // namespace detail
}  // namespace lintsamp
