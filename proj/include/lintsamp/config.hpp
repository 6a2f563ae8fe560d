#pragma once

#include <cstdint>
#include <stdexcept>

namespace lintsamp {

// Hard cap on problem dimension. Vertex counts grow as 2^k per cell, so
// anything much beyond this is impractical to evaluate or store anyway.
inline constexpr int kDimMax = 10;

// Upper bound on the number of grid vertices a single structure may hold.
inline constexpr std::int64_t kVertexMax = 100'000'000;

// Tolerance for accepting unit-interval inputs that drifted by rounding.
inline constexpr double kUnitTol = 1e-12;

// Raised by file readers/writers; the CLI maps it to its I/O exit code.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lintsamp
