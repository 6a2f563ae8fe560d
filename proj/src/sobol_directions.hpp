#pragma once

#include <cstdint>

namespace lintsamp::detail {

// Number of Sobol dimensions covered by the shipped table, counting the
// van der Corput dimension (index 0) that needs no table entry.
inline constexpr int kSobolTableDims = 21201;

// Primitive polynomial bit patterns and initial direction values m_1..m_s for
// dimensions 2..21201, flattened; see sobol_directions.cpp for provenance.
extern const std::uint32_t kSobolPoly[21200];
extern const std::uint32_t kSobolMinit[354613];

}  // namespace lintsamp::detail
