#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lintsamp/config.hpp"

namespace lintsamp {

// One axis-aligned box with density values on its 2^k corners. Corner index
// convention, used library-wide: bit d of the corner mask selects the upper
// edge in dimension d, and dimension 0 is the least significant bit.
struct Cell {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  Eigen::VectorXd corners;

  Cell() = default;

  Cell(Eigen::VectorXd lo_, Eigen::VectorXd hi_, Eigen::VectorXd corners_)
      : lo(std::move(lo_)), hi(std::move(hi_)), corners(std::move(corners_)) {
    const Eigen::Index k = lo.size();
    if (k < 1 || k > kDimMax)
      throw std::invalid_argument("Cell: dimension must be in [1, " +
                                  std::to_string(kDimMax) + "], got " +
                                  std::to_string(k));
    if (hi.size() != k)
      throw std::invalid_argument("Cell: lo/hi size mismatch");
    if (corners.size() != (Eigen::Index{1} << k))
      throw std::invalid_argument("Cell: expected " +
                                  std::to_string(Eigen::Index{1} << k) +
                                  " corner values, got " +
                                  std::to_string(corners.size()));
    if (!((hi - lo).array() > 0.0).all())
      throw std::invalid_argument("Cell: widths must be strictly positive");
    if (!(corners.array() >= 0.0).all() || !corners.allFinite())
      throw std::invalid_argument("Cell: corner densities must be finite and non-negative");
  }

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
};

namespace detail {

// Collapse the working corner array along its lowest-bit dimension at
// parameter t: g'[m] = (1-t) g[2m] + t g[2m+1].
inline Eigen::VectorXd reduce_lowest_dim(const Eigen::VectorXd& g, double t) {
  const Eigen::Index half = g.size() / 2;
  return (1.0 - t) * g(Eigen::seqN(0, half, 2)) + t * g(Eigen::seqN(1, half, 2));
}

}  // namespace detail

// Multilinear interpolant at unit-cube coordinates t: sum over corner masks c
// of corners[c] * prod_d (t[d] if bit d of c else 1-t[d]). Reproduces corner
// values exactly at the corners.
template <typename Derived>
double interpolate(const Cell& cell, const Eigen::MatrixBase<Derived>& t) {
  const int k = cell.dim();
  if (t.size() != k) throw std::invalid_argument("interpolate: t has wrong dimension");
  Eigen::VectorXd g = cell.corners;
  for (int d = 0; d < k; ++d) {
    double td = t[d];
    if (td < -kUnitTol || td > 1.0 + kUnitTol)
      throw std::domain_error("interpolate: t[" + std::to_string(d) +
                              "] = " + std::to_string(td) + " outside [0,1]");
    td = std::clamp(td, 0.0, 1.0);
    g = detail::reduce_lowest_dim(g, td);
  }
  return g[0];
}

// Integral of the interpolant over the cell: volume times the corner mean.
inline double cell_mass(const Cell& cell) {
  return cell.volume() * cell.corners.mean();
}

// Inverse CDF of the normalized linear density p(t) ∝ a + (b-a) t on [0,1].
// Quadratic closed form; falls back to the uniform branch when b ≈ a, where
// the formula loses precision. Output clamped to [0,1].
inline double inverse_linear_cdf(double a, double b, double u) {
  if (a < 0.0 || b < 0.0)
    throw std::invalid_argument("inverse_linear_cdf: endpoint densities must be non-negative");
  if (u < 0.0 || u > 1.0)
    throw std::domain_error("inverse_linear_cdf: u outside [0,1]");
  if (a + b <= 0.0)
    throw std::domain_error("inverse_linear_cdf: zero-mass density (a + b = 0)");
  if (std::abs(b - a) < 1e-14 * (a + b)) return u;
  const double t = (-a + std::sqrt(a * a + u * (b * b - a * a))) / (b - a);
  return std::clamp(t, 0.0, 1.0);
}

// Draw one point from the normalized multilinear interpolant over the cell,
// consuming one uniform variate per dimension. Sequential conditional scheme:
// each dimension is sampled from its marginal linear density given the
// coordinates already fixed, then the corner array is collapsed along it.
template <typename Derived>
Eigen::VectorXd sample_within_cell(const Cell& cell, const Eigen::MatrixBase<Derived>& u) {
  const int k = cell.dim();
  if (u.size() != k) throw std::invalid_argument("sample_within_cell: u has wrong dimension");
  if (!(cell_mass(cell) > 0.0))
    throw std::domain_error("sample_within_cell: cell has zero mass");

  Eigen::VectorXd g = cell.corners;
  Eigen::VectorXd x(k);
  for (int d = 0; d < k; ++d) {
    const double ud = u[d];
    if (ud < 0.0 || ud >= 1.0)
      throw std::domain_error("sample_within_cell: u[" + std::to_string(d) +
                              "] outside [0,1)");
    const Eigen::Index half = g.size() / 2;
    const double a = g(Eigen::seqN(0, half, 2)).mean();
    const double b = g(Eigen::seqN(1, half, 2)).mean();
    // A conditional slice of zero density can only be reached on a
    // measure-zero set of earlier coordinates; fall through to uniform.
    const double td = (a + b > 0.0) ? inverse_linear_cdf(a, b, ud) : ud;
    g = detail::reduce_lowest_dim(g, td);
    x[d] = cell.lo[d] + td * (cell.hi[d] - cell.lo[d]);
  }
  return x;
}

}  // namespace lintsamp
