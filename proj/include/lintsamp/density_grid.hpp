#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lintsamp/density_structure.hpp"
#include "lintsamp/pdf.hpp"

namespace lintsamp {

enum class FileFormat { kAuto, kText, kRaw };

// Cartesian product of per-dimension edge arrays with cached vertex
// densities, per-cell masses and the cumulative mass table. Edges may be
// arbitrarily uneven. Vertex densities are stored row-major with dimension 0
// slowest; cells use the same ordering. Immutable once built.
class DensityGrid final : public DensityStructure {
 public:
  // Evaluates the PDF once, in a single batched call over all vertices.
  DensityGrid(std::vector<Eigen::VectorXd> edges, const PdfCallback& pdf);

  // Builds from precomputed vertex densities (row-major, dimension 0 slowest).
  DensityGrid(std::vector<Eigen::VectorXd> edges, Eigen::VectorXd vertex_density);

  // Reads vertex densities from a file previously written by
  // write_vertex_file (or produced externally). kAuto sniffs the raw magic.
  static DensityGrid from_vertex_file(std::vector<Eigen::VectorXd> edges,
                                      const std::string& path,
                                      FileFormat format = FileFormat::kAuto);

  // kText: one value per line. kRaw: 16-byte header (magic "LSMP", u8
  // version=1, u8 k, zero padding), k little-endian u32 vertex counts, then
  // the vertex densities as little-endian float64. Raw round-trips bit-exactly.
  void write_vertex_file(const std::string& path, FileFormat format = FileFormat::kRaw) const;

  int dim() const override { return static_cast<int>(edges_.size()); }
  double total_mass() const override { return total_mass_; }
  Extent extent() const override;
  Eigen::Index cell_count() const override { return cell_masses_.size(); }
  const Eigen::VectorXd& cum_mass() const override { return cum_mass_; }
  Cell cell(Eigen::Index index) const override;
  std::uint64_t fingerprint() const override;

  const std::vector<Eigen::VectorXd>& edges() const { return edges_; }
  const Eigen::VectorXd& vertex_density() const { return vertex_density_; }
  const Eigen::VectorXd& cell_masses() const { return cell_masses_; }
  Eigen::Index vertex_count() const { return vertex_density_.size(); }

  // Coordinates of a vertex by flat row-major index.
  Eigen::VectorXd vertex_coordinates(Eigen::Index flat) const;

 private:
  explicit DensityGrid(std::vector<Eigen::VectorXd> edges);
  void set_vertex_density(Eigen::VectorXd values);
  void finalize_masses();

  std::vector<Eigen::VectorXd> edges_;
  Eigen::VectorXd vertex_density_;
  Eigen::VectorXd cell_masses_;
  Eigen::VectorXd cum_mass_;
  double total_mass_ = 0.0;
  std::vector<Eigen::Index> vertex_shape_, cell_shape_;
  std::vector<Eigen::Index> vertex_stride_, cell_stride_;
};

}  // namespace lintsamp
