#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lintsamp/density_structure.hpp"
#include "lintsamp/pdf.hpp"

namespace lintsamp {

// A leaf cell of the adaptive tree: geometry plus the cached density at its
// center and the mass-error estimate that drives refinement.
struct Leaf {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  Eigen::VectorXd corners;
  int depth = 0;
  double center_value = 0.0;
  double err = 0.0;
  double mass = 0.0;

  double volume() const { return (hi - lo).prod(); }
};

// Adaptive 2^k-ary tree over a root box. Every split bisects a leaf at its
// midpoint in all dimensions; the leaf with the largest error estimate is
// split first until the total estimated mass error drops below
// tol_rel * total_mass or the budget runs out. Leaves are kept in depth-first
// order, so the cumulative mass table is reproducible. Corner densities are
// shared between neighbouring leaves through a vertex cache keyed on exact
// coordinate bits; the error probe at each leaf center costs one extra
// evaluation per leaf.
class DensityTree final : public DensityStructure {
 public:
  struct Options {
    double tol_rel = 1e-3;
    int max_depth = 16;
    Eigen::Index max_leaves = 100000;
    int min_depth = 2;
  };

  DensityTree(Eigen::VectorXd lo, Eigen::VectorXd hi, PdfCallback pdf, Options options = {});

  // Continues largest-error-first splitting for up to extra_budget splits,
  // ignoring the tolerance. No-op when every splittable leaf has zero error.
  void refine(Eigen::Index extra_budget);

  // Splits one leaf by index, regardless of its error estimate.
  void split_leaf(Eigen::Index leaf_index);

  int dim() const override { return static_cast<int>(root_lo_.size()); }
  double total_mass() const override { return total_mass_; }
  Extent extent() const override { return {root_lo_, root_hi_}; }
  Eigen::Index cell_count() const override { return static_cast<Eigen::Index>(leaves_.size()); }
  const Eigen::VectorXd& cum_mass() const override { return cum_mass_; }
  Cell cell(Eigen::Index index) const override;
  std::uint64_t fingerprint() const override;

  const std::vector<Leaf>& leaves() const { return leaves_; }
  const Options& options() const { return options_; }
  double err_total() const { return err_sum_; }
  // Achieved sum(err) / total_mass.
  double err_ratio() const { return err_sum_ / total_mass_; }
  // False when construction exhausted its budget above the tolerance.
  bool tolerance_met() const { return tolerance_met_; }

  // One leaf per line, depth-first: depth, lo..., hi..., corners..., err.
  void dump(std::ostream& out) const;
  void dump_file(const std::string& path) const;

  // Rebuilds a sampleable tree from dump output. The result has no PDF
  // attached and cannot be refined further.
  static DensityTree load(std::istream& in);
  static DensityTree load_file(const std::string& path);

 private:
  DensityTree() = default;  // for load()

  struct VectorHash {
    std::size_t operator()(const std::vector<std::uint64_t>& key) const;
  };

  Leaf make_leaf(Eigen::VectorXd lo, Eigen::VectorXd hi, Eigen::VectorXd corners, int depth,
                 double center_value) const;
  std::vector<double> lattice_values(const Leaf& parent);
  void split_impl(Eigen::Index leaf_index);
  void refine_loop(Eigen::Index max_splits, bool respect_tolerance);
  void rebuild_tables();
  Eigen::VectorXd evaluate_centers(const std::vector<Eigen::VectorXd>& centers);

  Eigen::VectorXd root_lo_, root_hi_;
  std::optional<PdfCallback> pdf_;
  Options options_;
  std::vector<Leaf> leaves_;
  std::unordered_map<std::vector<std::uint64_t>, double, VectorHash> vertex_cache_;
  Eigen::VectorXd cum_mass_;
  double total_mass_ = 0.0;
  double err_sum_ = 0.0;
  bool tolerance_met_ = true;
};

}  // namespace lintsamp
