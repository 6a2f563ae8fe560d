#include "lintsamp/density_tree.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lintsamp/config.hpp"

namespace lintsamp {
namespace {

class KahanSum {
 public:
  void add(double value) {
    const double y = value - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

int pow3(int k) {
  int p = 1;
  while (k-- > 0) p *= 3;
  return p;
}

std::vector<std::uint64_t> coord_key(const Eigen::VectorXd& x) {
  std::vector<std::uint64_t> key(x.size());
  std::memcpy(key.data(), x.data(), sizeof(double) * x.size());
  return key;
}

}  // namespace

std::size_t DensityTree::VectorHash::operator()(const std::vector<std::uint64_t>& key) const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (std::uint64_t w : key) {
    h ^= w;
    h *= 0x100000001B3ull;
  }
  return static_cast<std::size_t>(h);
}

Leaf DensityTree::make_leaf(Eigen::VectorXd lo, Eigen::VectorXd hi, Eigen::VectorXd corners,
                            int depth, double center_value) const {
  Leaf leaf;
  leaf.lo = std::move(lo);
  leaf.hi = std::move(hi);
  leaf.corners = std::move(corners);
  leaf.depth = depth;
  leaf.center_value = center_value;
  const double volume = leaf.volume();
  const double corner_mean = leaf.corners.mean();
  leaf.mass = volume * corner_mean;
  // interpolate() at the center equals the corner mean
  leaf.err = std::abs(center_value - corner_mean) * volume;
  return leaf;
}

Eigen::VectorXd DensityTree::evaluate_centers(const std::vector<Eigen::VectorXd>& centers) {
  Eigen::MatrixXd points(static_cast<Eigen::Index>(centers.size()), dim());
  for (std::size_t i = 0; i < centers.size(); ++i)
    points.row(static_cast<Eigen::Index>(i)) = centers[i].transpose();
  return (*pdf_)(points);
}

DensityTree::DensityTree(Eigen::VectorXd lo, Eigen::VectorXd hi, PdfCallback pdf, Options options)
    : root_lo_(std::move(lo)), root_hi_(std::move(hi)), pdf_(std::move(pdf)), options_(options) {
  const int k = dim();
  if (k < 1 || k > kDimMax)
    throw std::invalid_argument("DensityTree: dimension must be in [1, " +
                                std::to_string(kDimMax) + "]");
  if (root_hi_.size() != root_lo_.size())
    throw std::invalid_argument("DensityTree: lo/hi size mismatch");
  if (!root_lo_.allFinite() || !root_hi_.allFinite() ||
      !((root_hi_ - root_lo_).array() > 0.0).all())
    throw std::invalid_argument("DensityTree: invalid root box");
  if (!(options_.tol_rel > 0.0))
    throw std::invalid_argument("DensityTree: tol_rel must be positive");
  if (options_.min_depth < 0 || options_.min_depth > options_.max_depth)
    throw std::invalid_argument("DensityTree: need 0 <= min_depth <= max_depth");
  if (options_.max_leaves < 1)
    throw std::invalid_argument("DensityTree: max_leaves must be >= 1");

  const Eigen::Index n_corners = Eigen::Index{1} << k;

  // Root corners go through the vertex cache like every other grid vertex.
  Eigen::MatrixXd pts(n_corners, k);
  for (Eigen::Index mask = 0; mask < n_corners; ++mask)
    for (int d = 0; d < k; ++d)
      pts(mask, d) = ((mask >> d) & 1) ? root_hi_[d] : root_lo_[d];
  Eigen::VectorXd corner_values = (*pdf_)(pts);
  for (Eigen::Index mask = 0; mask < n_corners; ++mask) {
    if (!std::isfinite(corner_values[mask]) || corner_values[mask] < 0.0)
      throw std::invalid_argument("DensityTree: invalid density at root corner " +
                                  std::to_string(mask));
    vertex_cache_.emplace(coord_key(pts.row(mask).transpose()), corner_values[mask]);
  }

  const double center_value = evaluate_centers({0.5 * (root_lo_ + root_hi_)})[0];
  leaves_.push_back(make_leaf(root_lo_, root_hi_, std::move(corner_values), 0, center_value));
  err_sum_ = leaves_[0].err;
  total_mass_ = leaves_[0].mass;

  // Uniform refinement to min_depth, then error-driven splitting.
  const Eigen::Index growth = n_corners - 1;
  for (std::size_t i = 0; i < leaves_.size();) {
    if (leaves_[i].depth < options_.min_depth &&
        static_cast<Eigen::Index>(leaves_.size()) + growth <= options_.max_leaves) {
      split_impl(static_cast<Eigen::Index>(i));
    } else {
      ++i;
    }
  }

  refine_loop(std::numeric_limits<Eigen::Index>::max(), true);
  rebuild_tables();
  tolerance_met_ = err_sum_ <= options_.tol_rel * total_mass_;

  if (!(total_mass_ > 0.0))
    throw std::invalid_argument("DensityTree: total mass is zero over the root box");
}

std::vector<double> DensityTree::lattice_values(const Leaf& parent) {
  const int k = dim();
  const int n_lattice = pow3(k);
  std::vector<double> lattice(n_lattice);

  Eigen::VectorXd mid = 0.5 * (parent.lo + parent.hi);
  std::vector<Eigen::Index> pending;
  std::vector<Eigen::VectorXd> pending_coords;

  for (int lidx = 0; lidx < n_lattice; ++lidx) {
    int rest = lidx;
    bool is_corner = true;
    Eigen::Index corner_mask = 0;
    Eigen::VectorXd coords(k);
    for (int d = 0; d < k; ++d) {
      const int level = rest % 3;
      rest /= 3;
      if (level == 1) is_corner = false;
      if (level == 2) corner_mask |= Eigen::Index{1} << d;
      coords[d] = (level == 0) ? parent.lo[d] : (level == 2) ? parent.hi[d] : mid[d];
    }
    if (is_corner) {
      lattice[lidx] = parent.corners[corner_mask];
      continue;
    }
    auto it = vertex_cache_.find(coord_key(coords));
    if (it != vertex_cache_.end()) {
      lattice[lidx] = it->second;
    } else {
      pending.push_back(lidx);
      pending_coords.push_back(std::move(coords));
    }
  }

  if (!pending.empty()) {
    Eigen::MatrixXd points(static_cast<Eigen::Index>(pending.size()), k);
    for (std::size_t i = 0; i < pending.size(); ++i)
      points.row(static_cast<Eigen::Index>(i)) = pending_coords[i].transpose();
    Eigen::VectorXd values = (*pdf_)(points);
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0) {
        std::ostringstream msg;
        msg << "DensityTree: invalid density " << values[i] << " at (";
        for (int d = 0; d < k; ++d) msg << (d ? ", " : "") << pending_coords[i][d];
        msg << ")";
        throw std::invalid_argument(msg.str());
      }
      lattice[pending[i]] = values[static_cast<Eigen::Index>(i)];
      vertex_cache_.emplace(coord_key(pending_coords[i]), values[static_cast<Eigen::Index>(i)]);
    }
  }
  return lattice;
}

void DensityTree::split_impl(Eigen::Index leaf_index) {
  const int k = dim();
  const Eigen::Index n_children = Eigen::Index{1} << k;
  const Leaf parent = leaves_[static_cast<std::size_t>(leaf_index)];

  const std::vector<double> lattice = lattice_values(parent);
  Eigen::VectorXd mid = 0.5 * (parent.lo + parent.hi);

  // Per-dimension lattice strides are powers of 3 (level 0/1/2 per trit).
  std::vector<int> stride3(k);
  stride3[0] = 1;
  for (int d = 1; d < k; ++d) stride3[d] = stride3[d - 1] * 3;

  std::vector<Leaf> children;
  children.reserve(n_children);
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(n_children);

  for (Eigen::Index child = 0; child < n_children; ++child) {
    Eigen::VectorXd lo(k), hi(k);
    for (int d = 0; d < k; ++d) {
      const bool upper = (child >> d) & 1;
      lo[d] = upper ? mid[d] : parent.lo[d];
      hi[d] = upper ? parent.hi[d] : mid[d];
    }
    Eigen::VectorXd corners(n_children);
    for (Eigen::Index b = 0; b < n_children; ++b) {
      int lidx = 0;
      for (int d = 0; d < k; ++d)
        lidx += (static_cast<int>((child >> d) & 1) + static_cast<int>((b >> d) & 1)) * stride3[d];
      corners[b] = lattice[lidx];
    }
    centers.push_back(0.5 * (lo + hi));
    Leaf c;
    c.lo = std::move(lo);
    c.hi = std::move(hi);
    c.corners = std::move(corners);
    c.depth = parent.depth + 1;
    children.push_back(std::move(c));
  }

  const Eigen::VectorXd center_values = evaluate_centers(centers);
  for (Eigen::Index i = 0; i < n_children; ++i) {
    auto& c = children[static_cast<std::size_t>(i)];
    c = make_leaf(std::move(c.lo), std::move(c.hi), std::move(c.corners), c.depth,
                  center_values[i]);
    err_sum_ += c.err;
    total_mass_ += c.mass;
  }
  err_sum_ -= parent.err;
  total_mass_ -= parent.mass;

  auto it = leaves_.erase(leaves_.begin() + leaf_index);
  leaves_.insert(it, std::make_move_iterator(children.begin()),
                 std::make_move_iterator(children.end()));
}

void DensityTree::refine_loop(Eigen::Index max_splits, bool respect_tolerance) {
  const Eigen::Index growth = (Eigen::Index{1} << dim()) - 1;
  for (Eigen::Index splits = 0; splits < max_splits; ++splits) {
    if (respect_tolerance && err_sum_ <= options_.tol_rel * total_mass_) break;
    if (static_cast<Eigen::Index>(leaves_.size()) + growth > options_.max_leaves) break;

    // Largest error first; ties go to the smallest leaf order index.
    Eigen::Index best = -1;
    double best_err = 0.0;
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      if (leaves_[i].depth >= options_.max_depth) continue;
      if (leaves_[i].err > best_err) {
        best_err = leaves_[i].err;
        best = static_cast<Eigen::Index>(i);
      }
    }
    if (best < 0) break;  // nothing splittable improves the estimate
    split_impl(best);
  }
}

void DensityTree::rebuild_tables() {
  KahanSum mass, err;
  for (const Leaf& leaf : leaves_) {
    mass.add(leaf.mass);
    err.add(leaf.err);
  }
  total_mass_ = mass.value();
  err_sum_ = err.value();

  cum_mass_.resize(static_cast<Eigen::Index>(leaves_.size()));
  if (total_mass_ > 0.0) {
    double running = 0.0;
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      running += leaves_[i].mass;
      cum_mass_[static_cast<Eigen::Index>(i)] = std::min(running / total_mass_, 1.0);
    }
    cum_mass_[cum_mass_.size() - 1] = 1.0;
  } else {
    cum_mass_.setZero();
  }
}

void DensityTree::refine(Eigen::Index extra_budget) {
  if (!pdf_) throw std::logic_error("DensityTree::refine: tree was loaded without a PDF");
  if (extra_budget < 0) throw std::invalid_argument("refine: negative budget");
  refine_loop(extra_budget, false);
  rebuild_tables();
  tolerance_met_ = err_sum_ <= options_.tol_rel * total_mass_;
}

void DensityTree::split_leaf(Eigen::Index leaf_index) {
  if (!pdf_) throw std::logic_error("DensityTree::split_leaf: tree was loaded without a PDF");
  if (leaf_index < 0 || leaf_index >= cell_count())
    throw std::out_of_range("split_leaf: leaf index out of range");
  if (leaves_[static_cast<std::size_t>(leaf_index)].depth >= options_.max_depth)
    throw std::runtime_error("split_leaf: leaf is at the depth limit");
  split_impl(leaf_index);
  rebuild_tables();
}

Cell DensityTree::cell(Eigen::Index index) const {
  if (index < 0 || index >= cell_count())
    throw std::out_of_range("DensityTree::cell: index " + std::to_string(index) +
                            " outside [0, " + std::to_string(cell_count()) + ")");
  const Leaf& leaf = leaves_[static_cast<std::size_t>(index)];
  return Cell(leaf.lo, leaf.hi, leaf.corners);
}

std::uint64_t DensityTree::fingerprint() const {
  detail::Fnv1a h;
  h.update_u64(0x54u);  // 'T'
  h.update_u64(static_cast<std::uint64_t>(dim()));
  h.update_u64(static_cast<std::uint64_t>(leaves_.size()));
  for (const Leaf& leaf : leaves_) {
    h.update_u64(static_cast<std::uint64_t>(leaf.depth));
    h.update_doubles(leaf.lo.data(), static_cast<std::size_t>(leaf.lo.size()));
    h.update_doubles(leaf.hi.data(), static_cast<std::size_t>(leaf.hi.size()));
    h.update_doubles(leaf.corners.data(), static_cast<std::size_t>(leaf.corners.size()));
  }
  return h.digest();
}

void DensityTree::dump(std::ostream& out) const {
  char buf[64];
  for (const Leaf& leaf : leaves_) {
    out << leaf.depth;
    auto emit = [&](double v) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    };
    for (Eigen::Index d = 0; d < leaf.lo.size(); ++d) emit(leaf.lo[d]);
    for (Eigen::Index d = 0; d < leaf.hi.size(); ++d) emit(leaf.hi[d]);
    for (Eigen::Index c = 0; c < leaf.corners.size(); ++c) emit(leaf.corners[c]);
    emit(leaf.err);
    out << "\n";
  }
}

void DensityTree::dump_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  dump(out);
  if (!out) throw io_error("failed writing '" + path + "'");
}

DensityTree DensityTree::load(std::istream& in) {
  DensityTree tree;
  std::string line;
  int k = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream tokens(line);
    std::vector<double> values;
    double v;
    while (tokens >> v) values.push_back(v);

    if (k == 0) {
      // token count is 2 + 2k + 2^k, strictly increasing in k
      for (int guess = 1; guess <= kDimMax; ++guess) {
        if (values.size() == static_cast<std::size_t>(2 + 2 * guess + (1 << guess))) {
          k = guess;
          break;
        }
      }
      if (k == 0) throw std::invalid_argument("tree load: unrecognized line layout");
    } else if (values.size() != static_cast<std::size_t>(2 + 2 * k + (1 << k))) {
      throw std::invalid_argument("tree load: inconsistent line layout");
    }

    Leaf leaf;
    leaf.depth = static_cast<int>(values[0]);
    if (leaf.depth < 0 || values[0] != leaf.depth)
      throw std::invalid_argument("tree load: bad depth field");
    leaf.lo = Eigen::Map<const Eigen::VectorXd>(values.data() + 1, k);
    leaf.hi = Eigen::Map<const Eigen::VectorXd>(values.data() + 1 + k, k);
    leaf.corners = Eigen::Map<const Eigen::VectorXd>(values.data() + 1 + 2 * k, 1 << k);
    leaf.err = values.back();
    if (!((leaf.hi - leaf.lo).array() > 0.0).all())
      throw std::invalid_argument("tree load: leaf with non-positive width");
    if (!(leaf.corners.array() >= 0.0).all() || leaf.err < 0.0)
      throw std::invalid_argument("tree load: negative corner density or error");
    leaf.center_value = std::numeric_limits<double>::quiet_NaN();
    leaf.mass = leaf.volume() * leaf.corners.mean();
    tree.leaves_.push_back(std::move(leaf));
  }
  if (tree.leaves_.empty()) throw std::invalid_argument("tree load: no leaves");

  tree.root_lo_ = tree.leaves_[0].lo;
  tree.root_hi_ = tree.leaves_[0].hi;
  for (const Leaf& leaf : tree.leaves_) {
    tree.root_lo_ = tree.root_lo_.cwiseMin(leaf.lo);
    tree.root_hi_ = tree.root_hi_.cwiseMax(leaf.hi);
  }
  tree.rebuild_tables();
  if (!(tree.total_mass_ > 0.0))
    throw std::invalid_argument("tree load: total mass is zero");
  tree.tolerance_met_ = tree.err_sum_ <= tree.options_.tol_rel * tree.total_mass_;
  return tree;
}

DensityTree DensityTree::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  return load(in);
}

}  // namespace lintsamp
