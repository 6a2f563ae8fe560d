#include "lintsamp/density_grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lintsamp/config.hpp"

namespace lintsamp {
namespace {

constexpr char kRawMagic[4] = {'L', 'S', 'M', 'P'};
constexpr std::uint8_t kRawVersion = 1;

// Compensated accumulation; cell masses can span many orders of magnitude.
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

std::string coords_to_string(const Eigen::VectorXd& x) {
  std::ostringstream out;
  out << "(";
  for (Eigen::Index d = 0; d < x.size(); ++d) out << (d ? ", " : "") << x[d];
  out << ")";
  return out.str();
}

}  // namespace

DensityGrid::DensityGrid(std::vector<Eigen::VectorXd> edges) : edges_(std::move(edges)) {
  const int k = static_cast<int>(edges_.size());
  if (k < 1 || k > kDimMax)
    throw std::invalid_argument("DensityGrid: dimension must be in [1, " +
                                std::to_string(kDimMax) + "], got " + std::to_string(k));

  std::int64_t vertices = 1;
  for (int d = 0; d < k; ++d) {
    const Eigen::VectorXd& e = edges_[d];
    if (e.size() < 2)
      throw std::invalid_argument("DensityGrid: edges[" + std::to_string(d) +
                                  "] needs at least 2 entries");
    for (Eigen::Index i = 0; i + 1 < e.size(); ++i)
      if (!(e[i] < e[i + 1]))
        throw std::invalid_argument("DensityGrid: edges[" + std::to_string(d) +
                                    "] not strictly increasing at position " +
                                    std::to_string(i));
    if (!e.allFinite())
      throw std::invalid_argument("DensityGrid: edges[" + std::to_string(d) +
                                  "] contains non-finite values");
    if (vertices > kVertexMax / e.size())
      throw std::overflow_error("DensityGrid: vertex count exceeds limit of " +
                                std::to_string(kVertexMax));
    vertices *= e.size();
    vertex_shape_.push_back(e.size());
    cell_shape_.push_back(e.size() - 1);
  }

  vertex_stride_.assign(k, 1);
  cell_stride_.assign(k, 1);
  for (int d = k - 2; d >= 0; --d) {
    vertex_stride_[d] = vertex_stride_[d + 1] * vertex_shape_[d + 1];
    cell_stride_[d] = cell_stride_[d + 1] * cell_shape_[d + 1];
  }
}

DensityGrid::DensityGrid(std::vector<Eigen::VectorXd> edges, const PdfCallback& pdf)
    : DensityGrid(std::move(edges)) {
  const int k = dim();
  const Eigen::Index n_vertices = vertex_stride_[0] * vertex_shape_[0];

  // All vertex coordinates in flat order, evaluated in one batched call.
  Eigen::MatrixXd points(n_vertices, k);
  std::vector<Eigen::Index> idx(k, 0);
  for (Eigen::Index flat = 0; flat < n_vertices; ++flat) {
    for (int d = 0; d < k; ++d) points(flat, d) = edges_[d][idx[d]];
    for (int d = k - 1; d >= 0; --d) {
      if (++idx[d] < vertex_shape_[d]) break;
      idx[d] = 0;
    }
  }
  set_vertex_density(pdf(points));
}

DensityGrid::DensityGrid(std::vector<Eigen::VectorXd> edges, Eigen::VectorXd vertex_density)
    : DensityGrid(std::move(edges)) {
  set_vertex_density(std::move(vertex_density));
}

void DensityGrid::set_vertex_density(Eigen::VectorXd values) {
  const Eigen::Index n_vertices = vertex_stride_[0] * vertex_shape_[0];
  if (values.size() != n_vertices)
    throw std::invalid_argument("DensityGrid: expected " + std::to_string(n_vertices) +
                                " vertex densities, got " + std::to_string(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0)
      throw std::invalid_argument(
          "DensityGrid: invalid density " + std::to_string(values[i]) + " at vertex " +
          std::to_string(i) + " " + coords_to_string(vertex_coordinates(i)));
  }
  vertex_density_ = std::move(values);
  finalize_masses();
}

void DensityGrid::finalize_masses() {
  const int k = dim();
  const Eigen::Index n_cells = cell_stride_[0] * cell_shape_[0];
  const Eigen::Index n_corners = Eigen::Index{1} << k;
  cell_masses_.resize(n_cells);

  KahanSum total;
  std::vector<Eigen::Index> idx(k, 0);
  for (Eigen::Index c = 0; c < n_cells; ++c) {
    Eigen::Index base = 0;
    double volume = 1.0;
    for (int d = 0; d < k; ++d) {
      base += idx[d] * vertex_stride_[d];
      volume *= edges_[d][idx[d] + 1] - edges_[d][idx[d]];
    }
    double corner_sum = 0.0;
    for (Eigen::Index mask = 0; mask < n_corners; ++mask) {
      Eigen::Index v = base;
      for (int d = 0; d < k; ++d)
        if ((mask >> d) & 1) v += vertex_stride_[d];
      corner_sum += vertex_density_[v];
    }
    cell_masses_[c] = volume * corner_sum / static_cast<double>(n_corners);
    total.add(cell_masses_[c]);

    for (int d = k - 1; d >= 0; --d) {
      if (++idx[d] < cell_shape_[d]) break;
      idx[d] = 0;
    }
  }

  total_mass_ = total.value();
  if (!(total_mass_ > 0.0))
    throw std::invalid_argument("DensityGrid: total mass is zero (all-zero grid)");

  cum_mass_.resize(n_cells);
  double running = 0.0;
  for (Eigen::Index c = 0; c < n_cells; ++c) {
    running += cell_masses_[c];
    cum_mass_[c] = std::min(running / total_mass_, 1.0);
  }
  cum_mass_[n_cells - 1] = 1.0;
}

Extent DensityGrid::extent() const {
  const int k = dim();
  Extent e{Eigen::VectorXd(k), Eigen::VectorXd(k)};
  for (int d = 0; d < k; ++d) {
    e.lo[d] = edges_[d][0];
    e.hi[d] = edges_[d][edges_[d].size() - 1];
  }
  return e;
}

Cell DensityGrid::cell(Eigen::Index index) const {
  const int k = dim();
  const Eigen::Index n_cells = cell_count();
  if (index < 0 || index >= n_cells)
    throw std::out_of_range("DensityGrid::cell: index " + std::to_string(index) +
                            " outside [0, " + std::to_string(n_cells) + ")");

  Eigen::VectorXd lo(k), hi(k);
  Eigen::Index base = 0;
  Eigen::Index rest = index;
  for (int d = 0; d < k; ++d) {
    const Eigen::Index i = rest / cell_stride_[d];
    rest %= cell_stride_[d];
    lo[d] = edges_[d][i];
    hi[d] = edges_[d][i + 1];
    base += i * vertex_stride_[d];
  }

  const Eigen::Index n_corners = Eigen::Index{1} << k;
  Eigen::VectorXd corners(n_corners);
  for (Eigen::Index mask = 0; mask < n_corners; ++mask) {
    Eigen::Index v = base;
    for (int d = 0; d < k; ++d)
      if ((mask >> d) & 1) v += vertex_stride_[d];
    corners[mask] = vertex_density_[v];
  }
  return Cell(std::move(lo), std::move(hi), std::move(corners));
}

Eigen::VectorXd DensityGrid::vertex_coordinates(Eigen::Index flat) const {
  const int k = dim();
  Eigen::VectorXd x(k);
  Eigen::Index rest = flat;
  for (int d = 0; d < k; ++d) {
    x[d] = edges_[d][rest / vertex_stride_[d]];
    rest %= vertex_stride_[d];
  }
  return x;
}

std::uint64_t DensityGrid::fingerprint() const {
  detail::Fnv1a h;
  h.update_u64(0x47u);  // 'G'
  h.update_u64(static_cast<std::uint64_t>(dim()));
  for (const Eigen::VectorXd& e : edges_) {
    h.update_u64(static_cast<std::uint64_t>(e.size()));
    h.update_doubles(e.data(), static_cast<std::size_t>(e.size()));
  }
  h.update_doubles(vertex_density_.data(), static_cast<std::size_t>(vertex_density_.size()));
  return h.digest();
}

DensityGrid DensityGrid::from_vertex_file(std::vector<Eigen::VectorXd> edges,
                                          const std::string& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");

  if (format == FileFormat::kAuto) {
    char magic[4] = {};
    in.read(magic, 4);
    format = (in.gcount() == 4 && std::memcmp(magic, kRawMagic, 4) == 0) ? FileFormat::kRaw
                                                                         : FileFormat::kText;
    in.seekg(0);
  }

  DensityGrid skeleton(std::move(edges));
  const Eigen::Index n_vertices = skeleton.vertex_stride_[0] * skeleton.vertex_shape_[0];
  Eigen::VectorXd values(n_vertices);

  if (format == FileFormat::kText) {
    std::string line;
    Eigen::Index count = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (count >= n_vertices)
        throw std::invalid_argument("vertex file '" + path + "': more than " +
                                    std::to_string(n_vertices) + " values");
      try {
        values[count] = std::stod(line);
      } catch (const std::exception&) {
        throw std::invalid_argument("vertex file '" + path + "': unparseable value at index " +
                                    std::to_string(count));
      }
      if (!std::isfinite(values[count]) || values[count] < 0.0)
        throw std::invalid_argument("vertex file '" + path + "': invalid density at index " +
                                    std::to_string(count));
      ++count;
    }
    if (count != n_vertices)
      throw std::invalid_argument("vertex file '" + path + "': expected " +
                                  std::to_string(n_vertices) + " values, got " +
                                  std::to_string(count));
  } else {
    char header[16] = {};
    in.read(header, 16);
    if (in.gcount() != 16 || std::memcmp(header, kRawMagic, 4) != 0)
      throw io_error("vertex file '" + path + "': bad magic");
    if (static_cast<std::uint8_t>(header[4]) != kRawVersion)
      throw io_error("vertex file '" + path + "': unsupported version");
    const int k = static_cast<std::uint8_t>(header[5]);
    if (k != skeleton.dim())
      throw std::invalid_argument("vertex file '" + path + "': dimension " + std::to_string(k) +
                                  " does not match edges (" + std::to_string(skeleton.dim()) + ")");
    for (int d = 0; d < k; ++d) {
      std::uint32_t n = 0;
      in.read(reinterpret_cast<char*>(&n), 4);
      if (!in || n != static_cast<std::uint32_t>(skeleton.vertex_shape_[d]))
        throw std::invalid_argument("vertex file '" + path + "': vertex count mismatch in dim " +
                                    std::to_string(d));
    }
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n_vertices * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(n_vertices * sizeof(double)))
      throw std::invalid_argument("vertex file '" + path + "': truncated payload");
    char extra;
    if (in.read(&extra, 1))
      throw std::invalid_argument("vertex file '" + path + "': trailing bytes");
    for (Eigen::Index i = 0; i < n_vertices; ++i)
      if (!std::isfinite(values[i]) || values[i] < 0.0)
        throw std::invalid_argument("vertex file '" + path + "': invalid density at index " +
                                    std::to_string(i));
  }

  skeleton.set_vertex_density(std::move(values));
  return skeleton;
}

void DensityGrid::write_vertex_file(const std::string& path, FileFormat format) const {
  if (format == FileFormat::kAuto) format = FileFormat::kRaw;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");

  if (format == FileFormat::kText) {
    char buf[64];
    for (Eigen::Index i = 0; i < vertex_density_.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", vertex_density_[i]);
      out << buf;
    }
  } else {
    char header[16] = {};
    std::memcpy(header, kRawMagic, 4);
    header[4] = static_cast<char>(kRawVersion);
    header[5] = static_cast<char>(dim());
    out.write(header, 16);
    for (int d = 0; d < dim(); ++d) {
      const auto n = static_cast<std::uint32_t>(vertex_shape_[d]);
      out.write(reinterpret_cast<const char*>(&n), 4);
    }
    out.write(reinterpret_cast<const char*>(vertex_density_.data()),
              static_cast<std::streamsize>(vertex_density_.size() * sizeof(double)));
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

}  // namespace lintsamp
