#include "lintsamp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "lintsamp/cell.hpp"

namespace lintsamp {
namespace {

const double kBelowOne = std::nextafter(1.0, 0.0);

}  // namespace

LintSampler::LintSampler(std::shared_ptr<const DensityStructure> structure, VariateStream stream)
    : LintSampler(std::vector<std::shared_ptr<const DensityStructure>>{std::move(structure)},
                  std::move(stream)) {}

LintSampler::LintSampler(std::vector<std::shared_ptr<const DensityStructure>> structures,
                         VariateStream stream)
    : structures_(std::move(structures)), stream_(std::move(stream)) {
  if (structures_.empty()) throw std::invalid_argument("LintSampler: empty structure list");
  for (const auto& s : structures_)
    if (!s) throw std::invalid_argument("LintSampler: null structure");

  const int k = structures_.front()->dim();
  for (const auto& s : structures_)
    if (s->dim() != k)
      throw std::invalid_argument("LintSampler: structures must share one dimension");
  if (stream_.width() != k + 1)
    throw std::invalid_argument("LintSampler: stream width " + std::to_string(stream_.width()) +
                                " does not match required k+1 = " + std::to_string(k + 1));

  double mass_sum = 0.0;
  for (const auto& s : structures_) mass_sum += s->total_mass();
  if (!(mass_sum > 0.0))
    throw std::invalid_argument("LintSampler: structures carry no mass");

  structure_cum_.resize(static_cast<Eigen::Index>(structures_.size()));
  double running = 0.0;
  for (std::size_t i = 0; i < structures_.size(); ++i) {
    running += structures_[i]->total_mass();
    structure_cum_[static_cast<Eigen::Index>(i)] = std::min(running / mass_sum, 1.0);
  }
  structure_cum_[structure_cum_.size() - 1] = 1.0;

  if (structures_.size() == 1) {
    fingerprint_ = structures_.front()->fingerprint();
  } else {
    detail::Fnv1a h;
    for (const auto& s : structures_) h.update_u64(s->fingerprint());
    fingerprint_ = h.digest();
  }
}

void LintSampler::fill_rows(const VariateStream& stream, std::uint64_t first_row,
                            Eigen::Index count, Eigen::Index dest_offset,
                            Eigen::MatrixXd& points) const {
  const int k = dim();
  Eigen::VectorXd u(k);
  for (Eigen::Index i = 0; i < count; ++i) {
    const std::uint64_t row = first_row + static_cast<std::uint64_t>(i);
    double u0 = stream.value_at(row, 0);

    // Structure choice and cell choice share u0: the residual of the discrete
    // inverse transform, rescaled, is again uniform on [0,1).
    std::size_t s = 0;
    if (structures_.size() > 1) {
      const double* begin = structure_cum_.data();
      const double* it = std::upper_bound(begin, begin + structure_cum_.size(), u0);
      s = std::min<std::size_t>(static_cast<std::size_t>(it - begin), structures_.size() - 1);
      const double before = (s == 0) ? 0.0 : structure_cum_[static_cast<Eigen::Index>(s) - 1];
      const double frac = structure_cum_[static_cast<Eigen::Index>(s)] - before;
      u0 = std::clamp((u0 - before) / frac, 0.0, kBelowOne);
    }

    const DensityStructure& structure = *structures_[s];
    const Eigen::Index cell_index = choose_cell(structure, u0);
    const Cell cell = structure.cell(cell_index);
    for (int d = 0; d < k; ++d) u[d] = stream.value_at(row, d + 1);
    points.row(dest_offset + i) = sample_within_cell(cell, u).transpose();
  }
}

SampleBatch LintSampler::sample(Eigen::Index n, int threads) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  if (threads < 1) throw std::invalid_argument("sample: threads must be >= 1");

  SampleBatch batch;
  batch.points.resize(n, dim());
  batch.meta.seed = stream_.seed();
  batch.meta.stream_kind = stream_.kind();
  batch.meta.scrambled = stream_.is_scrambled();
  batch.meta.structure_fingerprint = fingerprint_;
  batch.meta.count = n;

  const std::uint64_t base = stream_.position();
  threads = static_cast<int>(std::min<Eigen::Index>(threads, n));
  if (threads == 1) {
    fill_rows(stream_, base, n, 0, batch.points);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (int w = 0; w < threads; ++w) {
      const Eigen::Index begin = n * w / threads;
      const Eigen::Index end = n * (w + 1) / threads;
      workers.emplace_back([this, &batch, base, begin, end] {
        fill_rows(stream_, base + static_cast<std::uint64_t>(begin), end - begin, begin,
                  batch.points);
      });
    }
    for (auto& worker : workers) worker.join();
  }

  stream_.skip_to(base + static_cast<std::uint64_t>(n));
  return batch;
}

LintSampler::StreamingRun LintSampler::sample_streamed(Eigen::Index n, Eigen::Index chunk,
                                                       int threads) {
  if (n < 1) throw std::invalid_argument("sample_streamed: n must be >= 1");
  if (chunk < 1) throw std::invalid_argument("sample_streamed: chunk must be >= 1");
  return StreamingRun(*this, n, chunk, threads);
}

SampleBatch LintSampler::StreamingRun::next() {
  if (remaining_ == 0) throw std::logic_error("StreamingRun: already exhausted");
  const Eigen::Index take = std::min(chunk_, remaining_);
  remaining_ -= take;
  return sampler_->sample(take, threads_);
}

}  // namespace lintsamp
