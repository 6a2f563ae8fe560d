#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "lintsamp/density_structure.hpp"
#include "lintsamp/variate_stream.hpp"

namespace lintsamp {

// A batch of drawn points plus the provenance needed to reproduce it.
struct SampleBatch {
  Eigen::MatrixXd points;  // N x k, one point per row
  struct Meta {
    std::uint64_t seed = 0;
    StreamKind stream_kind = StreamKind::kPseudorandom;
    bool scrambled = false;
    std::uint64_t structure_fingerprint = 0;
    Eigen::Index count = 0;
  } meta;
};

// End-to-end sampler over one or several density structures (which may tile
// disjoint regions of space). Each variate row of width k+1 drives one draw:
// column 0 picks the structure and, rescaled, the cell within it; columns
// 1..k place the point inside the cell. Sampling never evaluates the PDF.
class LintSampler {
 public:
  LintSampler(std::shared_ptr<const DensityStructure> structure, VariateStream stream);
  LintSampler(std::vector<std::shared_ptr<const DensityStructure>> structures,
              VariateStream stream);

  // Draws n points, advancing the stream by n rows. With threads > 1 the row
  // range is partitioned and generated via stream skip-ahead; the output is
  // element-for-element identical to the serial run.
  SampleBatch sample(Eigen::Index n, int threads = 1);

  // Generator over chunks whose concatenation is identical to a one-shot
  // sample(n) with the same stream.
  class StreamingRun {
   public:
    bool done() const { return remaining_ == 0; }
    SampleBatch next();

   private:
    friend class LintSampler;
    StreamingRun(LintSampler& sampler, Eigen::Index remaining, Eigen::Index chunk, int threads)
        : sampler_(&sampler), remaining_(remaining), chunk_(chunk), threads_(threads) {}
    LintSampler* sampler_;
    Eigen::Index remaining_;
    Eigen::Index chunk_;
    int threads_;
  };
  StreamingRun sample_streamed(Eigen::Index n, Eigen::Index chunk, int threads = 1);

  int dim() const { return structures_.front()->dim(); }
  Eigen::Index structure_count() const { return static_cast<Eigen::Index>(structures_.size()); }
  // Combined digest over all structures (the structure's own digest when
  // there is exactly one).
  std::uint64_t fingerprint() const { return fingerprint_; }
  const VariateStream& stream() const { return stream_; }
  VariateStream& stream() { return stream_; }

 private:
  void fill_rows(const VariateStream& stream, std::uint64_t first_row, Eigen::Index count,
                 Eigen::Index dest_offset, Eigen::MatrixXd& points) const;

  std::vector<std::shared_ptr<const DensityStructure>> structures_;
  Eigen::VectorXd structure_cum_;
  std::uint64_t fingerprint_ = 0;
  VariateStream stream_;
};

}  // namespace lintsamp
