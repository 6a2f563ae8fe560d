#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>

namespace lintsamp {

// Batched density callback: maps a B x k matrix of points to B non-negative
// (possibly unnormalized) density values. Carries a shared counter of how
// many points have been evaluated, so callers can audit that structure
// construction — and never sampling — pays for PDF evaluations.
class PdfCallback {
 public:
  using BatchFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
  using PointFn = std::function<double(const Eigen::VectorXd&)>;

  explicit PdfCallback(BatchFn fn)
      : fn_(std::move(fn)), count_(std::make_shared<std::atomic<std::int64_t>>(0)) {
    if (!fn_) throw std::invalid_argument("PdfCallback: empty function");
  }

  // Convenience adapter for a one-point-at-a-time density.
  static PdfCallback pointwise(PointFn fn) {
    if (!fn) throw std::invalid_argument("PdfCallback: empty function");
    return PdfCallback([fn = std::move(fn)](const Eigen::MatrixXd& pts) {
      Eigen::VectorXd out(pts.rows());
      for (Eigen::Index i = 0; i < pts.rows(); ++i) out[i] = fn(pts.row(i).transpose());
      return out;
    });
  }

  Eigen::VectorXd operator()(const Eigen::MatrixXd& points) const {
    count_->fetch_add(points.rows(), std::memory_order_relaxed);
    Eigen::VectorXd values = fn_(points);
    if (values.size() != points.rows())
      throw std::runtime_error("PdfCallback: callback returned wrong number of values");
    return values;
  }

  // Total points evaluated through any copy of this callback.
  std::int64_t evaluations() const { return count_->load(std::memory_order_relaxed); }

  void reset_evaluations() const { count_->store(0, std::memory_order_relaxed); }

 private:
  BatchFn fn_;
  std::shared_ptr<std::atomic<std::int64_t>> count_;
};

}  // namespace lintsamp
