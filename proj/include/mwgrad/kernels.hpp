#pragma once

#include "mwgrad/core.hpp"

namespace mwgrad {

/// K(x, y) = exp(-gamma * |x - y|^2).
class RbfKernel {
 public:
  explicit RbfKernel(double gamma);
  double gamma() const noexcept { return gamma_; }

 private:
  double gamma_;
};

double rbf_eval(const RbfKernel& k, const Eigen::Ref<const Vector>& x,
                const Eigen::Ref<const Vector>& y);

/// Gradient with respect to the second argument: 2 gamma (x - y) K(x, y).
Vector rbf_grad_y(const RbfKernel& k, const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& y);

/// Kernel matrix [K(x_i, x_j)] over the rows of `points`.
Matrix rbf_gram(const RbfKernel& k, const RowMatrix& points);

/// Median heuristic: gamma = log(m + 1) / median(|x_i - x_j|^2).
/// Falls back to `fallback` when m < 2 or the median distance vanishes.
double median_heuristic_gamma(const RowMatrix& points, double fallback);

/// Kernel for the current particles under the configured bandwidth rule.
RbfKernel kernel_for(const RunConfig& config, const ParticleSet& particles);

}  // namespace mwgrad
