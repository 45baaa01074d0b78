#include "mwgrad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mwgrad {

namespace {

void check_pair(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw InvalidArgument("kernel arguments differ in dimension");
}

double squared_distance(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double diff = x[c] - y[c];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

RbfKernel::RbfKernel(double gamma) : gamma_(gamma) {
  if (!std::isfinite(gamma) || gamma <= 0.0) {
    throw InvalidArgument("RBF gamma must be positive and finite");
  }
}

double rbf_eval(const RbfKernel& k, const Eigen::Ref<const Vector>& x,
                const Eigen::Ref<const Vector>& y) {
  check_pair(x, y);
  return std::exp(-k.gamma() * squared_distance(x, y));
}

Vector rbf_grad_y(const RbfKernel& k, const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& y) {
  check_pair(x, y);
  const double kv = std::exp(-k.gamma() * squared_distance(x, y));
  return (2.0 * k.gamma() * kv) * (x - y);
}

Matrix rbf_gram(const RbfKernel& k, const RowMatrix& points) {
  const auto m = points.rows();
  Matrix gram(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    gram(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double v =
          std::exp(-k.gamma() * squared_distance(points.row(i).transpose(), points.row(j).transpose()));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  return gram;
}

double median_heuristic_gamma(const RowMatrix& points, double fallback) {
  const auto m = points.rows();
  if (m < 2) return fallback;
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      d2.push_back(squared_distance(points.row(i).transpose(), points.row(j).transpose()));
    }
  }
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  if (*mid < 1e-12) return fallback;
  return std::log(static_cast<double>(m) + 1.0) / *mid;
}

RbfKernel kernel_for(const RunConfig& config, const ParticleSet& particles) {
  if (config.bandwidth == BandwidthRule::Median) {
    return RbfKernel(median_heuristic_gamma(particles.data(), config.kernel_gamma));
  }
  return RbfKernel(config.kernel_gamma);
}

}  // namespace mwgrad
