#include "mwgrad/velocity.hpp"

#include <cmath>

namespace mwgrad {

namespace {

void check_points(const RowMatrix& points, int dim) {
  if (points.cols() != dim) throw InvalidArgument("particle dimension does not match objective");
}

}  // namespace

RowMatrix svgd_velocity_from_drift(const RowMatrix& points, const RowMatrix& drift,
                                   const RbfKernel& kernel, SvgdNormalization norm) {
  if (drift.rows() != points.rows() || drift.cols() != points.cols()) {
    throw InvalidArgument("drift shape does not match particles");
  }
  const Eigen::Index m = points.rows();
  const double two_gamma = 2.0 * kernel.gamma();
  const Matrix k = rbf_gram(kernel, points);
  RowMatrix out = RowMatrix::Zero(m, points.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double kij = k(i, j);
      out.row(i) += kij * drift.row(j);
      out.row(i) -= (two_gamma * kij) * (points.row(i) - points.row(j));
    }
  }
  if (norm == SvgdNormalization::Mean) out /= static_cast<double>(m);
  return out;
}

RowMatrix svgd_velocity(const ParticleSet& particles, const EnergyObjective& obj,
                        const RbfKernel& kernel, SvgdNormalization norm) {
  check_points(particles.data(), obj.target.dim());
  return svgd_velocity_from_drift(particles.data(), potential_grads(obj, particles.data()), kernel,
                                  norm);
}

RowMatrix blob_velocity(const ParticleSet& particles, const EnergyObjective& obj,
                        const RbfKernel& kernel) {
  const RowMatrix& x = particles.data();
  check_points(x, obj.target.dim());
  const Eigen::Index m = x.rows();
  const double two_gamma = 2.0 * kernel.gamma();
  const Matrix k = rbf_gram(kernel, x);
  const Vector row_sums = k.rowwise().sum();
  RowMatrix out = potential_grads(obj, x);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      // grad_{x_j} K(x_i, x_j), shared by both repulsion terms
      const Eigen::RowVectorXd grad = (two_gamma * k(i, j)) * (x.row(i) - x.row(j));
      out.row(i) -= grad / row_sums[j];
      out.row(i) -= grad / row_sums[i];
    }
  }
  return out;
}

RowMatrix nn_velocity(const Mlp& critic, const ParticleSet& particles,
                      const VariationalSpec& spec) {
  if (critic.output_activation() != output_activation_for(spec.kind)) {
    throw InvalidArgument("critic output activation does not match the variational spec");
  }
  const RowMatrix& x = particles.data();
  RowMatrix grads = mlp_input_grads(critic, x);
  if (spec.kind == VariationalKind::KlSample) return grads;

  const Vector out = mlp_forward_batch(critic, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double h = out[i];
    if (spec.kind == VariationalKind::KlEnergy) {
      if (!(h > 0.0)) throw NumericDomainError("kl-energy critic output must be positive");
      grads.row(i) /= h;
      grads.row(i) += base_log_ratio_grad(spec, x.row(i).transpose()).transpose();
    } else {
      if (!(h > 0.0 && h < 1.0)) throw NumericDomainError("js critic output must lie in (0, 1)");
      grads.row(i) *= -1.0 / (2.0 * (1.0 - h));
    }
  }
  return grads;
}

double recovered_first_variation(const Mlp& critic, const VariationalSpec& spec,
                                 const Eigen::Ref<const Vector>& x) {
  const double h = mlp_forward(critic, x);
  switch (spec.kind) {
    case VariationalKind::KlSample:
      return h;
    case VariationalKind::KlEnergy:
      return std::log(h) + base_log_ratio(spec, x);
    case VariationalKind::Js:
      return 0.5 * std::log((1.0 - h) / 2.0);
  }
  return h;
}

}  // namespace mwgrad
