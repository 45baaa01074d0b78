#pragma once

#include "mwgrad/core.hpp"
#include "mwgrad/kernels.hpp"
#include "mwgrad/nn.hpp"
#include "mwgrad/objectives.hpp"

namespace mwgrad {

/// Kernelized drift plus repulsion:
///   v(x_i) = sum_j K(x_i, x_j) drift_j - sum_j grad_{x_j} K(x_i, x_j),
/// divided by m when `norm` is Mean. `drift` row j is the potential gradient at x_j.
RowMatrix svgd_velocity_from_drift(const RowMatrix& points, const RowMatrix& drift,
                                   const RbfKernel& kernel,
                                   SvgdNormalization norm = SvgdNormalization::Sum);

RowMatrix svgd_velocity(const ParticleSet& particles, const EnergyObjective& obj,
                        const RbfKernel& kernel, SvgdNormalization norm = SvgdNormalization::Sum);

/// Kernel-smoothed entropy (blob) estimate:
///   v(x_i) = grad g(x_i) - sum_j grad_{x_j}K(x_i,x_j) / sum_l K(x_j,x_l)
///                        - sum_j grad_{x_j}K(x_i,x_j) / sum_l K(x_i,x_l).
RowMatrix blob_velocity(const ParticleSet& particles, const EnergyObjective& obj,
                        const RbfKernel& kernel);

/// Gradient of the recovered first variation h at every particle, undoing the
/// critic's change of variables. Throws NumericDomainError when h' leaves its
/// admissible range.
RowMatrix nn_velocity(const Mlp& critic, const ParticleSet& particles,
                      const VariationalSpec& spec);

/// The recovered scalar h(x) whose gradient nn_velocity returns.
double recovered_first_variation(const Mlp& critic, const VariationalSpec& spec,
                                 const Eigen::Ref<const Vector>& x);

}  // namespace mwgrad
