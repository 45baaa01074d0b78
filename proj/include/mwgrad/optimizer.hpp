#pragma once

#include <optional>
#include <vector>

#include "mwgrad/aggregate.hpp"
#include "mwgrad/core.hpp"
#include "mwgrad/kernels.hpp"
#include "mwgrad/nn.hpp"
#include "mwgrad/objectives.hpp"

namespace mwgrad {

/// Coordinates beyond this magnitude abort a run.
inline constexpr double kDivergenceBound = 1e6;

struct OptimizerState {
  ParticleSet particles;
  SimplexWeights weights;
  int iter = 0;
  /// One critic per objective; populated for mwgrad-nn only.
  std::vector<Mlp> nn_params;
};

struct StepResult {
  OptimizerState state;
  TraceRecord trace;
};

/// Throws ConfigError if the objectives cannot drive the configured method
/// (count, dimension, or energy/sample kind).
void check_objectives(const RunConfig& config, const std::vector<Objective>& objectives);

/// Standard-normal particles, uniform weights, freshly initialized critics.
OptimizerState initial_state(const RunConfig& config, const std::vector<Objective>& objectives);

/// Critic specification used by mwgrad-nn for one objective.
VariationalSpec variational_spec_for(const Objective& objective);

/// Per-objective velocity estimates at the current particles with the
/// method's estimator. For mwgrad-nn the critics are trained first and the
/// trained parameters are written to `trained` (one per objective).
VelocityBundle estimate_velocities(const OptimizerState& state,
                                   const std::vector<Objective>& objectives,
                                   const RunConfig& config, std::vector<Mlp>* trained = nullptr);

/// One iteration: estimate velocities, aggregate with w^(t), move particles,
/// then take one projected-gradient step on the weights using the pre-move
/// velocities.
StepResult mwgrad_step(const OptimizerState& state, const std::vector<Objective>& objectives,
                       const RunConfig& config);

/// As mwgrad_step with SVGD velocities, but w is the exact min-norm solution
/// of each iteration's Gram matrix.
StepResult mt_sgd_step(const OptimizerState& state, const std::vector<Objective>& objectives,
                       const RunConfig& config);

/// Per-particle min-norm aggregation: every particle solves its own K x K
/// problem and moves independently. The trace records the mean weights.
StepResult moo_svgd_step(const OptimizerState& state, const std::vector<Objective>& objectives,
                         const RunConfig& config);

/// Dispatches on config.method.
StepResult step(const OptimizerState& state, const std::vector<Objective>& objectives,
                const RunConfig& config);

struct Snapshot {
  int iter;
  ParticleSet particles;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  /// Initial particles, every snapshot_every iterations, and the final state.
  std::vector<Snapshot> snapshots;
  OptimizerState final_state;
};

RunResult run(const RunConfig& config, const std::vector<Objective>& objectives);

/// Plug-in estimate (1/m) sum_i [g(x_i) + log q_hat(x_i)] with q_hat the
/// normalized RBF kernel density of the particles. nullopt for sample targets.
std::optional<double> estimate_functional(const Objective& objective, const ParticleSet& particles,
                                          const RbfKernel& kernel);

/// grad g(x_i) + grad log q_hat(x_i): the exact velocity with q replaced by
/// its kernel density estimate.
RowMatrix reference_velocity(const ParticleSet& particles, const EnergyObjective& obj,
                             const RbfKernel& kde_kernel);

/// (1/m) sum_i |estimate_i - reference_i|^2. Only for d <= 2.
double gradient_error_probe(const ParticleSet& particles, const RowMatrix& estimate,
                            const EnergyObjective& obj, const RbfKernel& kde_kernel);

}  // namespace mwgrad
