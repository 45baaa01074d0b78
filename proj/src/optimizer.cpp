#include "mwgrad/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "mwgrad/rng.hpp"
#include "mwgrad/velocity.hpp"

namespace mwgrad {

namespace {

bool needs_energy(Method m) { return m != Method::MwgradNn; }

const EnergyObjective& as_energy(const Objective& obj) {
  const auto* e = std::get_if<EnergyObjective>(&obj);
  if (e == nullptr) throw InvalidArgument("kernel-based estimators need energy objectives");
  return *e;
}

void check_state(const OptimizerState& state, const std::vector<Objective>& objectives,
                 const RunConfig& config) {
  if (state.weights.size() != static_cast<int>(objectives.size())) {
    throw InvalidArgument("weights length does not match the number of objectives");
  }
  if (state.particles.dim() != config.dim) {
    throw InvalidArgument("particle dimension does not match the configuration");
  }
}

ParticleSet move_particles(const ParticleSet& particles, const RowMatrix& velocity, double alpha,
                           int iteration) {
  RowMatrix next = particles.data() - alpha * velocity;
  for (Eigen::Index i = 0; i < next.rows(); ++i) {
    for (Eigen::Index c = 0; c < next.cols(); ++c) {
      const double v = next(i, c);
      if (!std::isfinite(v)) {
        throw DivergedError(iteration, static_cast<int>(i), "non-finite coordinate");
      }
      if (std::abs(v) > kDivergenceBound) {
        throw DivergedError(iteration, static_cast<int>(i), "coordinate magnitude exceeds 1e6");
      }
    }
  }
  return ParticleSet(std::move(next));
}

std::vector<std::optional<double>> functional_values(const std::vector<Objective>& objectives,
                                                     const ParticleSet& particles,
                                                     const RbfKernel& kernel) {
  std::vector<std::optional<double>> out;
  out.reserve(objectives.size());
  for (const auto& obj : objectives) out.push_back(estimate_functional(obj, particles, kernel));
  return out;
}

/// Trace for iteration t from the pre-move Gram matrix and the weights used.
TraceRecord make_trace(const OptimizerState& state, const std::vector<Objective>& objectives,
                       const RunConfig& config, const GramMatrix& g, const SimplexWeights& used) {
  TraceRecord tr;
  tr.iter = state.iter;
  tr.weights = used;
  tr.grad_norm_sq = std::max(0.0, g.quadratic(used));
  // the simplex minimum cannot exceed the value at any feasible point
  tr.stationarity = std::min(pareto_stationarity(g), tr.grad_norm_sq);
  tr.per_objective_value =
      functional_values(objectives, state.particles, kernel_for(config, state.particles));
  return tr;
}

}  // namespace

void check_objectives(const RunConfig& config, const std::vector<Objective>& objectives) {
  if (static_cast<int>(objectives.size()) != config.num_objectives) {
    throw ConfigError("num_objectives does not match the number of objectives supplied");
  }
  for (const auto& obj : objectives) {
    if (objective_dim(obj) != config.dim) {
      throw ConfigError("objective dimension does not match dim");
    }
    if (needs_energy(config.method) && !std::holds_alternative<EnergyObjective>(obj)) {
      throw ConfigError(std::string(to_string(config.method)) +
                        " requires energy objectives; sample targets need mwgrad-nn");
    }
  }
}

VariationalSpec variational_spec_for(const Objective& objective) {
  if (const auto* e = std::get_if<EnergyObjective>(&objective)) {
    return VariationalSpec::kl_energy(e->target);
  }
  const auto& s = std::get<SampleObjective>(objective);
  return s.divergence() == Divergence::Kl ? VariationalSpec::kl_sample() : VariationalSpec::js();
}

OptimizerState initial_state(const RunConfig& config, const std::vector<Objective>& objectives) {
  config.validate();
  check_objectives(config, objectives);
  OptimizerState state{init_particles(config), init_weights(config.num_objectives), 0, {}};
  if (config.method == Method::MwgradNn) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      Rng rng = substream(config.seed, streams::kNnInit, k);
      const auto act = output_activation_for(variational_spec_for(objectives[k]).kind);
      state.nn_params.push_back(Mlp::random(config.dim, config.nn.hidden_widths, act, rng));
    }
  }
  return state;
}

VelocityBundle estimate_velocities(const OptimizerState& state,
                                   const std::vector<Objective>& objectives,
                                   const RunConfig& config, std::vector<Mlp>* trained) {
  check_state(state, objectives, config);
  std::vector<RowMatrix> slices;
  slices.reserve(objectives.size());
  switch (config.method) {
    case Method::MwgradSvgd:
    case Method::MtSgd:
    case Method::MooSvgd: {
      const RbfKernel kernel = kernel_for(config, state.particles);
      for (const auto& obj : objectives) {
        slices.push_back(
            svgd_velocity(state.particles, as_energy(obj), kernel, config.svgd_normalization));
      }
      break;
    }
    case Method::MwgradBlob: {
      const RbfKernel kernel = kernel_for(config, state.particles);
      for (const auto& obj : objectives) {
        slices.push_back(blob_velocity(state.particles, as_energy(obj), kernel));
      }
      break;
    }
    case Method::MwgradNn: {
      if (state.nn_params.size() != objectives.size()) {
        throw InvalidArgument("mwgrad-nn state needs one critic per objective");
      }
      if (trained != nullptr) trained->clear();
      for (std::size_t k = 0; k < objectives.size(); ++k) {
        const VariationalSpec spec = variational_spec_for(objectives[k]);
        RowMatrix reference;
        if (const auto* s = std::get_if<SampleObjective>(&objectives[k])) {
          reference = s->samples();
        } else {
          Rng rng = substream(config.seed, streams::kNnReference, k,
                              static_cast<std::uint64_t>(state.iter));
          reference = rng.standard_normal(config.nn.reference_samples, config.dim);
        }
        Mlp critic = train_variational(spec, state.nn_params[k], state.particles.data(), reference,
                                       config.nn.train_steps, config.nn.train_step_size);
        slices.push_back(nn_velocity(critic, state.particles, spec));
        if (trained != nullptr) trained->push_back(std::move(critic));
      }
      break;
    }
  }
  return VelocityBundle(std::move(slices));
}

StepResult mwgrad_step(const OptimizerState& state, const std::vector<Objective>& objectives,
                       const RunConfig& config) {
  std::vector<Mlp> trained;
  const VelocityBundle bundle = estimate_velocities(state, objectives, config, &trained);
  const GramMatrix g = gram_matrix(bundle, config.gram_normalization);
  const RowMatrix v = aggregate_velocity(bundle, state.weights);

  StepResult out{
      OptimizerState{move_particles(state.particles, v, config.step_size_alpha, state.iter),
                     update_weights(state.weights, g, config.step_size_beta), state.iter + 1,
                     config.method == Method::MwgradNn ? std::move(trained) : state.nn_params},
      make_trace(state, objectives, config, g, state.weights)};
  return out;
}

StepResult mt_sgd_step(const OptimizerState& state, const std::vector<Objective>& objectives,
                       const RunConfig& config) {
  RunConfig svgd = config;
  svgd.method = Method::MtSgd;
  const VelocityBundle bundle = estimate_velocities(state, objectives, svgd);
  const GramMatrix g = gram_matrix(bundle, config.gram_normalization);
  SimplexWeights w = min_norm_exact(g);
  const RowMatrix v = aggregate_velocity(bundle, w);
  TraceRecord tr = make_trace(state, objectives, config, g, w);
  return StepResult{OptimizerState{move_particles(state.particles, v, config.step_size_alpha,
                                                  state.iter),
                                   std::move(w), state.iter + 1, {}},
                    std::move(tr)};
}

StepResult moo_svgd_step(const OptimizerState& state, const std::vector<Objective>& objectives,
                         const RunConfig& config) {
  RunConfig svgd = config;
  svgd.method = Method::MooSvgd;
  const VelocityBundle bundle = estimate_velocities(state, objectives, svgd);
  const int k = bundle.num_objectives();
  const int m = bundle.num_particles();
  RowMatrix v(m, bundle.dim());
  Vector mean_w = Vector::Zero(k);
  const std::vector<SimplexWeights> per_particle = per_particle_min_norm(bundle);
  for (int i = 0; i < m; ++i) {
    const SimplexWeights& wi = per_particle[static_cast<std::size_t>(i)];
    v.row(i) = wi[0] * bundle.slice(0).row(i);
    for (int a = 1; a < k; ++a) v.row(i) += wi[a] * bundle.slice(a).row(i);
    mean_w += wi.values();
  }
  mean_w /= static_cast<double>(m);
  const GramMatrix g = gram_matrix(bundle, config.gram_normalization);
  SimplexWeights recorded = project_simplex(mean_w);
  TraceRecord tr = make_trace(state, objectives, config, g, recorded);
  return StepResult{OptimizerState{move_particles(state.particles, v, config.step_size_alpha,
                                                  state.iter),
                                   std::move(recorded), state.iter + 1, {}},
                    std::move(tr)};
}

StepResult step(const OptimizerState& state, const std::vector<Objective>& objectives,
                const RunConfig& config) {
  switch (config.method) {
    case Method::MtSgd:
      return mt_sgd_step(state, objectives, config);
    case Method::MooSvgd:
      return moo_svgd_step(state, objectives, config);
    default:
      return mwgrad_step(state, objectives, config);
  }
}

RunResult run(const RunConfig& config, const std::vector<Objective>& objectives) {
  OptimizerState state = initial_state(config, objectives);
  RunResult result{{}, {}, state};
  result.trace.reserve(static_cast<std::size_t>(config.num_iterations));
  result.snapshots.push_back({0, state.particles});
  for (int t = 0; t < config.num_iterations; ++t) {
    StepResult s = step(state, objectives, config);
    result.trace.push_back(std::move(s.trace));
    state = std::move(s.state);
    if (state.iter % config.snapshot_every == 0 || state.iter == config.num_iterations) {
      result.snapshots.push_back({state.iter, state.particles});
    }
  }
  result.final_state = std::move(state);
  return result;
}

std::optional<double> estimate_functional(const Objective& objective, const ParticleSet& particles,
                                          const RbfKernel& kernel) {
  const auto* e = std::get_if<EnergyObjective>(&objective);
  if (e == nullptr) return std::nullopt;
  const RowMatrix& x = particles.data();
  const double m = static_cast<double>(x.rows());
  const double d = static_cast<double>(x.cols());
  // exp(-gamma r^2) integrates to (pi / gamma)^{d/2}
  const double log_norm = 0.5 * d * std::log(kernel.gamma() / std::numbers::pi);
  const Vector sums = rbf_gram(kernel, x).rowwise().sum();
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    total += potential(*e, x.row(i).transpose()) + std::log(sums[i] / m) + log_norm;
  }
  return total / m;
}

RowMatrix reference_velocity(const ParticleSet& particles, const EnergyObjective& obj,
                             const RbfKernel& kde_kernel) {
  const RowMatrix& x = particles.data();
  const Matrix k = rbf_gram(kde_kernel, x);
  RowMatrix out = potential_grads(obj, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(x.cols());
    double den = 0.0;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      num -= (2.0 * kde_kernel.gamma() * k(i, j)) * (x.row(i) - x.row(j));
      den += k(i, j);
    }
    out.row(i) += num / den;
  }
  return out;
}

double gradient_error_probe(const ParticleSet& particles, const RowMatrix& estimate,
                            const EnergyObjective& obj, const RbfKernel& kde_kernel) {
  if (particles.dim() > 2) throw InvalidArgument("gradient error probe supports d <= 2 only");
  if (estimate.rows() != particles.size() || estimate.cols() != particles.dim()) {
    throw InvalidArgument("velocity estimate shape does not match particles");
  }
  const RowMatrix ref = reference_velocity(particles, obj, kde_kernel);
  return (estimate - ref).rowwise().squaredNorm().mean();
}

}  // namespace mwgrad
