#include <gtest/gtest.h>

#include <cmath>

#include "mwgrad/optimizer.hpp"
#include "mwgrad/velocity.hpp"
#include "oracles.hpp"

using namespace mwgrad;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

RowMatrix rows2(std::initializer_list<std::pair<double, double>> pts) {
  RowMatrix r(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (auto [a, b] : pts) r(i, 0) = a, r(i, 1) = b, ++i;
  return r;
}

EnergyObjective shifted_normal(double a, double b) {
  return EnergyObjective{GaussianMixture::isotropic({1.0}, {v2(a, b)})};
}

std::vector<Objective> four_targets() {
  std::vector<Objective> out;
  for (const auto& gm : sample_targets_from_paper()) out.emplace_back(EnergyObjective{gm});
  return out;
}

RunConfig small_config(Method method, int iterations = 30) {
  RunConfig cfg;
  cfg.method = method;
  cfg.num_particles = 12;
  cfg.num_iterations = iterations;
  cfg.step_size_alpha = 1e-2;
  cfg.seed = 5;
  cfg.snapshot_every = 10;
  cfg.nn.hidden_widths = {8, 8};
  cfg.nn.train_steps = 3;
  cfg.nn.reference_samples = 16;
  return cfg;
}

void expect_same_trace(const std::vector<TraceRecord>& a, const std::vector<TraceRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].iter, b[t].iter);
    EXPECT_EQ(a[t].weights, b[t].weights);
    EXPECT_EQ(a[t].stationarity, b[t].stationarity);
    EXPECT_EQ(a[t].grad_norm_sq, b[t].grad_norm_sq);
    EXPECT_EQ(a[t].per_objective_value, b[t].per_objective_value);
  }
}

}  // namespace

TEST(MwgradStep, SingleParticleSingleObjective) {
  RunConfig cfg;
  cfg.num_particles = 1;
  cfg.num_objectives = 1;
  cfg.step_size_alpha = 0.1;
  const std::vector<Objective> objs{EnergyObjective{GaussianMixture::standard_normal(2)}};
  const OptimizerState s{ParticleSet(rows2({{2, 0}})), init_weights(1), 0, {}};
  const StepResult r = mwgrad_step(s, objs, cfg);
  EXPECT_EQ(r.state.particles.data(), rows2({{1.8, 0}}));
  EXPECT_EQ(r.state.weights.values(), Vector::Ones(1));
  EXPECT_EQ(r.state.iter, 1);
  EXPECT_EQ(r.trace.iter, 0);
  EXPECT_NEAR(r.trace.grad_norm_sq, 4.0, 1e-15);
}

TEST(MwgradStep, DoesNotMutateInput) {
  const auto objs = four_targets();
  const RunConfig cfg = small_config(Method::MwgradSvgd);
  const OptimizerState s = initial_state(cfg, objs);
  const OptimizerState copy = s;
  const StepResult r = step(s, objs, cfg);
  EXPECT_EQ(s.particles, copy.particles);
  EXPECT_EQ(s.weights, copy.weights);
  EXPECT_EQ(s.iter, copy.iter);
  EXPECT_FALSE(r.state.particles == s.particles);
}

TEST(MwgradStep, UsesPreMoveGramForWeights) {
  const auto objs = four_targets();
  const RunConfig cfg = small_config(Method::MwgradSvgd);
  const OptimizerState s = initial_state(cfg, objs);
  const VelocityBundle b = estimate_velocities(s, objs, cfg);
  const GramMatrix g = gram_matrix(b, cfg.gram_normalization);
  const StepResult r = mwgrad_step(s, objs, cfg);
  EXPECT_EQ(r.state.weights, update_weights(s.weights, g, cfg.step_size_beta));
  const RowMatrix expected = s.particles.data() - cfg.step_size_alpha * aggregate_velocity(b, s.weights);
  EXPECT_EQ(r.state.particles.data(), expected);
}

TEST(Run, DeterministicUnderSeed) {
  const auto objs = four_targets();
  for (Method m : all_methods()) {
    const RunConfig cfg = small_config(m, 10);
    const RunResult a = run(cfg, objs);
    const RunResult b = run(cfg, objs);
    expect_same_trace(a.trace, b.trace);
    EXPECT_EQ(a.final_state.particles, b.final_state.particles);
  }
}

TEST(Run, TraceLengthAndSnapshots) {
  const auto objs = four_targets();
  RunConfig cfg = small_config(Method::MwgradSvgd, 25);
  const RunResult r = run(cfg, objs);
  EXPECT_EQ(r.trace.size(), 25u);
  std::vector<int> iters;
  for (const auto& s : r.snapshots) iters.push_back(s.iter);
  EXPECT_EQ(iters, (std::vector<int>{0, 10, 20, 25}));
  cfg.num_iterations = 1;
  EXPECT_EQ(run(cfg, objs).trace.size(), 1u);
  cfg.num_iterations = 0;
  EXPECT_THROW(run(cfg, objs), ConfigError);
}

TEST(Run, StationarityNeverExceedsCurrentWeightsValue) {
  const auto objs = four_targets();
  for (Method m : all_methods()) {
    const RunResult r = run(small_config(m, 15), objs);
    for (const auto& tr : r.trace) {
      EXPECT_LE(tr.stationarity, tr.grad_norm_sq) << to_string(m);
      EXPECT_GE(tr.stationarity, 0.0);
    }
  }
}

TEST(SingleObjective, KernelMethodsShareOneTrajectory) {
  const std::vector<Objective> objs{four_targets()[0]};
  RunConfig base = small_config(Method::MwgradSvgd, 20);
  base.num_objectives = 1;
  const RunResult ref = run(base, objs);
  // plain single-objective SVGD loop
  RowMatrix x = init_particles(base).data();
  const auto& obj = std::get<EnergyObjective>(objs[0]);
  for (int t = 0; t < 20; ++t) {
    x -= base.step_size_alpha * svgd_velocity(ParticleSet(x), obj, RbfKernel(base.kernel_gamma));
  }
  EXPECT_EQ(ref.final_state.particles.data(), x);
  for (Method m : {Method::MtSgd, Method::MooSvgd}) {
    RunConfig cfg = base;
    cfg.method = m;
    const RunResult r = run(cfg, objs);
    EXPECT_EQ(r.final_state.particles, ref.final_state.particles) << to_string(m);
    for (const auto& tr : r.trace) EXPECT_EQ(tr.weights.values(), Vector::Ones(1));
  }
}

TEST(SingleObjective, BlobMatchesPlainLoop) {
  const std::vector<Objective> objs{four_targets()[1]};
  RunConfig cfg = small_config(Method::MwgradBlob, 20);
  cfg.num_objectives = 1;
  RowMatrix x = init_particles(cfg).data();
  const auto& obj = std::get<EnergyObjective>(objs[0]);
  for (int t = 0; t < 20; ++t) {
    x -= cfg.step_size_alpha * blob_velocity(ParticleSet(x), obj, RbfKernel(cfg.kernel_gamma));
  }
  EXPECT_EQ(run(cfg, objs).final_state.particles.data(), x);
}

TEST(SingleObjective, NnMatchesPlainLoop) {
  Rng s = substream(8, "test-samples");
  const std::vector<Objective> objs{
      SampleObjective(draw_target_samples(sample_targets_from_paper()[0], 30, s), Divergence::Js)};
  RunConfig cfg = small_config(Method::MwgradNn, 8);
  cfg.num_objectives = 1;
  const RunResult r = run(cfg, objs);
  RowMatrix x = init_particles(cfg).data();
  Rng init = substream(cfg.seed, streams::kNnInit, 0);
  Mlp critic = Mlp::random(2, cfg.nn.hidden_widths, OutputActivation::Sigmoid, init);
  const auto& target = std::get<SampleObjective>(objs[0]).samples();
  for (int t = 0; t < 8; ++t) {
    critic = train_variational(VariationalSpec::js(), critic, x, target, cfg.nn.train_steps,
                               cfg.nn.train_step_size);
    x -= cfg.step_size_alpha * nn_velocity(critic, ParticleSet(x), VariationalSpec::js());
  }
  EXPECT_EQ(r.final_state.particles.data(), x);
  for (const auto& tr : r.trace) EXPECT_FALSE(tr.per_objective_value[0].has_value());
}

TEST(MtSgdStep, SymmetricConflictGivesUniformWeights) {
  RunConfig cfg;
  cfg.num_particles = 1;
  cfg.num_objectives = 2;
  cfg.method = Method::MtSgd;
  const std::vector<Objective> objs{shifted_normal(1, 0), shifted_normal(0, 1)};
  const OptimizerState s{ParticleSet(rows2({{0, 0}})), init_weights(2), 0, {}};
  const VelocityBundle b = estimate_velocities(s, objs, cfg);
  EXPECT_EQ(gram_matrix(b, GramNormalization::Sum).matrix(), Matrix::Identity(2, 2));
  const StepResult r = mt_sgd_step(s, objs, cfg);
  EXPECT_NEAR(r.state.weights[0], 0.5, 1e-12);
  EXPECT_NEAR(r.state.weights[1], 0.5, 1e-12);
}

TEST(MtSgdStep, ProjectedGradientWeightsApproachMinNorm) {
  Matrix g(3, 3);
  g << 3.0, 0.5, -1.0, 0.5, 2.0, 0.2, -1.0, 0.2, 1.5;
  const GramMatrix gm(g);
  const double target = gm.quadratic(min_norm_exact(gm));
  SimplexWeights w = init_weights(3);
  for (int t = 0; t < 5000; ++t) w = update_weights(w, gm, 0.1);
  EXPECT_LT(gm.quadratic(w) - target, 1e-6);
  EXPECT_GE(gm.quadratic(w) - target, -1e-12);
}

TEST(MooSvgdStep, ExactConflictParticleDoesNotMove) {
  RunConfig cfg;
  cfg.num_particles = 1;
  cfg.num_objectives = 2;
  cfg.method = Method::MooSvgd;
  const std::vector<Objective> objs{shifted_normal(1, 0), shifted_normal(-1, 0)};
  const OptimizerState s{ParticleSet(rows2({{0, 0}})), init_weights(2), 0, {}};
  const StepResult r = moo_svgd_step(s, objs, cfg);
  EXPECT_EQ(r.state.particles, s.particles);
  EXPECT_NEAR(r.state.weights[0], 0.5, 1e-12);
}

TEST(MooSvgdStep, ParticlesGetTheirOwnWeights) {
  // particle 0: G_0 = diag(4, 1); particle 1: G_1 = [[1, 1], [1, 4]]
  const VelocityBundle b({rows2({{2, 0}, {1, 0}}), rows2({{0, 1}, {1, std::sqrt(3.0)}})});
  const auto w = per_particle_min_norm(b);
  ASSERT_EQ(w.size(), 2u);
  const std::vector<Matrix> grams{(Matrix(2, 2) << 4, 0, 0, 1).finished(),
                                  (Matrix(2, 2) << 1, 1, 1, 4).finished()};
  for (std::size_t i = 0; i < 2; ++i) {
    const Vector grid = oracle::simplex_grid_argmin(
        2, [&](const oracle::Vec& x) { return oracle::quad(grams[i], x); }, 1e-4);
    EXPECT_LT((w[i].values() - grid).norm(), 2e-4);
  }
  EXPECT_GT((w[0].values() - w[1].values()).norm(), 0.5);
}

TEST(MwgradStep, ObjectiveRelabelingIsEquivariant) {
  auto all = four_targets();
  const std::vector<Objective> objs{all[0], all[1], all[2]};
  const std::vector<Objective> perm{all[2], all[0], all[1]};
  RunConfig cfg = small_config(Method::MwgradSvgd, 40);
  cfg.num_objectives = 3;
  cfg.step_size_beta = 1e-2;
  const RunResult a = run(cfg, objs);
  const RunResult b = run(cfg, perm);
  EXPECT_LT((a.final_state.particles.data() - b.final_state.particles.data()).norm(), 1e-10);
  const Vector& wa = a.final_state.weights.values();
  const Vector& wb = b.final_state.weights.values();
  EXPECT_NEAR(wa[2], wb[0], 1e-10);
  EXPECT_NEAR(wa[0], wb[1], 1e-10);
  EXPECT_NEAR(wa[1], wb[2], 1e-10);
}

TEST(MwgradStep, DivergenceNamesIterationAndParticle) {
  RunConfig cfg;
  cfg.num_particles = 2;
  cfg.num_objectives = 1;
  cfg.step_size_alpha = 1e7;
  const std::vector<Objective> objs{EnergyObjective{GaussianMixture::standard_normal(2)}};
  const OptimizerState s{ParticleSet(rows2({{0, 0}, {3, 0}})), init_weights(1), 4, {}};
  try {
    mwgrad_step(s, objs, cfg);
    FAIL() << "expected diverged";
  } catch (const DivergedError& e) {
    EXPECT_EQ(e.iteration(), 4);
    EXPECT_EQ(e.particle(), 0);
    EXPECT_EQ(e.category(), "diverged");
  }
}

TEST(CheckObjectives, RejectsMismatches) {
  RunConfig cfg;
  auto objs = four_targets();
  EXPECT_NO_THROW(check_objectives(cfg, objs));
  objs.pop_back();
  EXPECT_THROW(check_objectives(cfg, objs), ConfigError);
  cfg.num_objectives = 1;
  EXPECT_THROW(check_objectives(cfg, {EnergyObjective{GaussianMixture::standard_normal(3)}}),
               ConfigError);
  const Objective sample = SampleObjective(RowMatrix::Zero(3, 2), Divergence::Kl);
  EXPECT_THROW(check_objectives(cfg, {sample}), ConfigError);
  cfg.method = Method::MwgradNn;
  EXPECT_NO_THROW(check_objectives(cfg, {sample}));
}

TEST(EstimateFunctional, MatchesDirectFormula) {
  const RowMatrix x = rows2({{0, 0}, {1, 0}, {0, 2}});
  const EnergyObjective obj{sample_targets_from_paper()[3]};
  const double gamma = 0.5;
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    double kde = 0.0;
    for (int j = 0; j < 3; ++j) {
      kde += std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm()) * gamma / M_PI;
    }
    expected += potential(obj, x.row(i).transpose()) + std::log(kde / 3.0);
  }
  expected /= 3.0;
  EXPECT_NEAR(*estimate_functional(obj, ParticleSet(x), RbfKernel(gamma)), expected, 1e-12);
  EXPECT_FALSE(estimate_functional(SampleObjective(x, Divergence::Kl), ParticleSet(x), RbfKernel(gamma))
                   .has_value());
}

TEST(GradientErrorProbe, Examples) {
  Rng rng(6);
  const ParticleSet p(rng.standard_normal(40, 2));
  const EnergyObjective obj{GaussianMixture::standard_normal(2)};
  const RbfKernel kde(0.5);
  const RowMatrix ref = reference_velocity(p, obj, kde);
  EXPECT_EQ(gradient_error_probe(p, ref, obj, kde), 0.0);
  const Eigen::RowVector2d c(0.3, -1.2);
  EXPECT_NEAR(gradient_error_probe(p, ref.rowwise() + c, obj, kde), c.squaredNorm(), 1e-12);
  EXPECT_THROW(gradient_error_probe(ParticleSet(RowMatrix::Zero(3, 3)), RowMatrix::Zero(3, 3),
                                    EnergyObjective{GaussianMixture::standard_normal(3)}, kde),
               InvalidArgument);
}

TEST(GradientErrorProbe, SvgdOnManyParticlesIsFinite) {
  RunConfig cfg;
  cfg.num_particles = 500;
  const ParticleSet p = init_particles(cfg);
  const EnergyObjective obj{GaussianMixture::standard_normal(2)};
  const RowMatrix est = svgd_velocity(p, obj, RbfKernel(0.01), SvgdNormalization::Mean);
  const double err = gradient_error_probe(p, est, obj, RbfKernel(median_heuristic_gamma(p.data(), 0.01)));
  EXPECT_TRUE(std::isfinite(err));
  RecordProperty("svgd_gradient_error", std::to_string(err));
}
