#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mwgrad/velocity.hpp"
#include "oracles.hpp"

using namespace mwgrad;

namespace {

const EnergyObjective kStdNormal{GaussianMixture::standard_normal(2)};

RowMatrix random_points(int m, int d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return scale * rng.standard_normal(m, d);
}

// Term-by-term transcription of the blob estimate with scalar loops.
RowMatrix blob_transcription(const RowMatrix& x, const EnergyObjective& obj, double gamma) {
  const auto m = x.rows();
  const auto d = x.cols();
  auto kern = [&](Eigen::Index a, Eigen::Index b) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) s += (x(a, c) - x(b, c)) * (x(a, c) - x(b, c));
    return std::exp(-gamma * s);
  };
  std::vector<double> row_sum(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index l = 0; l < m; ++l) row_sum[static_cast<std::size_t>(i)] += kern(i, l);
  }
  RowMatrix out(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector g = potential_grad(obj, x.row(i).transpose());
    for (Eigen::Index c = 0; c < d; ++c) {
      double t1 = 0.0, t2 = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        // gradient of K(x_i, x_j) in x_j
        const double grad = 2.0 * gamma * (x(i, c) - x(j, c)) * kern(i, j);
        t1 += grad / row_sum[static_cast<std::size_t>(j)];
        t2 += grad / row_sum[static_cast<std::size_t>(i)];
      }
      out(i, c) = g[c] - t1 - t2;
    }
  }
  return out;
}

Mlp with_output_bias(Mlp p, double b) {
  Vector theta = p.flatten();
  theta[theta.size() - 1] = b;
  p.assign(theta);
  return p;
}

}  // namespace

TEST(SvgdVelocity, TwoParticleExample) {
  RowMatrix x(2, 2);
  x << 0, 0, 1, 0;
  const RowMatrix v = svgd_velocity(ParticleSet(x), kStdNormal, RbfKernel(0.01));
  const double expected = std::exp(-0.01) * 1.0 - 0.02 * (-1.0) * std::exp(-0.01);
  EXPECT_NEAR(v(0, 0), 1.009851, 1e-6);
  EXPECT_NEAR(v(0, 0), expected, 1e-15);
  EXPECT_EQ(v(0, 1), 0.0);
}

TEST(SvgdVelocity, MeanNormalizationDividesByM) {
  const RowMatrix x = random_points(5, 2, 1);
  const RowMatrix sum = svgd_velocity(ParticleSet(x), kStdNormal, RbfKernel(0.2));
  const RowMatrix mean =
      svgd_velocity(ParticleSet(x), kStdNormal, RbfKernel(0.2), SvgdNormalization::Mean);
  EXPECT_LT((sum / 5.0 - mean).norm(), 1e-14);
}

TEST(SingleParticle, SvgdAndBlobEqualPotentialGradient) {
  const auto targets = sample_targets_from_paper();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RowMatrix x = random_points(1, 2, s, 3.0);
    const EnergyObjective obj{targets[s % 4]};
    const RowMatrix g = potential_grads(obj, x);
    EXPECT_EQ(svgd_velocity(ParticleSet(x), obj, RbfKernel(0.01)), g);
    EXPECT_EQ(blob_velocity(ParticleSet(x), obj, RbfKernel(0.01)), g);
  }
}

TEST(BlobVelocity, MatchesTranscription) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const RowMatrix x = random_points(3, 2, 10 + s, 1.5);
    for (double gamma : {0.01, 0.5}) {
      const RowMatrix got = blob_velocity(ParticleSet(x), kStdNormal, RbfKernel(gamma));
      const RowMatrix want = blob_transcription(x, kStdNormal, gamma);
      for (int i = 0; i < 3; ++i) {
        EXPECT_LT(oracle::rel_error(got.row(i).transpose(), want.row(i).transpose(), 1e-300), 1e-10);
      }
    }
  }
}

TEST(Estimators, PermutationEquivariant) {
  const RowMatrix x = random_points(6, 2, 20, 2.0);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(3);
  std::shuffle(perm.begin(), perm.end(), gen);
  RowMatrix px(6, 2);
  for (int i = 0; i < 6; ++i) px.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  const EnergyObjective obj{sample_targets_from_paper()[1]};
  const RbfKernel k(0.3);
  const RowMatrix sv = svgd_velocity(ParticleSet(x), obj, k);
  const RowMatrix psv = svgd_velocity(ParticleSet(px), obj, k);
  const RowMatrix bv = blob_velocity(ParticleSet(x), obj, k);
  const RowMatrix pbv = blob_velocity(ParticleSet(px), obj, k);
  Rng rng(4);
  const Mlp critic = Mlp::random(2, {8, 8}, OutputActivation::Identity, rng);
  const RowMatrix nv = nn_velocity(critic, ParticleSet(x), VariationalSpec::kl_sample());
  const RowMatrix pnv = nn_velocity(critic, ParticleSet(px), VariationalSpec::kl_sample());
  for (int i = 0; i < 6; ++i) {
    const int j = perm[static_cast<std::size_t>(i)];
    EXPECT_LT((psv.row(i) - sv.row(j)).norm(), 1e-12);
    EXPECT_LT((pbv.row(i) - bv.row(j)).norm(), 1e-12);
    EXPECT_EQ(pnv.row(i), nv.row(j));
  }
}

TEST(SvgdVelocity, DriftDominatesFarFromOrigin) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    RowMatrix x = rng.standard_normal(10, 2);
    for (int i = 0; i < 10; ++i) x.row(i) *= (10.5 + 5.0 * rng.uniform01()) / x.row(i).norm();
    const RowMatrix v = svgd_velocity(ParticleSet(x), kStdNormal, RbfKernel(0.01));
    for (int i = 0; i < 10; ++i) EXPECT_GT(v.row(i).dot(x.row(i)), 0.0);
  }
}

TEST(NnVelocity, ZeroNetworkKlSample) {
  const RowMatrix x = random_points(4, 2, 6);
  const RowMatrix v = nn_velocity(Mlp::zeros(2, {5}, OutputActivation::Identity), ParticleSet(x),
                                  VariationalSpec::kl_sample());
  EXPECT_EQ(v, RowMatrix::Zero(4, 2));
}

TEST(NnVelocity, KlEnergyConstantCriticMatchedBase) {
  const RowMatrix x = random_points(4, 2, 7, 2.0);
  const Mlp c = with_output_bias(Mlp::zeros(2, {5}, OutputActivation::ReluEps), 0.4);
  const RowMatrix v = nn_velocity(c, ParticleSet(x),
                                  VariationalSpec::kl_energy(GaussianMixture::standard_normal(2)));
  EXPECT_LT(v.norm(), 1e-14);
}

TEST(NnVelocity, RowsMatchFiniteDifferencesOfRecoveredScalar) {
  const RowMatrix x = random_points(5, 2, 8, 1.5);
  const auto target = sample_targets_from_paper()[0];
  struct Case {
    VariationalSpec spec;
    OutputActivation act;
    double bias;
  };
  const std::vector<Case> cases{{VariationalSpec::js(), OutputActivation::Sigmoid, 0.0},
                                {VariationalSpec::kl_sample(), OutputActivation::Identity, 0.0},
                                {VariationalSpec::kl_energy(target), OutputActivation::ReluEps, 2.0}};
  std::uint64_t seed = 40;
  for (const auto& c : cases) {
    Rng rng(seed++);
    const Mlp critic = with_output_bias(Mlp::random(2, {10, 10}, c.act, rng), c.bias);
    const RowMatrix v = nn_velocity(critic, ParticleSet(x), c.spec);
    for (int i = 0; i < 5; ++i) {
      const Vector fd = oracle::central_diff(
          [&](const oracle::Vec& y) { return recovered_first_variation(critic, c.spec, y); },
          x.row(i).transpose(), 1e-5);
      EXPECT_LT(oracle::rel_error(v.row(i).transpose(), fd), 1e-4);
    }
  }
}

TEST(NnVelocity, SaturatedJsCriticIsDomainError) {
  const Mlp c = with_output_bias(Mlp::zeros(2, {3}, OutputActivation::Sigmoid), 100.0);
  EXPECT_THROW(nn_velocity(c, ParticleSet(RowMatrix::Zero(2, 2)), VariationalSpec::js()),
               NumericDomainError);
}

TEST(NnVelocity, MismatchedActivationRejected) {
  const Mlp c = Mlp::zeros(2, {3}, OutputActivation::Identity);
  EXPECT_THROW(nn_velocity(c, ParticleSet(RowMatrix::Zero(2, 2)), VariationalSpec::js()),
               InvalidArgument);
}
