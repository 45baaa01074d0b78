#include "mwgrad/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>
#include <utility>

namespace mwgrad {

GramMatrix::GramMatrix(Matrix g) : g_(std::move(g)) {
  if (g_.rows() < 1 || g_.rows() != g_.cols()) throw InvalidArgument("Gram matrix must be square");
  if (!g_.allFinite()) throw InvalidArgument("Gram matrix contains non-finite entries");
  const double scale = std::max(1.0, g_.cwiseAbs().maxCoeff());
  if ((g_ - g_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("Gram matrix must be symmetric");
  }
  if (g_.rows() > 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g_, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, g_.trace())) {
      throw InvalidArgument("Gram matrix must be positive semidefinite");
    }
  } else if (g_(0, 0) < -1e-9) {
    throw InvalidArgument("Gram matrix must be positive semidefinite");
  }
}

double GramMatrix::quadratic(const SimplexWeights& w) const {
  if (w.size() != size()) throw InvalidArgument("weights and Gram matrix differ in size");
  return w.values().dot(g_ * w.values());
}

GramMatrix gram_matrix(const VelocityBundle& bundle, GramNormalization norm) {
  const int k = bundle.num_objectives();
  Matrix g(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      const double v = bundle.slice(a).cwiseProduct(bundle.slice(b)).sum();
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  if (norm == GramNormalization::Mean) g /= static_cast<double>(bundle.num_particles());
  return GramMatrix(std::move(g));
}

SimplexWeights project_simplex(const Vector& v) {
  const auto k = v.size();
  if (k < 1) throw InvalidArgument("cannot project an empty vector");
  if (!v.allFinite()) throw InvalidArgument("cannot project a non-finite vector");
  if (k == 1) return SimplexWeights(Vector::Ones(1));
  const double eps = std::numeric_limits<double>::epsilon();
  if ((v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= 4.0 * eps * static_cast<double>(k)) {
    return SimplexWeights(v);
  }
  Vector u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    cum += u[j];
    const double t = (1.0 - cum) / static_cast<double>(j + 1);
    if (u[j] + t > 0.0) theta = t;
  }
  Vector w = (v.array() + theta).max(0.0).matrix();
  // absorb rounding so the result lies on the simplex to working precision
  w /= w.sum();
  return SimplexWeights(std::move(w));
}

SimplexWeights update_weights(const SimplexWeights& w, const GramMatrix& g, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("weight step size must be positive");
  if (w.size() != g.size()) throw InvalidArgument("weights and Gram matrix differ in size");
  return project_simplex(w.values() - beta * (g.matrix() * w.values()));
}

namespace {

/// Largest K solved by enumerating supports.
constexpr int kMaxEnumeratedObjectives = 12;

/// Exact minimizer by enumerating supports: on each support S the minimizer of
/// w^T G w over the affine hull {sum w = 1} solves the KKT system
/// [2 G_S 1; 1^T 0] [w; lambda] = [0; 1]. Some optimal point has a support whose
/// KKT solution is non-negative, so the best feasible candidate is optimal.
std::optional<SimplexWeights> min_norm_by_support(const GramMatrix& g) {
  const int k = g.size();
  const Matrix& gm = g.matrix();
  const double scale = std::max(1.0, gm.cwiseAbs().maxCoeff());
  std::optional<Vector> best;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<int> support;
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    support.clear();
    for (int i = 0; i < k; ++i) {
      if (mask & (1u << i)) support.push_back(i);
    }
    const auto s = static_cast<Eigen::Index>(support.size());
    Matrix kkt = Matrix::Zero(s + 1, s + 1);
    for (Eigen::Index a = 0; a < s; ++a) {
      for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * gm(support[a], support[b]) / scale;
      kkt(a, s) = 1.0;
      kkt(s, a) = 1.0;
    }
    Vector rhs = Vector::Zero(s + 1);
    rhs[s] = 1.0;
    const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite() || (kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-9) continue;
    Vector w = Vector::Zero(k);
    bool feasible = true;
    for (Eigen::Index a = 0; a < s; ++a) {
      if (sol[a] < -1e-12) {
        feasible = false;
        break;
      }
      w[support[a]] = std::max(0.0, sol[a]);
    }
    if (!feasible || !(w.sum() > 0.0)) continue;
    w /= w.sum();
    const double value = w.dot(gm * w);
    if (value < best_value) {
      best_value = value;
      best = std::move(w);
    }
  }
  if (!best) return std::nullopt;
  return SimplexWeights(std::move(*best));
}

}  // namespace

SimplexWeights min_norm_projected_gradient(const GramMatrix& g, MinNormOptions options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("min-norm tolerance must be positive");
  const int k = g.size();
  if (k == 1) return SimplexWeights(Vector::Ones(1));
  const double trace = g.matrix().trace();
  SimplexWeights w = SimplexWeights::uniform(k);
  if (trace <= 0.0) return w;

  const double beta = 1.0 / (2.0 * trace);
  const double threshold = options.tol * std::max(1.0, trace);
  double value = g.quadratic(w);
  SimplexWeights best = w;
  double best_value = value;
  for (int it = 0; it < options.max_iterations; ++it) {
    SimplexWeights next = update_weights(w, g, beta);
    const double next_value = g.quadratic(next);
    if (next_value < best_value) {
      best = next;
      best_value = next_value;
    }
    const bool unchanged = next == w;
    const double change = std::abs(next_value - value);
    w = std::move(next);
    value = next_value;
    if (unchanged || change < threshold) return best;
  }
  throw ConvergenceFailure("min-norm solver did not converge within " +
                               std::to_string(options.max_iterations) + " iterations",
                           best);
}

SimplexWeights min_norm_exact(const GramMatrix& g, MinNormOptions options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("min-norm tolerance must be positive");
  const int k = g.size();
  if (k == 1) return SimplexWeights(Vector::Ones(1));
  if (k <= kMaxEnumeratedObjectives) {
    if (auto w = min_norm_by_support(g)) {
      // never report something worse than the uniform starting point
      const SimplexWeights uniform = SimplexWeights::uniform(k);
      return g.quadratic(*w) <= g.quadratic(uniform) ? std::move(*w) : uniform;
    }
  }
  return min_norm_projected_gradient(g, options);
}

std::vector<SimplexWeights> per_particle_min_norm(const VelocityBundle& bundle,
                                                  MinNormOptions options) {
  const int k = bundle.num_objectives();
  const int m = bundle.num_particles();
  std::vector<SimplexWeights> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Matrix gi(k, k);
    for (int a = 0; a < k; ++a) {
      for (int b = a; b < k; ++b) {
        const double dot = bundle.slice(a).row(i).dot(bundle.slice(b).row(i));
        gi(a, b) = dot;
        gi(b, a) = dot;
      }
    }
    try {
      out.push_back(min_norm_exact(GramMatrix(std::move(gi)), options));
    } catch (const ConvergenceFailure& e) {
      throw ConvergenceFailure(std::string(e.what()) + " (particle " + std::to_string(i) + ")",
                               e.best());
    }
  }
  return out;
}

RowMatrix aggregate_velocity(const VelocityBundle& bundle, const SimplexWeights& w) {
  if (w.size() != bundle.num_objectives()) {
    throw InvalidArgument("weights and velocity bundle differ in objective count");
  }
  RowMatrix out = w[0] * bundle.slice(0);
  for (int k = 1; k < bundle.num_objectives(); ++k) out += w[k] * bundle.slice(k);
  return out;
}

double pareto_stationarity(const GramMatrix& g, MinNormOptions options) {
  return std::max(0.0, g.quadratic(min_norm_exact(g, options)));
}

}  // namespace mwgrad
