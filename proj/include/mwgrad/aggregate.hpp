#pragma once

#include <vector>

#include "mwgrad/core.hpp"

namespace mwgrad {

/// Symmetric PSD matrix of velocity inner products, G[k][l] = <v_k, v_l>.
class GramMatrix {
 public:
  explicit GramMatrix(Matrix g);
  const Matrix& matrix() const noexcept { return g_; }
  int size() const noexcept { return static_cast<int>(g_.rows()); }
  double quadratic(const SimplexWeights& w) const;

 private:
  Matrix g_;
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, SimplexWeights best)
      : Error(what), best_(std::move(best)) {}
  const SimplexWeights& best() const noexcept { return best_; }
  std::string_view category() const noexcept override { return "convergence-failure"; }

 private:
  SimplexWeights best_;
};

/// G[k][l] = sum_i <v_k(x_i), v_l(x_i)>, divided by m for Mean.
GramMatrix gram_matrix(const VelocityBundle& bundle, GramNormalization norm);

/// Euclidean projection onto the probability simplex (sort-threshold method).
SimplexWeights project_simplex(const Vector& v);

/// One projected-gradient step on w^T G w: Pi(w - beta G w).
SimplexWeights update_weights(const SimplexWeights& w, const GramMatrix& g, double beta);

struct MinNormOptions {
  double tol = 1e-10;
  int max_iterations = 100000;
};

/// argmin_{w in simplex} w^T G w. Solved exactly by support enumeration for
/// K <= 12; larger problems fall back to min_norm_projected_gradient.
SimplexWeights min_norm_exact(const GramMatrix& g, MinNormOptions options = {});

/// Iterated projected gradient with step 1 / (2 trace G), stopping once the
/// objective changes by less than tol * max(1, trace G). Throws
/// ConvergenceFailure (carrying the best iterate) after max_iterations.
SimplexWeights min_norm_projected_gradient(const GramMatrix& g, MinNormOptions options = {});

/// Particle i's own weights: argmin_w w^T G_i w with G_i[k][l] = <v_k(x_i), v_l(x_i)>.
std::vector<SimplexWeights> per_particle_min_norm(const VelocityBundle& bundle,
                                                  MinNormOptions options = {});

/// Row i = sum_k w_k v_k(x_i).
RowMatrix aggregate_velocity(const VelocityBundle& bundle, const SimplexWeights& w);

/// min_{w in simplex} w^T G w; zero exactly at a Pareto stationary point.
double pareto_stationarity(const GramMatrix& g, MinNormOptions options = {});

}  // namespace mwgrad
