#pragma once

#include <variant>
#include <vector>

#include "mwgrad/core.hpp"
#include "mwgrad/rng.hpp"

namespace mwgrad {

struct GaussianComponent {
  double weight;
  Vector mean;
  Matrix covariance;
};

/// Normalized Gaussian mixture. Construction validates the weights (each in
/// (0, 1], summing to 1 within 1e-12) and Cholesky-factors every covariance.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<GaussianComponent> components);

  /// N(0, I_d).
  static GaussianMixture standard_normal(int dim);
  /// Identity-covariance mixture with the given weights and means.
  static GaussianMixture isotropic(const std::vector<double>& weights,
                                   const std::vector<Vector>& means);

  int dim() const noexcept { return static_cast<int>(components_.front().mean.size()); }
  int num_components() const noexcept { return static_cast<int>(components_.size()); }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }

  double log_density(const Eigen::Ref<const Vector>& x) const;
  Vector grad_log_density(const Eigen::Ref<const Vector>& x) const;
  RowMatrix sample(int n, Rng& rng) const;

 private:
  struct Factor {
    Eigen::LLT<Matrix> chol;
    double log_norm;  // log(weight) - d/2 log(2 pi) - 1/2 log det(Sigma)
  };

  /// Per-component log(weight * N(x | mu_c, Sigma_c)).
  void component_log_terms(const Eigen::Ref<const Vector>& x, Vector& out) const;

  std::vector<GaussianComponent> components_;
  std::vector<Factor> factors_;
};

double mixture_log_density(const GaussianMixture& gm, const Eigen::Ref<const Vector>& x);
Vector mixture_grad_log_density(const GaussianMixture& gm, const Eigen::Ref<const Vector>& x);

/// F(q) = KL(q || pi) with pi a known mixture; the potential is g = -log pi.
struct EnergyObjective {
  GaussianMixture target;
};

enum class Divergence { Kl, Js };
std::string_view to_string(Divergence d);
Divergence parse_divergence(std::string_view s);

/// Target known only through samples (one per row).
class SampleObjective {
 public:
  SampleObjective(RowMatrix samples, Divergence divergence);
  const RowMatrix& samples() const noexcept { return samples_; }
  Divergence divergence() const noexcept { return divergence_; }
  int dim() const noexcept { return static_cast<int>(samples_.cols()); }

 private:
  RowMatrix samples_;
  Divergence divergence_;
};

using Objective = std::variant<EnergyObjective, SampleObjective>;

int objective_dim(const Objective& obj);

/// g(x) = -log pi(x).
double potential(const EnergyObjective& obj, const Eigen::Ref<const Vector>& x);
/// grad g(x) = -grad log pi(x).
Vector potential_grad(const EnergyObjective& obj, const Eigen::Ref<const Vector>& x);
/// Row i = grad g(x_i).
RowMatrix potential_grads(const EnergyObjective& obj, const RowMatrix& points);

/// The four two-component synthetic targets (weights 0.7 / 0.3, identity
/// covariance) whose near-origin components share a joint high-density region.
std::vector<GaussianMixture> sample_targets_from_paper();

/// n i.i.d. draws: categorical component, then Gaussian.
RowMatrix draw_target_samples(const GaussianMixture& gm, int n, Rng& rng);

}  // namespace mwgrad
