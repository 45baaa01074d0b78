#pragma once

#include <optional>
#include <vector>

#include "mwgrad/core.hpp"
#include "mwgrad/objectives.hpp"
#include "mwgrad/rng.hpp"

namespace mwgrad {

enum class OutputActivation { Identity, ReluEps, Sigmoid };

/// Floor added to the ReLU output so log(h') stays finite.
inline constexpr double kReluEpsilon = 1e-6;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Scalar-output MLP: tanh on hidden layers, configurable output activation.
class Mlp {
 public:
  Mlp(std::vector<DenseLayer> layers, OutputActivation output);

  /// Weights and biases drawn from U(-s, s), s = sqrt(1 / fan_in).
  static Mlp random(int input_dim, const std::vector<int>& hidden_widths,
                    OutputActivation output, Rng& rng);
  static Mlp zeros(int input_dim, const std::vector<int>& hidden_widths,
                   OutputActivation output);

  int input_dim() const noexcept { return static_cast<int>(layers_.front().weight.cols()); }
  OutputActivation output_activation() const noexcept { return output_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  int num_params() const;
  /// Parameters in layer order, weight (column-major) then bias.
  Vector flatten() const;
  void assign(const Vector& params);

 private:
  std::vector<DenseLayer> layers_;
  OutputActivation output_;
};

double mlp_forward(const Mlp& p, const Eigen::Ref<const Vector>& x);
/// Outputs for every row of `batch`.
Vector mlp_forward_batch(const Mlp& p, const RowMatrix& batch);

/// grad_x h(x).
Vector mlp_input_grad(const Mlp& p, const Eigen::Ref<const Vector>& x);
/// Row i = grad_x h(batch_i).
RowMatrix mlp_input_grads(const Mlp& p, const RowMatrix& batch);

/// Gradient of sum_i loss_i with respect to every parameter, where
/// loss_grads[i] is d loss_i / d h(batch_i). Same layout as the network.
std::vector<DenseLayer> mlp_param_grads(const Mlp& p, const Vector& loss_grads,
                                        const RowMatrix& batch);

// ---------------------------------------------------------------------------
// Variational critics
// ---------------------------------------------------------------------------

enum class VariationalKind {
  /// sup_h E_q[h] - log E_pi[exp h], identity output.
  KlSample,
  /// Change of variables against the base p = N(0, I): the network is h' > 0 and
  /// h = log h' + log p - log pi. Uses relu_eps output.
  KlEnergy,
  /// sup_{h' in (0,1)} E_q[log(1 - h')] + E_pi[log h'], sigmoid output;
  /// h = 1/2 log((1 - h') / 2).
  Js,
};

struct VariationalSpec {
  VariationalKind kind = VariationalKind::KlSample;
  /// Target density for KlEnergy; may be unnormalized in principle.
  std::optional<GaussianMixture> target;

  static VariationalSpec kl_sample() { return {VariationalKind::KlSample, std::nullopt}; }
  static VariationalSpec js() { return {VariationalKind::Js, std::nullopt}; }
  static VariationalSpec kl_energy(GaussianMixture target) {
    return {VariationalKind::KlEnergy, std::move(target)};
  }
};

OutputActivation output_activation_for(VariationalKind kind);

/// log p(x) - log pi(x) for the KlEnergy change of variables (p = N(0, I)).
double base_log_ratio(const VariationalSpec& spec, const Eigen::Ref<const Vector>& x);
Vector base_log_ratio_grad(const VariationalSpec& spec, const Eigen::Ref<const Vector>& x);

/// Empirical variational objective. `reference` holds target samples (KlSample,
/// Js) or base-density draws (KlEnergy).
double variational_objective(const VariationalSpec& spec, const Mlp& critic,
                             const RowMatrix& q_samples, const RowMatrix& reference);

/// `steps` full-batch gradient-ascent updates starting from `critic`.
/// Throws TrainingDiverged if the objective becomes non-finite.
Mlp train_variational(const VariationalSpec& spec, Mlp critic, const RowMatrix& q_samples,
                      const RowMatrix& reference, int steps, double step_size);

}  // namespace mwgrad
