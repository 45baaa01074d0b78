#include "mwgrad/nn.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace mwgrad {

namespace {

double activate_output(OutputActivation act, double z) {
  switch (act) {
    case OutputActivation::Identity:
      return z;
    case OutputActivation::ReluEps:
      return (z > 0.0 ? z : 0.0) + kReluEpsilon;
    case OutputActivation::Sigmoid:
      return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return z;
}

/// d out / d z, given z and out = activate_output(z).
double output_derivative(OutputActivation act, double z, double out) {
  switch (act) {
    case OutputActivation::Identity:
      return 1.0;
    case OutputActivation::ReluEps:
      return z > 0.0 ? 1.0 : 0.0;
    case OutputActivation::Sigmoid:
      return out * (1.0 - out);
  }
  return 1.0;
}

/// Column-per-sample forward pass keeping every layer's post-activation.
struct ForwardCache {
  std::vector<Matrix> activations;  // [0] = inputs (d x n), hidden layers after tanh
  Eigen::RowVectorXd pre_output;    // z of the last layer
  Eigen::RowVectorXd output;
};

ForwardCache forward(const Mlp& p, const RowMatrix& batch) {
  if (batch.cols() != p.input_dim()) {
    throw InvalidArgument("batch dimension does not match network input");
  }
  ForwardCache cache;
  const auto& layers = p.layers();
  cache.activations.reserve(layers.size());
  cache.activations.push_back(batch.transpose());
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Matrix z = layers[l].weight * cache.activations.back();
    z.colwise() += layers[l].bias;
    cache.activations.push_back(z.array().tanh().matrix());
  }
  const auto& last = layers.back();
  cache.pre_output = (last.weight * cache.activations.back()).row(0);
  cache.pre_output.array() += last.bias[0];
  cache.output.resize(cache.pre_output.size());
  for (Eigen::Index i = 0; i < cache.pre_output.size(); ++i) {
    cache.output[i] = activate_output(p.output_activation(), cache.pre_output[i]);
  }
  return cache;
}

/// Backpropagates per-sample output sensitivities. Fills `param_grads` when
/// non-null and returns d/d inputs (d x n).
Matrix backward(const Mlp& p, const ForwardCache& cache, const Eigen::RowVectorXd& out_grad,
                std::vector<DenseLayer>* param_grads) {
  const auto& layers = p.layers();
  const auto n = out_grad.size();
  Matrix delta(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(0, i) = out_grad[i] *
                  output_derivative(p.output_activation(), cache.pre_output[i], cache.output[i]);
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& input = cache.activations[l];
    if (param_grads != nullptr) {
      (*param_grads)[l].weight = delta * input.transpose();
      (*param_grads)[l].bias = delta.rowwise().sum();
    }
    Matrix upstream = layers[l].weight.transpose() * delta;
    if (l == 0) return upstream;
    delta = upstream.array() * (1.0 - input.array().square());
  }
  return {};
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers, OutputActivation output)
    : layers_(std::move(layers)), output_(output) {
  if (layers_.empty()) throw InvalidArgument("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() != layer.bias.size() || layer.weight.cols() < 1 ||
        layer.weight.rows() < 1) {
      throw InvalidArgument("layer weight and bias shapes disagree");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw InvalidArgument("consecutive layer dimensions do not chain");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw InvalidArgument("network parameters must be finite");
    }
  }
  if (layers_.back().weight.rows() != 1) throw InvalidArgument("network output must be scalar");
}

Mlp Mlp::random(int input_dim, const std::vector<int>& hidden_widths, OutputActivation output,
                Rng& rng) {
  std::vector<DenseLayer> layers;
  int fan_in = input_dim;
  auto make = [&](int out) {
    const double s = std::sqrt(1.0 / fan_in);
    DenseLayer layer{Matrix(out, fan_in), Vector(out)};
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = rng.uniform(-s, s);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-s, s);
    layers.push_back(std::move(layer));
    fan_in = out;
  };
  for (int w : hidden_widths) make(w);
  make(1);
  return Mlp(std::move(layers), output);
}

Mlp Mlp::zeros(int input_dim, const std::vector<int>& hidden_widths, OutputActivation output) {
  std::vector<DenseLayer> layers;
  int fan_in = input_dim;
  for (int w : hidden_widths) {
    layers.push_back({Matrix::Zero(w, fan_in), Vector::Zero(w)});
    fan_in = w;
  }
  layers.push_back({Matrix::Zero(1, fan_in), Vector::Zero(1)});
  return Mlp(std::move(layers), output);
}

int Mlp::num_params() const {
  int n = 0;
  for (const auto& l : layers_) n += static_cast<int>(l.weight.size() + l.bias.size());
  return n;
}

Vector Mlp::flatten() const {
  Vector out(num_params());
  Eigen::Index at = 0;
  for (const auto& l : layers_) {
    out.segment(at, l.weight.size()) = l.weight.reshaped();
    at += l.weight.size();
    out.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return out;
}

void Mlp::assign(const Vector& params) {
  if (params.size() != num_params()) throw InvalidArgument("parameter vector has wrong length");
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = params.segment(at, l.weight.size());
    at += l.weight.size();
    l.bias = params.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

double mlp_forward(const Mlp& p, const Eigen::Ref<const Vector>& x) {
  if (x.size() != p.input_dim()) throw InvalidArgument("input dimension does not match network");
  RowMatrix batch = x.transpose();
  return forward(p, batch).output[0];
}

Vector mlp_forward_batch(const Mlp& p, const RowMatrix& batch) {
  return forward(p, batch).output.transpose();
}

Vector mlp_input_grad(const Mlp& p, const Eigen::Ref<const Vector>& x) {
  if (x.size() != p.input_dim()) throw InvalidArgument("input dimension does not match network");
  RowMatrix batch = x.transpose();
  return mlp_input_grads(p, batch).row(0).transpose();
}

RowMatrix mlp_input_grads(const Mlp& p, const RowMatrix& batch) {
  const ForwardCache cache = forward(p, batch);
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(batch.rows());
  return backward(p, cache, ones, nullptr).transpose();
}

std::vector<DenseLayer> mlp_param_grads(const Mlp& p, const Vector& loss_grads,
                                        const RowMatrix& batch) {
  if (loss_grads.size() != batch.rows()) {
    throw InvalidArgument("one loss gradient per batch row is required");
  }
  const ForwardCache cache = forward(p, batch);
  std::vector<DenseLayer> grads(p.layers().size());
  backward(p, cache, loss_grads.transpose(), &grads);
  return grads;
}

// ---------------------------------------------------------------------------

OutputActivation output_activation_for(VariationalKind kind) {
  switch (kind) {
    case VariationalKind::KlSample:
      return OutputActivation::Identity;
    case VariationalKind::KlEnergy:
      return OutputActivation::ReluEps;
    case VariationalKind::Js:
      return OutputActivation::Sigmoid;
  }
  return OutputActivation::Identity;
}

namespace {

const GaussianMixture& energy_target(const VariationalSpec& spec) {
  if (spec.kind != VariationalKind::KlEnergy || !spec.target) {
    throw InvalidArgument("kl-energy critic requires a target density");
  }
  return *spec.target;
}

double log_standard_normal(const Eigen::Ref<const Vector>& x) {
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) -
         0.5 * x.squaredNorm();
}

double log_sum_exp(const Vector& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

struct ObjectiveEval {
  double value;
  Vector q_grad;    // d J / d out at q samples
  Vector ref_grad;  // d J / d out at reference samples
};

void check_critic(const VariationalSpec& spec, const Mlp& critic, const RowMatrix& q,
                  const RowMatrix& ref) {
  if (critic.output_activation() != output_activation_for(spec.kind)) {
    throw InvalidArgument("critic output activation does not match the variational spec");
  }
  if (q.cols() != ref.cols()) throw InvalidArgument("sample sets differ in dimension");
}

/// Objective value (and output sensitivities) from the critic outputs hq, hr.
ObjectiveEval evaluate(const VariationalSpec& spec, const RowMatrix& q, const Vector& hq,
                       const RowMatrix& ref, const Vector& hr, bool with_grads) {
  const double m = static_cast<double>(q.rows());
  const double n = static_cast<double>(ref.rows());
  ObjectiveEval ev{0.0, Vector(), Vector()};
  switch (spec.kind) {
    case VariationalKind::KlSample: {
      const double lse = log_sum_exp(hr);
      ev.value = hq.mean() - (lse - std::log(n));
      if (with_grads) {
        ev.q_grad = Vector::Constant(q.rows(), 1.0 / m);
        ev.ref_grad = -(hr.array() - lse).exp().matrix();
      }
      break;
    }
    case VariationalKind::KlEnergy: {
      double ratio = 0.0;
      for (Eigen::Index i = 0; i < q.rows(); ++i) ratio += base_log_ratio(spec, q.row(i).transpose());
      const double total_ref = hr.sum();
      ev.value = hq.array().log().mean() + ratio / m - std::log(total_ref / n);
      if (with_grads) {
        ev.q_grad = (1.0 / m) * hq.array().inverse().matrix();
        ev.ref_grad = Vector::Constant(ref.rows(), -1.0 / total_ref);
      }
      break;
    }
    case VariationalKind::Js: {
      ev.value = (1.0 - hq.array()).log().mean() + hr.array().log().mean();
      if (with_grads) {
        ev.q_grad = -(1.0 / m) * (1.0 - hq.array()).inverse().matrix();
        ev.ref_grad = (1.0 / n) * hr.array().inverse().matrix();
      }
      break;
    }
  }
  return ev;
}

}  // namespace

double base_log_ratio(const VariationalSpec& spec, const Eigen::Ref<const Vector>& x) {
  return log_standard_normal(x) - energy_target(spec).log_density(x);
}

Vector base_log_ratio_grad(const VariationalSpec& spec, const Eigen::Ref<const Vector>& x) {
  return -x - energy_target(spec).grad_log_density(x);
}

double variational_objective(const VariationalSpec& spec, const Mlp& critic,
                             const RowMatrix& q_samples, const RowMatrix& reference) {
  check_critic(spec, critic, q_samples, reference);
  return evaluate(spec, q_samples, mlp_forward_batch(critic, q_samples), reference,
                  mlp_forward_batch(critic, reference), false)
      .value;
}

Mlp train_variational(const VariationalSpec& spec, Mlp critic, const RowMatrix& q_samples,
                      const RowMatrix& reference, int steps, double step_size) {
  if (steps < 1) throw InvalidArgument("training needs at least one step");
  if (!(step_size > 0.0)) throw InvalidArgument("training step size must be positive");
  check_critic(spec, critic, q_samples, reference);
  Vector params = critic.flatten();
  std::vector<DenseLayer> gq(critic.layers().size());
  std::vector<DenseLayer> gr(critic.layers().size());
  for (int step = 0; step < steps; ++step) {
    const ForwardCache cq = forward(critic, q_samples);
    const ForwardCache cr = forward(critic, reference);
    const ObjectiveEval ev = evaluate(spec, q_samples, cq.output.transpose(), reference,
                                      cr.output.transpose(), true);
    if (!std::isfinite(ev.value)) throw TrainingDiverged(step);
    backward(critic, cq, ev.q_grad.transpose(), &gq);
    backward(critic, cr, ev.ref_grad.transpose(), &gr);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < gq.size(); ++l) {
      const Matrix gw = gq[l].weight + gr[l].weight;
      const Vector gb = gq[l].bias + gr[l].bias;
      params.segment(at, gw.size()) += step_size * gw.reshaped();
      at += gw.size();
      params.segment(at, gb.size()) += step_size * gb;
      at += gb.size();
    }
    if (!params.allFinite()) throw TrainingDiverged(step);
    critic.assign(params);
  }
  return critic;
}

}  // namespace mwgrad
