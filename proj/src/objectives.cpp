#include "mwgrad/objectives.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace mwgrad {

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
  const auto d = components_.front().mean.size();
  if (d < 1) throw InvalidArgument("mixture dimension must be >= 1");
  double total = 0.0;
  factors_.reserve(components_.size());
  for (const auto& c : components_) {
    if (!std::isfinite(c.weight) || c.weight <= 0.0 || c.weight > 1.0) {
      throw InvalidArgument("mixture weights must lie in (0, 1]");
    }
    if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d) {
      throw InvalidArgument("mixture component shapes are inconsistent");
    }
    if (!c.mean.allFinite() || !c.covariance.allFinite()) {
      throw InvalidArgument("mixture parameters must be finite");
    }
    if (!c.covariance.isApprox(c.covariance.transpose(), 1e-12)) {
      throw InvalidArgument("mixture covariance must be symmetric");
    }
    Eigen::LLT<Matrix> chol(c.covariance);
    if (chol.info() != Eigen::Success) {
      throw InvalidArgument("mixture covariance must be positive definite");
    }
    const Matrix& l = chol.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) log_det += 2.0 * std::log(l(i, i));
    const double log_norm = std::log(c.weight) -
                            0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
                            0.5 * log_det;
    factors_.push_back(Factor{std::move(chol), log_norm});
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("mixture weights must sum to 1");
}

GaussianMixture GaussianMixture::standard_normal(int dim) {
  return GaussianMixture({GaussianComponent{1.0, Vector::Zero(dim), Matrix::Identity(dim, dim)}});
}

GaussianMixture GaussianMixture::isotropic(const std::vector<double>& weights,
                                           const std::vector<Vector>& means) {
  if (weights.size() != means.size()) {
    throw InvalidArgument("mixture weights and means differ in count");
  }
  std::vector<GaussianComponent> comps;
  comps.reserve(weights.size());
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const auto d = means[c].size();
    comps.push_back({weights[c], means[c], Matrix::Identity(d, d)});
  }
  return GaussianMixture(std::move(comps));
}

void GaussianMixture::component_log_terms(const Eigen::Ref<const Vector>& x, Vector& out) const {
  if (x.size() != dim()) throw InvalidArgument("point dimension does not match mixture");
  out.resize(num_components());
  for (int c = 0; c < num_components(); ++c) {
    const Vector z = factors_[c].chol.matrixL().solve(x - components_[c].mean);
    out[c] = factors_[c].log_norm - 0.5 * z.squaredNorm();
  }
}

double GaussianMixture::log_density(const Eigen::Ref<const Vector>& x) const {
  Vector terms;
  component_log_terms(x, terms);
  const double top = terms.maxCoeff();
  return top + std::log((terms.array() - top).exp().sum());
}

Vector GaussianMixture::grad_log_density(const Eigen::Ref<const Vector>& x) const {
  Vector terms;
  component_log_terms(x, terms);
  const double top = terms.maxCoeff();
  Vector resp = (terms.array() - top).exp().matrix();
  resp /= resp.sum();
  Vector grad = Vector::Zero(dim());
  for (int c = 0; c < num_components(); ++c) {
    grad += resp[c] * factors_[c].chol.solve(components_[c].mean - x);
  }
  return grad;
}

RowMatrix GaussianMixture::sample(int n, Rng& rng) const {
  if (n < 1) throw InvalidArgument("sample count must be >= 1");
  RowMatrix out(n, dim());
  Vector z(dim());
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    int chosen = num_components() - 1;
    double cum = 0.0;
    for (int c = 0; c < num_components(); ++c) {
      cum += components_[c].weight;
      if (u < cum) {
        chosen = c;
        break;
      }
    }
    for (int j = 0; j < dim(); ++j) z[j] = rng.normal();
    out.row(i) = (components_[chosen].mean + factors_[chosen].chol.matrixL() * z).transpose();
  }
  return out;
}

double mixture_log_density(const GaussianMixture& gm, const Eigen::Ref<const Vector>& x) {
  return gm.log_density(x);
}

Vector mixture_grad_log_density(const GaussianMixture& gm, const Eigen::Ref<const Vector>& x) {
  return gm.grad_log_density(x);
}

std::string_view to_string(Divergence d) { return d == Divergence::Kl ? "kl" : "js"; }

Divergence parse_divergence(std::string_view s) {
  if (s == "kl") return Divergence::Kl;
  if (s == "js") return Divergence::Js;
  throw ConfigError("unknown divergence '" + std::string(s) + "'");
}

SampleObjective::SampleObjective(RowMatrix samples, Divergence divergence)
    : samples_(std::move(samples)), divergence_(divergence) {
  if (samples_.rows() < 2 || samples_.cols() < 1) {
    throw InvalidArgument("sample objective needs at least two samples");
  }
  if (!samples_.allFinite()) throw InvalidArgument("sample objective has non-finite entries");
}

int objective_dim(const Objective& obj) {
  return std::visit(
      [](const auto& o) {
        if constexpr (std::is_same_v<std::decay_t<decltype(o)>, EnergyObjective>) {
          return o.target.dim();
        } else {
          return o.dim();
        }
      },
      obj);
}

double potential(const EnergyObjective& obj, const Eigen::Ref<const Vector>& x) {
  return -obj.target.log_density(x);
}

Vector potential_grad(const EnergyObjective& obj, const Eigen::Ref<const Vector>& x) {
  return -obj.target.grad_log_density(x);
}

RowMatrix potential_grads(const EnergyObjective& obj, const RowMatrix& points) {
  RowMatrix out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.row(i) = potential_grad(obj, points.row(i).transpose()).transpose();
  }
  return out;
}

std::vector<GaussianMixture> sample_targets_from_paper() {
  const std::vector<std::pair<Vector, Vector>> means{
      {Vector{{4.0, -4.0}}, Vector{{0.0, 0.1}}},
      {Vector{{-4.0, 4.0}}, Vector{{0.0, -0.1}}},
      {Vector{{-4.0, -4.0}}, Vector{{0.1, 0.0}}},
      {Vector{{4.0, 4.0}}, Vector{{-0.1, 0.0}}},
  };
  std::vector<GaussianMixture> out;
  out.reserve(means.size());
  for (const auto& [outer, inner] : means) {
    out.push_back(GaussianMixture::isotropic({0.7, 0.3}, {outer, inner}));
  }
  return out;
}

RowMatrix draw_target_samples(const GaussianMixture& gm, int n, Rng& rng) {
  return gm.sample(n, rng);
}

}  // namespace mwgrad
