#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mwgrad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Row-major so that every particle (row) is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for every library error. `category()` is a short stable token
/// that the CLI prints as its machine-readable failure line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view category() const noexcept = 0;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  std::string_view category() const noexcept override { return "invalid-argument"; }
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(int step);
  int step() const noexcept { return step_; }
  std::string_view category() const noexcept override { return "training-diverged"; }

 private:
  int step_;
};

class NumericDomainError : public Error {
 public:
  using Error::Error;
  std::string_view category() const noexcept override { return "numeric-domain"; }
};

/// Particle coordinates left the finite / bounded region.
class DivergedError : public Error {
 public:
  DivergedError(int iteration, int particle, const std::string& detail);
  int iteration() const noexcept { return iteration_; }
  int particle() const noexcept { return particle_; }
  std::string_view category() const noexcept override { return "diverged"; }

 private:
  int iteration_;
  int particle_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  std::string_view category() const noexcept override { return "config"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  std::string_view category() const noexcept override { return "io"; }
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// m particles in d dimensions; one particle per row.
class ParticleSet {
 public:
  explicit ParticleSet(RowMatrix data);

  const RowMatrix& data() const noexcept { return data_; }
  int size() const noexcept { return static_cast<int>(data_.rows()); }
  int dim() const noexcept { return static_cast<int>(data_.cols()); }
  auto particle(int i) const { return data_.row(i); }

  friend bool operator==(const ParticleSet& a, const ParticleSet& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           a.data_ == b.data_;
  }

 private:
  RowMatrix data_;
};

/// A point of the probability simplex.
class SimplexWeights {
 public:
  explicit SimplexWeights(Vector w);
  static SimplexWeights uniform(int k);

  const Vector& values() const noexcept { return w_; }
  int size() const noexcept { return static_cast<int>(w_.size()); }
  double operator[](int k) const { return w_[k]; }

  friend bool operator==(const SimplexWeights& a, const SimplexWeights& b) {
    return a.w_.size() == b.w_.size() && a.w_ == b.w_;
  }

 private:
  Vector w_;
};

/// Uniform weights (1/K, ..., 1/K); throws InvalidArgument for K = 0.
SimplexWeights init_weights(int k);

/// Per-objective velocity fields evaluated at the particles: K slices of m x d.
class VelocityBundle {
 public:
  explicit VelocityBundle(std::vector<RowMatrix> slices);

  int num_objectives() const noexcept { return static_cast<int>(slices_.size()); }
  int num_particles() const noexcept { return static_cast<int>(slices_.front().rows()); }
  int dim() const noexcept { return static_cast<int>(slices_.front().cols()); }
  const RowMatrix& slice(int k) const { return slices_[k]; }
  const std::vector<RowMatrix>& slices() const noexcept { return slices_; }

 private:
  std::vector<RowMatrix> slices_;
};

enum class Method { MwgradSvgd, MwgradBlob, MwgradNn, MooSvgd, MtSgd };
enum class GramNormalization { Sum, Mean };
enum class SvgdNormalization { Sum, Mean };
enum class BandwidthRule { Fixed, Median };

std::string_view to_string(Method m);
std::string_view to_string(GramNormalization g);
std::string_view to_string(SvgdNormalization s);
std::string_view to_string(BandwidthRule b);
Method parse_method(std::string_view s);
GramNormalization parse_gram_normalization(std::string_view s);
SvgdNormalization parse_svgd_normalization(std::string_view s);
BandwidthRule parse_bandwidth_rule(std::string_view s);
const std::vector<Method>& all_methods();

struct NnSettings {
  std::vector<int> hidden_widths{50, 50};
  int train_steps = 20;
  double train_step_size = 1e-2;
  /// Draws from the base density p per iteration (energy targets only).
  int reference_samples = 50;
};

struct RunConfig {
  int num_particles = 50;
  int dim = 2;
  int num_objectives = 4;
  double step_size_alpha = 1e-4;
  double step_size_beta = 1e-3;
  int num_iterations = 2000;
  double kernel_gamma = 0.01;
  BandwidthRule bandwidth = BandwidthRule::Fixed;
  Method method = Method::MwgradSvgd;
  std::uint64_t seed = 0;
  NnSettings nn;
  GramNormalization gram_normalization = GramNormalization::Sum;
  SvgdNormalization svgd_normalization = SvgdNormalization::Sum;
  int snapshot_every = 100;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

struct TraceRecord {
  int iter = 0;
  SimplexWeights weights = SimplexWeights::uniform(1);
  double stationarity = 0.0;
  /// nullopt where the functional value cannot be estimated.
  std::vector<std::optional<double>> per_objective_value;
  double grad_norm_sq = 0.0;
};

}  // namespace mwgrad
