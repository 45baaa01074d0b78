#include "mwgrad/core.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace mwgrad {

TrainingDiverged::TrainingDiverged(int step)
    : Error("variational training produced a non-finite loss at step " + std::to_string(step)),
      step_(step) {}

DivergedError::DivergedError(int iteration, int particle, const std::string& detail)
    : Error("particle " + std::to_string(particle) + " diverged at iteration " +
            std::to_string(iteration) + ": " + detail),
      iteration_(iteration),
      particle_(particle) {}

ParticleSet::ParticleSet(RowMatrix data) : data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw InvalidArgument("particle set needs at least one particle and one dimension");
  }
  if (!data_.allFinite()) throw InvalidArgument("particle set contains non-finite entries");
}

SimplexWeights::SimplexWeights(Vector w) : w_(std::move(w)) {
  if (w_.size() < 1) throw InvalidArgument("simplex weights must be non-empty");
  if (!w_.allFinite()) throw InvalidArgument("simplex weights contain non-finite entries");
  if ((w_.array() < 0.0).any()) throw InvalidArgument("simplex weights must be non-negative");
  if (std::abs(w_.sum() - 1.0) > 1e-10) {
    throw InvalidArgument("simplex weights must sum to 1");
  }
}

SimplexWeights SimplexWeights::uniform(int k) {
  if (k < 1) throw InvalidArgument("number of objectives must be positive");
  return SimplexWeights(Vector::Constant(k, 1.0 / k));
}

SimplexWeights init_weights(int k) { return SimplexWeights::uniform(k); }

VelocityBundle::VelocityBundle(std::vector<RowMatrix> slices) : slices_(std::move(slices)) {
  if (slices_.empty()) throw InvalidArgument("velocity bundle needs at least one objective");
  const auto rows = slices_.front().rows();
  const auto cols = slices_.front().cols();
  for (const auto& s : slices_) {
    if (s.rows() != rows || s.cols() != cols) {
      throw InvalidArgument("velocity bundle slices must share one shape");
    }
    if (!s.allFinite()) throw InvalidArgument("velocity bundle contains non-finite entries");
  }
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E e, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, Method>, 5> kMethods{{
    {"mwgrad-svgd", Method::MwgradSvgd},
    {"mwgrad-blob", Method::MwgradBlob},
    {"mwgrad-nn", Method::MwgradNn},
    {"moo-svgd", Method::MooSvgd},
    {"mt-sgd", Method::MtSgd},
}};
constexpr std::array<std::pair<std::string_view, GramNormalization>, 2> kGram{{
    {"sum", GramNormalization::Sum},
    {"mean", GramNormalization::Mean},
}};
constexpr std::array<std::pair<std::string_view, SvgdNormalization>, 2> kSvgd{{
    {"sum", SvgdNormalization::Sum},
    {"mean", SvgdNormalization::Mean},
}};
constexpr std::array<std::pair<std::string_view, BandwidthRule>, 2> kBandwidth{{
    {"fixed", BandwidthRule::Fixed},
    {"median", BandwidthRule::Median},
}};

}  // namespace

std::string_view to_string(Method m) { return enum_name(m, kMethods); }
std::string_view to_string(GramNormalization g) { return enum_name(g, kGram); }
std::string_view to_string(SvgdNormalization s) { return enum_name(s, kSvgd); }
std::string_view to_string(BandwidthRule b) { return enum_name(b, kBandwidth); }

Method parse_method(std::string_view s) { return parse_enum(s, kMethods, "method"); }
GramNormalization parse_gram_normalization(std::string_view s) {
  return parse_enum(s, kGram, "gram normalization");
}
SvgdNormalization parse_svgd_normalization(std::string_view s) {
  return parse_enum(s, kSvgd, "svgd normalization");
}
BandwidthRule parse_bandwidth_rule(std::string_view s) {
  return parse_enum(s, kBandwidth, "bandwidth rule");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::MwgradSvgd, Method::MwgradBlob,
                                           Method::MwgradNn, Method::MooSvgd, Method::MtSgd};
  return methods;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(num_particles >= 1, "num_particles must be >= 1");
  require(dim >= 1, "dim must be >= 1");
  require(num_objectives >= 1, "num_objectives must be >= 1");
  require(std::isfinite(step_size_alpha) && step_size_alpha > 0, "step_size_alpha must be > 0");
  require(std::isfinite(step_size_beta) && step_size_beta > 0, "step_size_beta must be > 0");
  require(num_iterations >= 1, "num_iterations must be >= 1");
  require(std::isfinite(kernel_gamma) && kernel_gamma > 0, "kernel_gamma must be > 0");
  require(snapshot_every >= 1, "snapshot_every must be >= 1");
  require(!nn.hidden_widths.empty(), "nn.hidden_widths must be non-empty");
  for (int w : nn.hidden_widths) require(w >= 1, "nn.hidden_widths entries must be >= 1");
  require(nn.train_steps >= 1, "nn.train_steps must be >= 1");
  require(std::isfinite(nn.train_step_size) && nn.train_step_size > 0,
          "nn.train_step_size must be > 0");
  require(nn.reference_samples >= 1, "nn.reference_samples must be >= 1");
}

}  // namespace mwgrad
