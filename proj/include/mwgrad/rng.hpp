#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mwgrad/core.hpp"

namespace mwgrad {

/// Independent random stream. Every consumer derives its own stream from the
/// root seed with `substream`, so adding a consumer never shifts another's draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  /// Uniform in [0, 1).
  double uniform01() { return unit_(engine_); }

  RowMatrix standard_normal(int rows, int cols);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// Stream keyed by (purpose, objective index, iteration) under one root seed.
Rng substream(std::uint64_t root_seed, std::string_view purpose, std::uint64_t objective = 0,
              std::uint64_t iteration = 0);

namespace streams {
inline constexpr std::string_view kParticleInit = "particle-init";
inline constexpr std::string_view kNnInit = "nn-init";
inline constexpr std::string_view kNnReference = "nn-reference";
inline constexpr std::string_view kTargetSamples = "target-samples";
}  // namespace streams

/// m x d matrix of i.i.d. standard-normal draws from the particle-init stream.
ParticleSet init_particles(const RunConfig& config);

}  // namespace mwgrad
