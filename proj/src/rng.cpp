#include "mwgrad/rng.hpp"

namespace mwgrad {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RowMatrix Rng::standard_normal(int rows, int cols) {
  RowMatrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = normal();
  }
  return out;
}

Rng substream(std::uint64_t root_seed, std::string_view purpose, std::uint64_t objective,
              std::uint64_t iteration) {
  std::uint64_t h = splitmix64(root_seed);
  h = splitmix64(h ^ fnv1a(purpose));
  h = splitmix64(h ^ objective);
  h = splitmix64(h ^ (iteration * 0x2545f4914f6cdd1dULL));
  return Rng(h);
}

ParticleSet init_particles(const RunConfig& config) {
  Rng rng = substream(config.seed, streams::kParticleInit);
  return ParticleSet(rng.standard_normal(config.num_particles, config.dim));
}

}  // namespace mwgrad
