#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace mocalib {

// Mixes a base seed with a stream counter (splitmix64 finalizer), so each
// RANSAC iteration or synthetic frame owns an independent substream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Bit-reproducible sampling on top of std::mt19937_64. The standard
// distributions are implementation-defined, so they are not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), n > 0, unbiased.
  std::size_t index(std::size_t n);
  // Standard normal.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mocalib
