#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace dlsn {

/**
 * @brief Seeded random stream used by every sampler and generator.
 *
 * All randomness in the library flows through this type; nothing reads
 * ambient entropy. Independent streams are derived from a root seed and a
 * stream id, so e.g. chain initialization and the chain itself never share
 * a state.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix(seed, stream)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  // Uniform on the open interval (0, 1).
  double uniform_pos() {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return u;
  }

  double normal() { return normal_(engine_); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform_pos()); }

  /// Gamma with shape/rate parametrization.
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

  /// Derives the seed of stream `stream` under root `seed` (splitmix64 finalizer).
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dlsn
