#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace svcox {

// Deterministic RNG wrapper. Sub-streams for chains/replications are
// derived from (seed, stream) with a splitmix64 scramble so that
// neighbouring stream indices give unrelated sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive(seed, stream));
  }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }

  // shape/rate parameterisation, mean = shape/rate
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  // InvGamma(shape, scale): density ∝ x^{-shape-1} exp(-scale/x)
  double inv_gamma(double shape, double scale) {
    double g = gamma(shape, scale);
    return 1.0 / g;
  }

  double beta(double a, double b) {
    double x = gamma(a, 1.0);
    double y = gamma(b, 1.0);
    return x / (x + y);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace svcox
