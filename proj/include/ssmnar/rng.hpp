#pragma once

#include <cstdint>
#include <random>

namespace ssmnar {

// Seedable deterministic generator. Identical seed => identical stream.
// split(i) derives an independent stream for replicate i via splitmix64
// seed scrambling, so replicates can run in parallel.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : engine_(scramble(seed)), seed_base_(scramble(seed)) {}

  Rng split(std::uint64_t stream) const {
    return Rng(scramble(seed_base_ + 0x9e3779b97f4a7c15ULL * (stream + 1)), 0);
  }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  Rng(std::uint64_t scrambled, int) : engine_(scrambled), seed_base_(scrambled) {}

  static std::uint64_t scramble(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  std::uint64_t seed_base_ = 0;
};

}  // namespace ssmnar
