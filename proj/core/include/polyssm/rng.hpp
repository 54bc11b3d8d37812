#pragma once

#include <cstdint>

namespace polyssm {

// Counter-based generator: draw k is mix(seed + k * golden). Streams derived
// with split() are independent of how many draws the parent has made, so
// per-sample generation does not depend on iteration order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  Rng split(std::uint64_t index) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace polyssm
