#pragma once

#include <array>
#include <cstdint>

namespace hbreset {

// xoshiro256** seeded through splitmix64. Every draw is computed with
// integer arithmetic plus log/sqrt/cos for normals, so streams are
// reproducible across platforms and standard libraries.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  // +1 or -1 with equal probability.
  int sign();

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hbreset
