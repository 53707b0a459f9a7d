#pragma once

#include <cstdint>
#include <random>

namespace cat {

/// Portable seeded generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not, so every derived variate is
/// computed here:
///   uniform01  = (next() >> 11) * 2^-53
///   below(n)   = rejection sampling on next() to remove modulo bias
///   normal     = Box-Muller on two uniform01 draws (1 - u guards log(0))
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cat
