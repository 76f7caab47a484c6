#pragma once

// Seeded random streams for the simulation engine.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The std:: distributions are implementation-defined, so the
// variates below are derived by hand to keep results identical across
// standard libraries.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hsurvey {

/// One step of SplitMix64; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for an independent stream identified by (seed, keys...). Distinct
/// key tuples give unrelated seeds; the mapping never depends on call order.
std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Gamma(shape, 1), Marsaglia-Tsang.
  double gamma(double shape);
  double beta(double a, double b);
  /// Uniform index in [0, n).
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hsurvey
