#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "mbmf/errors.hpp"

namespace mbmf {

// Seeded stream with platform-independent draws. std::uniform_*_distribution
// is implementation-defined, so sampling is done directly on the engine bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::size_t below(std::size_t n) {
    if (n == 0) throw InputError("Rng::below: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  // Index drawn from a discrete distribution given by non-negative weights
  // summing to 1 (within rounding; the last nonzero entry absorbs the slack).
  std::size_t categorical(std::span<const double> probs) {
    if (probs.empty()) throw InputError("Rng::categorical: empty distribution");
    const double u = uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  // Independent child stream, e.g. one per run or per component.
  Rng split() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ULL); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mbmf
