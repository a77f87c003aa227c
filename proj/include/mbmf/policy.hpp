#pragma once

// Numerical primitives shared by both experts and the meta-controller:
// Boltzmann softmax, Shannon entropy in bits and the exponential low-pass
// filter used for monitoring.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mbmf/errors.hpp"
#include "mbmf/random.hpp"

namespace mbmf {

inline constexpr double kProbTolerance = 1e-9;

// Action-values or expert-values fed to softmax.
using ValueVector = std::vector<double>;

// A probability vector over actions (or experts). Construction validates
// non-negativity and unit mass within kProbTolerance.
class ProbDist {
 public:
  ProbDist() = default;

  explicit ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InputError("ProbDist: empty distribution");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw InputError("ProbDist: negative or non-finite entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance)
      throw InputError("ProbDist: entries sum to " + std::to_string(sum) + ", expected 1");
  }

  static ProbDist uniform(std::size_t n) {
    if (n == 0) throw InputError("ProbDist::uniform: n must be positive");
    return ProbDist(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static ProbDist one_hot(std::size_t n, std::size_t index) {
    if (index >= n) throw InputError("ProbDist::one_hot: index out of range");
    std::vector<double> p(n, 0.0);
    p[index] = 1.0;
    return ProbDist(std::move(p));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  std::vector<double> probs_;
};

// exp(v_i / tau) / sum_j exp(v_j / tau), with the maximum subtracted first so
// that tau = 0.02 against values of order 1 cannot overflow.
inline ProbDist softmax(std::span<const double> values, double tau) {
  if (!(tau > 0.0)) throw ParameterError("softmax: tau must be positive");
  if (values.empty()) throw InputError("softmax: empty value vector");
  double vmax = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("softmax: non-finite value");
    vmax = std::max(vmax, v);
  }
  std::vector<double> p(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    p[i] = std::exp((values[i] - vmax) / tau);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return ProbDist(std::move(p));
}

// -sum p log2 p, with 0 log 0 = 0.
inline double entropy_bits(const ProbDist& dist) {
  double h = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

inline double entropy_bits(std::span<const double> probs) {
  return entropy_bits(ProbDist(std::vector<double>(probs.begin(), probs.end())));
}

inline void check_filter_coefficient(double alpha_f) {
  if (!(alpha_f >= 0.0 && alpha_f <= 1.0))
    throw ParameterError("low_pass: alpha_f must lie in [0, 1]");
}

// (1 - alpha_f) * old + alpha_f * fresh
inline double low_pass(double old, double fresh, double alpha_f) {
  check_filter_coefficient(alpha_f);
  return (1.0 - alpha_f) * old + alpha_f * fresh;
}

inline ProbDist low_pass(const ProbDist& old, const ProbDist& fresh, double alpha_f) {
  check_filter_coefficient(alpha_f);
  if (old.size() != fresh.size()) throw InputError("low_pass: length mismatch");
  std::vector<double> out(old.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - alpha_f) * old[i] + alpha_f * fresh[i];
  return ProbDist(std::move(out));
}

// Softmax followed by one draw. Both experts and the DQN decide this way.
struct Decision {
  std::size_t action = 0;
  ProbDist dist;
};

inline Decision softmax_decide(std::span<const double> values, double tau, Rng& rng) {
  ProbDist dist = softmax(values, tau);
  const std::size_t action = rng.categorical(dist.probs());
  return {action, std::move(dist)};
}

}  // namespace mbmf
