#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace ddpq {

// SplitMix64 finalizer; used to derive independent seeds for sub-streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed) ^ mix64(tag + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return derive_seed(derive_seed(seed, tag), index);
}

/// Seedable generator with the sampling primitives the sampler needs.
/// `split(tag)` yields an independent child stream; the parent is untouched.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  engine_type& engine() { return engine_; }

  Rng split(std::uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

  double uniform() {
    // 53-bit mantissa in [0,1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma with shape and *rate*.
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
      throw std::invalid_argument("gamma: shape and rate must be positive");
    }
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    const double s = x + y;
    if (s <= 0.0) {
      // both underflowed; fall back on the mean
      return a / (a + b);
    }
    return x / s;
  }

  /// Inverse gamma with shape and scale: 1/Ga(shape, rate=scale).
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

  double chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    if (!(total > 0.0)) throw std::runtime_error("categorical: zero total mass");
    const double target = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (target < acc) return i;
    }
    // rounding: last index with positive mass
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

/// Normalized probabilities from log-weights, with max subtraction.
/// Throws if every weight is -inf or NaN.
inline std::vector<double> softmax_probs(std::span<const double> log_weights) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : log_weights) {
    if (v > mx) mx = v;
  }
  if (!std::isfinite(mx)) throw std::runtime_error("allocation weights underflow: all zero");
  std::vector<double> p(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_weights[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace ddpq
