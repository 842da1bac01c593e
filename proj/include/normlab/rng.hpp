#pragma once

#include <cmath>
#include <cstdint>

#include "normlab/errors.hpp"

namespace normlab {

// SplitMix64 finalizer. Used both as the stream generator and as the
// seed-derivation hash, so parallel trials are schedule-independent.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Seed for sub-stream `index` of a master seed. derive_seed(s, i) and
// derive_seed(s, j) are independent streams for i != j.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index ^ 0xA5A5A5A55A5A5A5Aull));
}

// Counter-based uniform stream: state advances by a fixed increment and
// every output is a pure function of (seed, counter).
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in the half-open interval [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_positive_unit() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  bool next_sign() { return (next_u64() & 1ull) != 0; }

  double next_exponential() { return -std::log(next_positive_unit()); }

  // Standard normal via Box-Muller. One uniform pair per sample keeps
  // the stream layout independent of call order.
  double next_gaussian() {
    const double u = next_positive_unit();
    const double v = next_unit();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925287 * v);
  }

  double next_cauchy() {
    return std::tan(3.141592653589793238462643 * (next_unit() - 0.5));
  }

  // Symmetric p-stable sample, scale 1 in the standard parameterization.
  // p = 2 and p = 1 use the exact closed forms; otherwise the
  // Chambers-Mallows-Stuck formula.
  double next_stable(double p) {
    if (!(p > 0.0) || p > 2.0) throw input_error("stable sampler requires p in (0, 2]");
    if (p == 2.0) return next_gaussian();
    if (p == 1.0) return next_cauchy();
    const double theta = 3.141592653589793238462643 * (next_unit() - 0.5);
    const double w = next_exponential();
    const double a = std::sin(p * theta) / std::pow(std::cos(theta), 1.0 / p);
    const double b = std::pow(std::cos((1.0 - p) * theta) / w, (1.0 - p) / p);
    return a * b;
  }

 private:
  std::uint64_t state_;
};

}  // namespace normlab
