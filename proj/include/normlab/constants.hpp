#pragma once

#include <cstdint>

namespace normlab {

// Central record of numeric tolerances. Every module reads its defaults
// from here; nothing hard-codes a tolerance at a call site.
struct Tolerances {
  // Exact-arithmetic style identities (homogeneity, linearity, scale
  // equivariance, measure normalization).
  double identity = 1e-12;

  // Spectral computations: trace norm vs. oracle, Frobenius sandwich,
  // transport plan cost recomputation.
  double spectral = 1e-9;

  // EMD metric checks (triangle inequality on random triples, shift
  // identity) and zero-sum validation of signed measures.
  double emd = 1e-6;
  double signed_sum = 1e-9;

  // Threshold-map feasibility solver.
  double solver = 1e-7;           // feasibility gap tolerance
  double stabilization = 1e-9;    // relative change of the gap vector
  int stabilization_window = 100; // iterations between gap snapshots
  double snap = 1e-12;            // |a| below this is treated as zero

  // Unit-ball slack accepted by witness verification.
  double unit_ball = 1e-9;
};

inline constexpr Tolerances kTol{};

// Documented default seed used whenever a caller does not pass one.
inline constexpr std::uint64_t kDefaultSeed = 1729;

// Default measurement count (odd so the median is a single order
// statistic) and amplification schedule.
inline constexpr int kDefaultMeasurements = 401;
inline constexpr int kDefaultRepetitions = 35;
inline constexpr double kDefaultFarFraction = 0.3;
inline constexpr double kDefaultSuccessTarget = 0.9;

// Integer grid used by the min-cost-flow solver: masses are scaled by
// this denominator and rounded, with a total-mass correction.
inline constexpr double kMassScale = 1e6;

// Width of the reduction hash in bits and the default number of
// independent repetitions of the whole reduction protocol.
inline constexpr int kReductionHashBits = 9;
inline constexpr int kReductionRepetitions = 7;

}  // namespace normlab
