#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "normlab/constants.hpp"
#include "normlab/rng.hpp"
#include "normlab/spaces.hpp"

namespace normlab {

// Parameters of the distance threshold estimation problem: decide
// "distance <= r" vs "distance > approx * r". Inputs in between are
// outside the promise.
struct DtepConfig {
  double r = 1.0;
  double approx = 2.0;
  double success_target = kDefaultSuccessTarget;

  void validate() const;
  // Decision cut between r and approx*r, symmetric in log scale.
  double cut() const;
};

struct StableSketchConfig {
  double p = 1.0;      // index of the stable family, in (0, 2]
  int m = kDefaultMeasurements;  // odd
  std::uint64_t seed = kDefaultSeed;
  DtepConfig dtep;

  void validate() const;
};

std::uint64_t config_fingerprint(const StableSketchConfig& cfg);

struct SketchVector {
  Vector values;
  std::uint64_t fingerprint = 0;
};

enum class DtepAnswer { Close, Far };

struct BoostConfig {
  int k = 1;
  int repetitions = kDefaultRepetitions;
  double far_fraction = kDefaultFarFraction;
  std::uint64_t seed = kDefaultSeed;

  void validate() const;
};

// Median of |S| for a standard symmetric p-stable S. Exact for p = 1
// (Cauchy) and p = 2 (normal); otherwise calibrated once per p by a
// fixed-seed Monte-Carlo run and cached.
double stable_median_abs(double p);

// values_i = <x, v_i> with v_i drawn i.i.d. from the p-stable family,
// reproducibly from derive_seed(cfg.seed, i). Linear in x for a fixed
// seed and dimension.
SketchVector stable_measurements(const Vector& x, const StableSketchConfig& cfg);

// Median estimator of the distance between the sketched points.
double estimate_norm(const SketchVector& sx, const SketchVector& sy, const StableSketchConfig& cfg);

DtepAnswer dtep_decide(const SketchVector& sx, const SketchVector& sy, const StableSketchConfig& cfg);

// One-way sketching scheme over vectors: shared randomness is fixed by
// the scheme's configuration, so both parties sketch independently and
// any party can decide from two sketches.
class SketchScheme {
 public:
  virtual ~SketchScheme() = default;
  virtual SketchVector sketch(const Vector& x) const = 0;
  virtual DtepAnswer decide(const SketchVector& a, const SketchVector& b) const = 0;
  virtual const DtepConfig& dtep() const = 0;
  // Reported size is a measurement count, not bits.
  virtual int measurement_count() const = 0;
  // Fingerprint stamped on this scheme's sketches.
  virtual std::uint64_t fingerprint() const = 0;
};

class StableSketchScheme final : public SketchScheme {
 public:
  StableSketchScheme(StableSketchConfig cfg, int dim);

  SketchVector sketch(const Vector& x) const override;
  DtepAnswer decide(const SketchVector& a, const SketchVector& b) const override;
  const DtepConfig& dtep() const override { return cfg_.dtep; }
  int measurement_count() const override { return cfg_.m; }
  std::uint64_t fingerprint() const override { return config_fingerprint(cfg_); }
  const StableSketchConfig& config() const { return cfg_; }

 private:
  StableSketchConfig cfg_;
  int dim_;
};

// Oracle scheme: the "sketch" is the whole vector and the decision uses
// the exact lp norm. Used as a correctness baseline for protocol tests.
class ExactNormScheme final : public SketchScheme {
 public:
  ExactNormScheme(double p, DtepConfig dtep);

  SketchVector sketch(const Vector& x) const override;
  DtepAnswer decide(const SketchVector& a, const SketchVector& b) const override;
  const DtepConfig& dtep() const override { return dtep_; }
  int measurement_count() const override { return -1; }  // not a real sketch
  std::uint64_t fingerprint() const override { return fingerprint_; }

 private:
  double p_;
  DtepConfig dtep_;
  std::uint64_t fingerprint_;
};

struct ProductSketch {
  std::vector<SketchVector> repetitions;
  std::uint64_t fingerprint = 0;
};

// Product-space booster: per repetition draws signs over the k parts,
// sketches the signed sum with the base scheme (which must be configured
// at threshold k*t), and takes a Far vote over repetitions. Targets the
// max-of-norms product space with approximation k*D.
class BoostedScheme {
 public:
  BoostedScheme(std::shared_ptr<const SketchScheme> base_at_kt, BoostConfig bc);

  ProductSketch sketch(const ProductPoint& x) const;
  DtepAnswer decide(const ProductSketch& a, const ProductSketch& b) const;

  const BoostConfig& config() const { return bc_; }
  const SketchScheme& base() const { return *base_; }
  // Threshold the boosted scheme targets: base threshold / k.
  double target_threshold() const { return base_->dtep().r / bc_.k; }
  double target_approx() const { return bc_.k * base_->dtep().approx; }

 private:
  std::shared_ptr<const SketchScheme> base_;
  BoostConfig bc_;
};

inline BoostedScheme boost_linf(std::shared_ptr<const SketchScheme> base_at_kt, BoostConfig bc) {
  return BoostedScheme(std::move(base_at_kt), std::move(bc));
}

using SchemeFactory = std::function<std::shared_ptr<const SketchScheme>(std::uint64_t seed)>;

// R independent copies of a scheme; Far when at least `frac` of the
// copies vote Far. Sketch size multiplies by R.
class AmplifiedScheme final : public SketchScheme {
 public:
  AmplifiedScheme(const SchemeFactory& make, int repetitions, double frac, std::uint64_t seed);

  SketchVector sketch(const Vector& x) const override;
  DtepAnswer decide(const SketchVector& a, const SketchVector& b) const override;
  const DtepConfig& dtep() const override { return copies_.front()->dtep(); }
  int measurement_count() const override;
  std::uint64_t fingerprint() const override { return fingerprint_; }

 private:
  std::vector<std::shared_ptr<const SketchScheme>> copies_;
  double frac_;
  std::uint64_t fingerprint_;
};

inline AmplifiedScheme amplify(const SchemeFactory& make, int repetitions, double frac,
                               std::uint64_t seed) {
  return AmplifiedScheme(make, repetitions, frac, seed);
}

// Smallest vote count that reaches a `frac` fraction of `reps`.
int far_vote_threshold(int reps, double frac);

// Pr[Bin(n, p) >= k].
double binomial_tail_ge(int n, int k, double p);

// Success bounds of the frac-vote rule for given per-repetition rates.
double amplified_far_rate(int reps, double frac, double base_far_rate);
double amplified_close_error(int reps, double frac, double base_close_error);

// Empirical tail of a single stable measurement: for each t in t_grid,
// the fraction of fresh measurement vectors with |<x, v>| >= t * ||x||_p.
std::vector<std::pair<double, double>> tail_profile(const StableSketchConfig& cfg, const Vector& x,
                                                    const std::vector<double>& t_grid, long trials);

}  // namespace normlab
