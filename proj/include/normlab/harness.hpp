#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "normlab/emd.hpp"
#include "normlab/sketch.hpp"
#include "normlab/spaces.hpp"

namespace normlab {

// 95% Wilson score interval half-width for `successes` out of `trials`.
double wilson_half_width(long successes, long trials);

struct ExperimentReport {
  long trials = 0;
  long close_successes = 0;
  long far_successes = 0;
  double close_rate = 0.0;
  double far_rate = 0.0;
  double close_half_width = 0.0;  // Wilson 95%
  double far_half_width = 0.0;
  std::uint64_t seed = 0;
};

// Close/far vector pairs at pinned lp distances inside the promise
// region. Every emitted pair is re-checked against the exact norm;
// a pair landing in the excluded band (r, approx*r] raises
// generator_error.
class LpPairGenerator {
 public:
  LpPairGenerator(double p, int dim, DtepConfig dtep, double close_dist, double far_dist,
                  std::uint64_t seed);

  std::pair<Vector, Vector> close_pair(long trial) const;
  std::pair<Vector, Vector> far_pair(long trial) const;
  const DtepConfig& dtep() const { return dtep_; }

 private:
  std::pair<Vector, Vector> make_pair(long trial, double dist, bool want_close) const;

  double p_;
  int dim_;
  DtepConfig dtep_;
  double close_dist_;
  double far_dist_;
  std::uint64_t seed_;
};

// Close/far signed-measure pairs under the transport distance, built
// from dipoles (one source, one sink cell) whose separation divides
// the mass quantization step, so distances are exact.
class EmdPairGenerator {
 public:
  EmdPairGenerator(int n, DtepConfig dtep, double close_dist, double far_dist, std::uint64_t seed);

  std::pair<SignedGridMeasure, SignedGridMeasure> close_pair(long trial) const;
  std::pair<SignedGridMeasure, SignedGridMeasure> far_pair(long trial) const;
  const DtepConfig& dtep() const { return dtep_; }
  int side() const { return n_; }

 private:
  std::pair<SignedGridMeasure, SignedGridMeasure> make_pair(long trial, double dist,
                                                            bool want_close) const;

  int n_;
  DtepConfig dtep_;
  double close_dist_;
  double far_dist_;
  std::uint64_t seed_;
};

// Close/far pairs of product points under the max-of-norms distance:
// close pairs keep every component within the threshold, far pairs
// push one component past approx * t. Ground truth via the exact
// product norm.
class ProductPairGenerator {
 public:
  ProductPairGenerator(double base_p, int k, int dim, DtepConfig dtep, double close_dist,
                       double far_dist, std::uint64_t seed);

  std::pair<ProductPoint, ProductPoint> close_pair(long trial) const;
  std::pair<ProductPoint, ProductPoint> far_pair(long trial) const;
  const DtepConfig& dtep() const { return dtep_; }
  int arity() const { return k_; }

 private:
  std::pair<ProductPoint, ProductPoint> make_pair(long trial, bool want_close) const;

  double p_;
  int k_;
  int dim_;
  DtepConfig dtep_;  // thresholds in the product space: t and approx
  double close_dist_;
  double far_dist_;
  std::uint64_t seed_;
};

// One close and one far decision per trial, each on a fresh scheme
// drawn from the factory with a per-trial derived seed. Ground truth
// is recomputed with the exact norm for every emitted pair.
ExperimentReport run_dtep_experiment(const SchemeFactory& make, const LpPairGenerator& gen,
                                     long trials, std::uint64_t seed, int jobs = 1);

// Product-space experiment: per trial builds a boosted scheme (fresh
// sign seed, fresh base scheme at threshold k*t) and scores it on one
// close and one far product pair.
ExperimentReport run_boost_experiment(const SchemeFactory& make_base, const BoostConfig& bc,
                                      const ProductPairGenerator& gen, long trials,
                                      std::uint64_t seed, int jobs = 1);

using MeasureDecider = std::function<DtepAnswer(const SignedGridMeasure&, const SignedGridMeasure&,
                                                std::uint64_t seed)>;

ExperimentReport run_emd_experiment(const MeasureDecider& decide, const EmdPairGenerator& gen,
                                    long trials, std::uint64_t seed, int jobs = 1);

struct DistortionRow {
  int first = 0;
  int second = 0;
  double emd = 0.0;
  double embedded = 0.0;
  double ratio = 0.0;
};

struct DistortionReport {
  int side = 0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double distortion = 0.0;  // max_ratio / min_ratio
  std::vector<DistortionRow> rows;
};

// Pairwise comparison of the transport distance against the l1
// distance of the embeddings. A zero transport distance with a
// non-vanishing embedded distance is an embedding fault.
DistortionReport distortion_report(const std::vector<SignedGridMeasure>& instances,
                                   const EmbedConfig& cfg);

// Random signed test measures with a handful of dipoles; masses are
// multiples of the quantization step.
std::vector<SignedGridMeasure> random_signed_measures(int n, int count, std::uint64_t seed);

struct TraceGapRow {
  int n = 0;
  long trials = 0;
  double max_ratio = 0.0;       // trace norm over Frobenius norm
  double identity_ratio = 0.0;  // the same ratio on the identity
};

// Trace-to-Frobenius ratio profile over random Gaussian matrices.
std::vector<TraceGapRow> trace_gap_experiment(const std::vector<int>& sizes, long trials,
                                              std::uint64_t seed);

}  // namespace normlab
