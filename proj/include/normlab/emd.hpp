#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "normlab/constants.hpp"
#include "normlab/sketch.hpp"
#include "normlab/spaces.hpp"

namespace normlab {

struct GridCell {
  int x = 0;
  int y = 0;
  double w = 0.0;
};

// Finitely supported measure on the n x n integer grid. Cells absent
// from the support carry weight zero; duplicate input cells accumulate.
class GridMeasure {
 public:
  GridMeasure(int n, const std::vector<GridCell>& cells);

  int side() const { return n_; }
  double total() const { return total_; }
  const std::map<std::pair<int, int>, double>& cells() const { return cells_; }
  double at(int x, int y) const;

 protected:
  GridMeasure(int n, const std::vector<GridCell>& cells, bool allow_negative);

  int n_;
  double total_;
  std::map<std::pair<int, int>, double> cells_;
};

// Same support structure with signed weights summing to zero.
class SignedGridMeasure : public GridMeasure {
 public:
  SignedGridMeasure(int n, const std::vector<GridCell>& cells);

  GridMeasure positive_part() const;
  GridMeasure negative_part() const;
  // Coordinate-wise shift by -b: every grid cell (present or not) gains
  // mass -b, so the result is a dense positive measure when b < min.
  GridMeasure shifted_dense(long long b) const;
};

SignedGridMeasure subtract(const GridMeasure& a, const GridMeasure& b);
SignedGridMeasure subtract(const SignedGridMeasure& a, const SignedGridMeasure& b);

struct TransportFlow {
  int from_x = 0, from_y = 0;
  int to_x = 0, to_y = 0;
  double mass = 0.0;  // exact multiple of the quantization step
};

struct TransportPlan {
  std::vector<TransportFlow> flows;
  double cost = 0.0;
};

struct EmdResult {
  double distance = 0.0;
  TransportPlan plan;
};

// Cost of a plan under the l1 ground distance, recomputed from scratch.
double plan_cost(const TransportPlan& plan);

// Earth mover's distance between equal-mass measures: min-cost transport
// with l1 ground distance, solved exactly after scaling masses to
// integers (step 1/kMassScale, rounding error folded into the heaviest
// supply cell).
EmdResult emd_distance(const GridMeasure& a, const GridMeasure& b);

// EMD norm of a signed measure: transport cost from its positive to its
// negative part.
double emd_norm(const SignedGridMeasure& x);

struct EmbedConfig {
  int side = 0;        // grid side n
  int levels = 0;      // finest-to-coarsest: cell sides 2^0 .. 2^levels
  int shift_u = 0;     // in [0, 2^levels)
  int shift_v = 0;

  static EmbedConfig deterministic(int n);
  static EmbedConfig randomized(int n, std::uint64_t seed);
  void validate() const;

  Eigen::Index dimension() const;
};

// Randomly shifted dyadic grid embedding: one coordinate per grid cell
// per level, value 2^level times the signed mass inside the cell.
// Linear in the measure; l1 distances between embeddings approximate
// EMD up to an O(log n) factor.
Vector grid_embed(const GridMeasure& m, const EmbedConfig& cfg);
Vector grid_embed(const SignedGridMeasure& m, const EmbedConfig& cfg);

struct ShiftDecomposition {
  long long b1 = 0;  // largest even integer strictly below the min mass
  long long b2 = 0;  // b1 - 2
  GridMeasure x1;    // x - b1 on every cell: dense, strictly positive
  GridMeasure x2;    // x - b2 on every cell
};

// Largest even integer strictly smaller than the minimum coordinate of
// x, where the minimum ranges over all n^2 cells (so it is at most 0
// unless the support is full).
long long b_value(const SignedGridMeasure& x);

ShiftDecomposition shift_decompose(const SignedGridMeasure& x);

// One-way sketching scheme over positive grid measures.
class MeasureSketchScheme {
 public:
  virtual ~MeasureSketchScheme() = default;
  virtual SketchVector sketch(const GridMeasure& m) const = 0;
  virtual DtepAnswer decide(const SketchVector& a, const SketchVector& b) const = 0;
  virtual const DtepConfig& dtep() const = 0;
  virtual std::uint64_t fingerprint() const = 0;
};

// Oracle scheme: stores the measure densely and decides with the exact
// transport distance; unequal totals decide Far.
class ExactEmdScheme final : public MeasureSketchScheme {
 public:
  ExactEmdScheme(int n, DtepConfig dtep);

  SketchVector sketch(const GridMeasure& m) const override;
  DtepAnswer decide(const SketchVector& a, const SketchVector& b) const override;
  const DtepConfig& dtep() const override { return dtep_; }
  std::uint64_t fingerprint() const override { return fingerprint_; }

 private:
  int n_;
  DtepConfig dtep_;
  std::uint64_t fingerprint_;
};

// Embed-then-sketch scheme: dyadic grid embedding followed by a stable
// sketch of the embedded vector. Decides against the configured cut on
// the embedded scale, so thresholds must account for the embedding's
// distortion.
class EmbedSketchScheme final : public MeasureSketchScheme {
 public:
  EmbedSketchScheme(EmbedConfig embed, StableSketchConfig sketch);

  SketchVector sketch(const GridMeasure& m) const override;
  DtepAnswer decide(const SketchVector& a, const SketchVector& b) const override;
  const DtepConfig& dtep() const override { return cfg_.dtep; }
  std::uint64_t fingerprint() const override;

 private:
  EmbedConfig embed_;
  StableSketchConfig cfg_;
};

// Sketch of a signed measure through the shift trick: both parties shift
// by their own b^(1), b^(2), sketch the two dense positive measures with
// the base scheme, and tag each with a keyed 9-bit hash of the shift.
struct ReductionSketch {
  std::array<SketchVector, 2> base;
  std::array<std::uint16_t, 2> shift_tag{};  // 9-bit keyed hashes of b1, b2
  std::uint64_t fingerprint = 0;
};

struct ReductionConfig {
  std::uint64_t seed = kDefaultSeed;
  int repetitions = kReductionRepetitions;

  void validate() const;
};

ReductionSketch signed_reduction_sketch(const SignedGridMeasure& x, const MeasureSketchScheme& base,
                                        std::uint64_t seed);

// Decides from two reduction sketches: the first shift pair whose tags
// agree is forwarded to the base scheme; no agreement decides Far.
DtepAnswer signed_reduction_decide(const ReductionSketch& sx, const ReductionSketch& sy,
                                   const MeasureSketchScheme& base);

// Protocol with independent repetitions and majority vote. The base
// scheme for repetition i is drawn from `make` with a derived seed.
using MeasureSchemeFactory =
    std::function<std::shared_ptr<const MeasureSketchScheme>(std::uint64_t seed)>;

DtepAnswer reduction_protocol(const SignedGridMeasure& x, const SignedGridMeasure& y,
                              const MeasureSchemeFactory& make, const ReductionConfig& cfg);

}  // namespace normlab
