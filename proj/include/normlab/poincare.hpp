#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "normlab/constants.hpp"
#include "normlab/spaces.hpp"

namespace normlab {

// Unordered pairs {i < j} over n points, indexed lexicographically.
// Squared-distance vectors and pair weights live in this coordinate
// system.
class PairSpace {
 public:
  explicit PairSpace(int n);

  int points() const { return n_; }
  int count() const { return n_ * (n_ - 1) / 2; }
  int index(int i, int j) const;
  std::pair<int, int> pair(int idx) const;

 private:
  int n_;
};

struct ThresholdParams {
  double s1 = 0.0, s2 = 0.0;      // metric thresholds, 0 < s1 < s2
  double tau1 = 0.0, tau2 = 0.0;  // target distances, 0 < tau1 < tau2 < tau3
  double tau3 = 0.0;              // may be +infinity at the API boundary

  void validate() const;
  bool solvable() const;  // finite tau3, required by the solver
};

// Squared distances of a point configuration, one row per point.
Vector squared_distances(const Matrix& points, const PairSpace& ps);

// Projection of a squared-distance vector onto the negative-type cone:
// center the Gram form at the basepoint, clip negative eigenvalues,
// read the squared distances back.
Vector negative_type_project(const Vector& l, const PairSpace& ps);

// Euclidean realization of a negative-type squared-distance vector as
// an n x (n-1) configuration with point 0 at the origin. Eigenvalues
// below -tol reject the input; values in [-tol, 0) are clipped.
Matrix realize_map(const Vector& l, const PairSpace& ps, double tol = kTol.spectral);

// Box constraints on squared distances induced by the metric and the
// threshold parameters: pairs at metric distance <= s1 must stay within
// tau1^2 (far pairs within tau3^2), pairs at distance >= s2 must reach
// at least tau2^2.
void threshold_box(const FiniteMetric& X, const ThresholdParams& P, const PairSpace& ps,
                   Vector& lower, Vector& upper);

struct PoincareWitness {
  Vector mu1;    // probability weights over pairs with d <= s1
  Vector mu2;    // probability weights over pairs with d >= s2
  double ratio = 0.0;  // (tau1 / tau2)^2
  double delta = 0.0;  // additive slack
};

enum class SolveStatus { Feasible, Infeasible, Indeterminate };

struct ThresholdMapResult {
  SolveStatus status = SolveStatus::Indeterminate;

  // Feasible outcome.
  std::optional<Matrix> points;
  std::optional<Vector> feasible_l;

  // Infeasible outcome.
  std::optional<Vector> hyperplane;  // sign-fixed separating functional over pairs
  std::optional<PoincareWitness> witness;

  // Diagnostics.
  int iterations = 0;
  double gap_norm = 0.0;        // distance between the box and cone iterates
  double box_violation = 0.0;   // worst box violation of the cone iterate
  double cone_margin = 0.0;     // largest eigenvalue of the hyperplane's Laplacian form
  double box_margin = 0.0;      // hyperplane value at the canonical box point
};

// Alternating-projection feasibility test for a threshold map from the
// metric into a unit ball. Feasible returns a realized configuration;
// Infeasible returns a separating hyperplane and the distribution
// witness extracted from it; neither certificate reachable within the
// iteration budget returns Indeterminate.
ThresholdMapResult threshold_feasibility(const FiniteMetric& X, const ThresholdParams& P,
                                         double tol = kTol.solver, int max_iterations = 20000);

// Flip the hyperplane into canonical sign form: entries on pairs with
// metric distance <= s1 non-positive, snapping magnitudes below the
// snap tolerance to zero.
Vector sign_fix_hyperplane(const Vector& a, const FiniteMetric& X, const ThresholdParams& P,
                           const PairSpace& ps);

// Distribution witness of the separation: weights mu1 on close pairs
// and mu2 on far pairs such that any map into the unit ball stretches
// some far pair below tau2 whenever all close pairs stay within tau1.
PoincareWitness extract_witness(const Vector& a, const FiniteMetric& X, const ThresholdParams& P);

// Witness inequality gap for a concrete map f (rows = points) into the
// unit ball: mean squared close stretch - ratio * mean squared far
// stretch + delta. Positive gap = the map violates the witness bound.
double verify_witness(const PoincareWitness& w, const FiniteMetric& X, const Matrix& f);

struct AdversarialResult {
  Matrix points;
  double gap = 0.0;
};

// Projected-gradient search for a unit-ball map minimizing the witness
// gap. Used to probe witnesses numerically.
AdversarialResult adversarial_map(const PoincareWitness& w, const FiniteMetric& X, int iterations,
                                  std::uint64_t seed = kDefaultSeed);

enum class WitnessSearchStatus { WitnessFound, FeasibleNoWitness, Indeterminate };

struct WitnessSearchResult {
  WitnessSearchStatus status = WitnessSearchStatus::Indeterminate;
  std::optional<PoincareWitness> witness;
  ThresholdMapResult details;
};

// Witness search at a requested slack delta: runs the feasibility
// solver with tau3 sized so that an infeasibility witness certifies the
// requested delta.
WitnessSearchResult distribution_witness(const FiniteMetric& X, double s1, double s2, double tau1,
                                         double tau2, double delta);

// Lower bound on the compression cost of a one-way protocol whose
// per-coordinate advantage is alpha against beta with failure mass
// delta0: k * (alpha * (1 - 2 sqrt(delta0)) - beta).
double ajp_bound(int k, double alpha, double beta, double delta0);

}  // namespace normlab
