#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "normlab/constants.hpp"
#include "normlab/errors.hpp"
#include "normlab/poincare.hpp"
#include "oracles.hpp"

using namespace normlab;

namespace {

FiniteMetric path3() {
  Matrix d(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  return FiniteMetric(3, d);
}

FiniteMetric two_points(double dist) {
  Matrix d(2, 2);
  d << 0, dist, dist, 0;
  return FiniteMetric(2, d);
}

ThresholdParams params(double s1, double s2, double t1, double t2, double t3) {
  ThresholdParams p;
  p.s1 = s1;
  p.s2 = s2;
  p.tau1 = t1;
  p.tau2 = t2;
  p.tau3 = t3;
  return p;
}

// Random configuration in the unit ball, rows are points.
Matrix random_ball_map(int n, int dim, std::uint64_t seed) {
  SplitRng rng(seed);
  Matrix f(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) f(i, j) = rng.next_gaussian();
    const double norm = f.row(i).norm();
    const double radius = std::pow(rng.next_unit(), 1.0 / dim);
    if (norm > 0.0) f.row(i) *= radius / norm;
  }
  return f;
}

// A metric that certainly admits a threshold map: distances of real
// points, with image scales matching the metric scales.
struct FeasibleInstance {
  Matrix d;
  ThresholdParams p;
};

FeasibleInstance random_feasible(int n, std::uint64_t seed) {
  const Matrix pts = oracles::random_matrix(n, 3, seed);
  Matrix d = Matrix::Zero(n, n);
  std::vector<double> dists;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (pts.row(i) - pts.row(j)).norm();
      dists.push_back(d(i, j));
    }
  std::sort(dists.begin(), dists.end());
  const double s1 = dists[dists.size() / 3];
  const double s2 = dists[2 * dists.size() / 3];
  FeasibleInstance inst{d, params(s1, s2, s1, s2, dists.back() + 1.0)};
  return inst;
}

}  // namespace

TEST_SUITE("poincare") {

TEST_CASE("pair space indexing round-trips") {
  const PairSpace ps(5);
  CHECK(ps.count() == 10);
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    CHECK(ps.index(i, j) == idx);
    CHECK(i < j);
  }
  CHECK_THROWS_AS(ps.index(2, 2), input_error);
  CHECK_THROWS_AS(ps.index(1, 5), input_error);
  CHECK_THROWS_AS(ps.pair(10), input_error);
}

TEST_CASE("threshold params validate ordering") {
  CHECK_NOTHROW(params(1, 2, 1, 3, 10).validate());
  CHECK_THROWS_AS(params(2, 1, 1, 3, 10).validate(), input_error);
  CHECK_THROWS_AS(params(1, 2, 3, 3, 10).validate(), input_error);
  CHECK_THROWS_AS(params(1, 2, 1, 3, 3).validate(), input_error);
  ThresholdParams p = params(1, 2, 1, 3, 10);
  p.tau3 = std::numeric_limits<double>::infinity();
  CHECK(!p.solvable());
}

TEST_CASE("realize_map recovers pinned geometries") {
  const PairSpace two(2);
  Vector l(1);
  l << 4.0;
  const Matrix pts = realize_map(l, two);
  CHECK((pts.row(0) - pts.row(1)).norm() == doctest::Approx(2.0).epsilon(1e-12));

  const Matrix coincident = realize_map(Vector::Zero(1), two);
  CHECK((coincident.row(0) - coincident.row(1)).norm() == doctest::Approx(0.0).epsilon(1e-12));

  // The path squared distances (1, 1, 4) embed on a line.
  const PairSpace three(3);
  Vector lp(3);
  lp << 1.0, 4.0, 1.0;  // pairs (0,1), (0,2), (1,2)
  const Matrix line = realize_map(lp, three);
  CHECK((line.row(0) - line.row(1)).squaredNorm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((line.row(0) - line.row(2)).squaredNorm() == doctest::Approx(4.0).epsilon(1e-9));
  CHECK((line.row(1) - line.row(2)).squaredNorm() == doctest::Approx(1.0).epsilon(1e-9));

  // sqrt(l) violating the triangle inequality cannot be realized.
  Vector bad(3);
  bad << 4.0, 25.0, 4.0;
  CHECK_THROWS_AS(realize_map(bad, three), input_error);
}

TEST_CASE("negative-type projection fixes realizable inputs") {
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 3 + trial % 4;
    const PairSpace ps(n);
    const Matrix pts = oracles::random_matrix(n, n - 1, derive_seed(88, static_cast<std::uint64_t>(trial)));
    const Vector l = squared_distances(pts, ps);
    const Vector fixed = negative_type_project(l, ps);
    CHECK((fixed - l).cwiseAbs().maxCoeff() <= kTol.spectral * std::max(1.0, l.cwiseAbs().maxCoeff()));

    // Arbitrary vectors land on realizable ones.
    const Vector noisy = l + oracles::random_vector(ps.count(), derive_seed(89, static_cast<std::uint64_t>(trial))).cwiseAbs();
    const Vector proj = negative_type_project(noisy, ps);
    const Matrix realized = realize_map(proj, ps);
    const Vector back = squared_distances(realized, ps);
    CHECK((back - proj).cwiseAbs().maxCoeff() <= 1e-7 * std::max(1.0, proj.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("two-point instance is feasible with a realized map") {
  const auto res = threshold_feasibility(two_points(2.0), params(1, 2, 1, 1.5, 2));
  REQUIRE(res.status == SolveStatus::Feasible);
  REQUIRE(res.points.has_value());
  REQUIRE(res.feasible_l.has_value());
  const double dist = (res.points->row(0) - res.points->row(1)).norm();
  // The only pair is far (d = 2 >= s2): it must reach tau2 without
  // crossing tau3.
  CHECK(dist >= 1.5 - 1e-6);
  CHECK(dist <= 2.0 + 1e-6);
}

TEST_CASE("path metric with tau2 = 3 tau1 is infeasible with a valid witness") {
  const auto res = threshold_feasibility(path3(), params(1, 2, 1, 3, 10));
  REQUIRE(res.status == SolveStatus::Infeasible);
  REQUIRE(res.hyperplane.has_value());
  REQUIRE(res.witness.has_value());
  const PoincareWitness& w = *res.witness;

  // Supports sit on the right pair classes and normalize to one.
  const PairSpace ps(3);
  const FiniteMetric X = path3();
  double sum1 = 0.0, sum2 = 0.0;
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    if (w.mu1[idx] > 0.0) CHECK(X(i, j) <= 1.0);
    if (w.mu2[idx] > 0.0) CHECK(X(i, j) >= 2.0);
    CHECK(w.mu1[idx] >= 0.0);
    CHECK(w.mu2[idx] >= 0.0);
    sum1 += w.mu1[idx];
    sum2 += w.mu2[idx];
  }
  CHECK(std::abs(sum1 - 1.0) <= 1e-12);
  CHECK(std::abs(sum2 - 1.0) <= 1e-12);
  CHECK(w.ratio == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(w.delta == doctest::Approx(0.04).epsilon(1e-12));

  // Certificate margins reported by the solver.
  CHECK(res.box_margin > 0.0);
  CHECK(res.cone_margin <= kTol.solver);

  // The canonical cone point evaluates positive against the hyperplane.
  const Vector& a = *res.hyperplane;
  double canonical = 0.0;
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    if (X(i, j) <= 1.0 && a[idx] < 0.0)
      canonical += a[idx] * 1.0;  // tau1^2
    else if (X(i, j) >= 2.0 && a[idx] > 0.0)
      canonical += a[idx] * 9.0;  // tau2^2
    else if (a[idx] < 0.0)
      canonical += a[idx] * 100.0;  // tau3^2
  }
  CHECK(canonical > 0.0);
  CHECK(canonical == doctest::Approx(res.box_margin).epsilon(1e-9));

  // Hyperplane certificate over random negative-type directions.
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix pts = oracles::random_matrix(3, 2, derive_seed(3035, static_cast<std::uint64_t>(trial)));
    Vector l = squared_distances(pts, ps);
    l /= std::max(1.0, l.norm());
    CHECK(a.dot(l) <= 10.0 * kTol.solver);
  }

  // Dual soundness: random unit-ball maps and the adversarial search
  // never drive the witness gap negative.
  for (int trial = 0; trial < 2000; ++trial) {
    const Matrix f = random_ball_map(3, 3, derive_seed(909, static_cast<std::uint64_t>(trial)));
    CHECK(verify_witness(w, X, f) >= -10.0 * kTol.solver);
  }
  const auto adv = adversarial_map(w, X, 500);
  CHECK(adv.gap >= -10.0 * kTol.solver);

  // The pinned line map stretches close pairs by 1/2 and the far pair
  // by 1: gap = 1/4 - ratio + delta.
  Matrix f = Matrix::Zero(3, 2);
  f(0, 0) = -0.5;
  f(2, 0) = 0.5;
  CHECK(verify_witness(w, X, f) ==
        doctest::Approx(0.25 - 1.0 / 9.0 + w.delta).epsilon(1e-12));
}

TEST_CASE("witness extraction from a pinned hyperplane") {
  const FiniteMetric X = path3();
  const ThresholdParams P = params(1, 2, 1, 3, 10);
  Vector a(3);
  a << -1.0, 1.0, -1.0;  // pairs (0,1), (0,2), (1,2)
  const PoincareWitness w = extract_witness(a, X, P);
  CHECK(w.mu1[0] == 0.5);
  CHECK(w.mu1[2] == 0.5);
  CHECK(w.mu1[1] == 0.0);
  CHECK(w.mu2[1] == 1.0);
  CHECK(w.ratio == doctest::Approx(1.0 / 9.0).epsilon(1e-15));

  // Scaling the hyperplane does not move the witness.
  const PoincareWitness ws = extract_witness((3.7 * a).eval(), X, P);
  CHECK((ws.mu1 - w.mu1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((ws.mu2 - w.mu2).cwiseAbs().maxCoeff() <= 1e-12);

  // No positive mass on far pairs: nothing separates.
  Vector dead(3);
  dead << -1.0, -0.5, -1.0;
  CHECK_THROWS_AS(extract_witness(dead, X, P), invalid_hyperplane_error);
}

TEST_CASE("verify_witness on pinned maps") {
  const FiniteMetric X = path3();
  PoincareWitness w;
  w.mu1 = Vector::Zero(3);
  w.mu2 = Vector::Zero(3);
  w.mu1[0] = w.mu1[2] = 0.5;
  w.mu2[1] = 1.0;
  w.ratio = 1.0 / 9.0;
  w.delta = 0.04;

  CHECK(verify_witness(w, X, Matrix::Zero(3, 2)) == 0.04);  // constant map

  Matrix f = Matrix::Zero(3, 2);
  f(0, 0) = -0.5;
  f(2, 0) = 0.5;
  CHECK(verify_witness(w, X, f) == doctest::Approx(0.25 - 1.0 / 9.0 + 0.04).epsilon(1e-15));

  Matrix out = Matrix::Zero(3, 2);
  out(0, 0) = 1.5;
  CHECK_THROWS_AS(verify_witness(w, X, out), input_error);

  PoincareWitness r0 = w;
  r0.ratio = 0.0;
  CHECK(verify_witness(r0, X, f) == doctest::Approx(0.25 + 0.04).epsilon(1e-15));
}

TEST_CASE("adversarial search lands on the constant map when optimal") {
  const FiniteMetric X = path3();
  PoincareWitness w;
  w.mu1 = Vector::Zero(3);
  w.mu2 = Vector::Zero(3);
  w.mu1[0] = 1.0;
  w.mu2[1] = 1.0;
  w.ratio = 0.0;
  w.delta = 0.3;
  const auto res = adversarial_map(w, X, 200);
  CHECK(res.gap == 0.3);  // ratio 0: any stretch only helps

  PoincareWitness same;
  same.mu1 = same.mu2 = w.mu2;
  same.ratio = 0.25;
  same.delta = 1.0;
  CHECK(adversarial_map(same, X, 200).gap == 1.0);
}

TEST_CASE("primal soundness on random feasible instances") {
  for (int trial = 0; trial < 8; ++trial) {
    const auto inst = random_feasible(5, derive_seed(606, static_cast<std::uint64_t>(trial)));
    const FiniteMetric X(5, inst.d);
    const auto res = threshold_feasibility(X, inst.p);
    REQUIRE(res.status == SolveStatus::Feasible);
    const Matrix& f = *res.points;
    const double slack = 10.0 * kTol.solver;
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) {
        const double dist2 = (f.row(i) - f.row(j)).squaredNorm();
        if (inst.d(i, j) <= inst.p.s1) CHECK(dist2 <= inst.p.tau1 * inst.p.tau1 + slack);
        if (inst.d(i, j) >= inst.p.s2) CHECK(dist2 >= inst.p.tau2 * inst.p.tau2 - slack);
        CHECK(dist2 <= inst.p.tau3 * inst.p.tau3 + slack);
      }
  }
}

TEST_CASE("feasibility is monotone in the relaxation direction") {
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = random_feasible(4, derive_seed(707, static_cast<std::uint64_t>(trial)));
    const FiniteMetric X(4, inst.d);
    REQUIRE(threshold_feasibility(X, inst.p).status == SolveStatus::Feasible);

    ThresholdParams bigger = inst.p;
    bigger.tau3 *= 2.0;
    CHECK(threshold_feasibility(X, bigger).status == SolveStatus::Feasible);

    ThresholdParams weaker = inst.p;
    weaker.tau2 = 0.5 * (inst.p.tau1 + inst.p.tau2);
    CHECK(threshold_feasibility(X, weaker).status == SolveStatus::Feasible);
  }

  // Infeasibility survives enlarging tau3: the path obstruction is the
  // triangle inequality, not the global bound.
  CHECK(threshold_feasibility(path3(), params(1, 2, 1, 3, 20)).status == SolveStatus::Infeasible);
}

TEST_CASE("witness search resolves both branches") {
  const auto found = distribution_witness(path3(), 1, 2, 1, 3, 0.01);
  REQUIRE(found.status == WitnessSearchStatus::WitnessFound);
  REQUIRE(found.witness.has_value());
  CHECK(found.witness->delta == 0.01);
  CHECK(found.details.status == SolveStatus::Infeasible);
  CHECK(found.details.box_margin > 0.0);

  const auto none = distribution_witness(two_points(2.0), 1, 2, 1, 1.5, 0.01);
  CHECK(none.status == WitnessSearchStatus::FeasibleNoWitness);
  CHECK(!none.witness.has_value());

  CHECK_THROWS_AS(distribution_witness(path3(), 1, 2, 1, 3, 0.0), input_error);
}

TEST_CASE("compression bound evaluates the pinned constants") {
  CHECK(ajp_bound(100, 0.01, 0.001, 0.01) == 0.7);
  CHECK(ajp_bound(0, 0.01, 0.001, 0.01) == 0.0);
  CHECK(ajp_bound(3, 0.001, 0.01, 0.01) <= 0.0);  // vacuous regime
  CHECK_THROWS_AS(ajp_bound(5, 0.01, 0.001, 0.3), input_error);
  CHECK_THROWS_AS(ajp_bound(-1, 0.01, 0.001, 0.01), input_error);
}

TEST_CASE("indeterminate is reported when the budget is too small") {
  const auto res = threshold_feasibility(path3(), params(1, 2, 1, 3, 10), kTol.solver, 2);
  CHECK(res.status == SolveStatus::Indeterminate);
  CHECK(!res.points.has_value());
  CHECK(!res.witness.has_value());
}

}  // TEST_SUITE
