#include "normlab/poincare.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "normlab/errors.hpp"
#include "normlab/rng.hpp"

namespace normlab {

PairSpace::PairSpace(int n) : n_(n) {
  if (n < 1) throw input_error("pair space needs at least one point");
}

int PairSpace::index(int i, int j) const {
  if (i < 0 || j <= i || j >= n_) {
    std::ostringstream os;
    os << "pair (" << i << ", " << j << ") is not an ordered pair over " << n_ << " points";
    throw input_error(os.str());
  }
  return i * n_ - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<int, int> PairSpace::pair(int idx) const {
  if (idx < 0 || idx >= count()) throw input_error("pair index out of range");
  int i = 0;
  int row = n_ - 1;
  while (idx >= row) {
    idx -= row;
    --row;
    ++i;
  }
  return {i, i + 1 + idx};
}

void ThresholdParams::validate() const {
  if (!std::isfinite(s1) || !std::isfinite(s2) || s1 <= 0.0 || s2 <= s1)
    throw input_error("metric thresholds must satisfy 0 < s1 < s2");
  if (!std::isfinite(tau1) || !std::isfinite(tau2) || tau1 <= 0.0 || tau2 <= tau1)
    throw input_error("target distances must satisfy 0 < tau1 < tau2");
  if (!(tau3 > tau2)) throw input_error("target distances must satisfy tau2 < tau3");
}

bool ThresholdParams::solvable() const { return std::isfinite(tau3); }

Vector squared_distances(const Matrix& points, const PairSpace& ps) {
  if (points.rows() != ps.points()) throw input_error("configuration size does not match pair space");
  Vector l(ps.count());
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    l[idx] = (points.row(i) - points.row(j)).squaredNorm();
  }
  return l;
}

namespace {

// Centered Gram form of a squared-distance vector, basepoint 0.
Matrix gram_from_l(const Vector& l, const PairSpace& ps) {
  const int n = ps.points();
  Matrix g(n - 1, n - 1);
  for (int a = 1; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      const double lab = (a == b) ? 0.0 : l[ps.index(a, b)];
      const double v = 0.5 * (l[ps.index(0, a)] + l[ps.index(0, b)] - lab);
      g(a - 1, b - 1) = v;
      g(b - 1, a - 1) = v;
    }
  }
  return g;
}

Vector l_from_gram(const Matrix& g, const PairSpace& ps) {
  Vector l(ps.count());
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    if (i == 0)
      l[idx] = g(j - 1, j - 1);
    else
      l[idx] = g(i - 1, i - 1) + g(j - 1, j - 1) - 2.0 * g(i - 1, j - 1);
  }
  return l;
}

// Weighted Laplacian form of a pair functional: a is non-positive on
// the negative-type cone iff this matrix is negative semidefinite.
Matrix laplacian_form(const Vector& a, const PairSpace& ps) {
  const int n = ps.points();
  Matrix m = Matrix::Zero(n, n);
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    m(i, i) += a[idx];
    m(j, j) += a[idx];
    m(i, j) -= a[idx];
    m(j, i) -= a[idx];
  }
  return m;
}

// Clip the Laplacian form to its negative-semidefinite part and read
// the pair weights back. The all-ones kernel vector survives clipping,
// so the result is again a weighted Laplacian.
Vector polish_hyperplane(const Vector& a, const PairSpace& ps) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian_form(a, ps));
  Vector lam = es.eigenvalues();
  for (Eigen::Index k = 0; k < lam.size(); ++k) lam[k] = std::min(lam[k], 0.0);
  Matrix clipped = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  Vector out(ps.count());
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    out[idx] = -clipped(i, j);
  }
  return out;
}

struct WitnessParts {
  Vector mu1t, mu2t, mu3t;  // unnormalized, over all pairs
  double lam1 = 0.0, lam2 = 0.0, lam3 = 0.0;
};

WitnessParts witness_parts(const Vector& a, const FiniteMetric& X, const ThresholdParams& P,
                           const PairSpace& ps) {
  WitnessParts w;
  w.mu1t = Vector::Zero(ps.count());
  w.mu2t = Vector::Zero(ps.count());
  w.mu3t = Vector::Zero(ps.count());
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    const double d = X(i, j);
    if (d <= P.s1) {
      w.mu1t[idx] = -a[idx];
    } else if (d >= P.s2 && a[idx] > 0.0) {
      w.mu2t[idx] = a[idx];
    } else if (a[idx] < 0.0) {
      w.mu3t[idx] = -a[idx];
    }
  }
  w.lam1 = w.mu1t.sum();
  w.lam2 = w.mu2t.sum();
  w.lam3 = w.mu3t.sum();
  return w;
}

// Hyperplane value at the box point minimizing it: close pairs sit at
// tau1^2, separated pairs with positive weight at tau2^2, remaining
// negative weight at tau3^2.
double canonical_box_margin(const Vector& a, const FiniteMetric& X, const ThresholdParams& P,
                            const PairSpace& ps) {
  const WitnessParts w = witness_parts(a, X, P, ps);
  return -w.lam1 * P.tau1 * P.tau1 + w.lam2 * P.tau2 * P.tau2 - w.lam3 * P.tau3 * P.tau3;
}

}  // namespace

Vector negative_type_project(const Vector& l, const PairSpace& ps) {
  if (l.size() != ps.count()) throw input_error("squared-distance vector does not match pair space");
  if (ps.points() == 1) return l;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram_from_l(l, ps));
  Vector lam = es.eigenvalues();
  for (Eigen::Index k = 0; k < lam.size(); ++k) lam[k] = std::max(lam[k], 0.0);
  return l_from_gram(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose(), ps);
}

Matrix realize_map(const Vector& l, const PairSpace& ps, double tol) {
  if (l.size() != ps.count()) throw input_error("squared-distance vector does not match pair space");
  require_finite(l, "squared-distance vector");
  const int n = ps.points();
  if (n == 1) return Matrix::Zero(1, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram_from_l(l, ps));
  Vector lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam[k] < -tol * scale) {
      std::ostringstream os;
      os << "squared distances are not of negative type: Gram eigenvalue " << lam[k];
      throw input_error(os.str());
    }
    lam[k] = std::max(lam[k], 0.0);
  }
  Matrix b = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  Matrix points = Matrix::Zero(n, n - 1);
  points.bottomRows(n - 1) = b;
  return points;
}

void threshold_box(const FiniteMetric& X, const ThresholdParams& P, const PairSpace& ps,
                   Vector& lower, Vector& upper) {
  P.validate();
  if (ps.points() != X.size()) throw input_error("metric size does not match pair space");
  lower.resize(ps.count());
  upper.resize(ps.count());
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    const double d = X(i, j);
    upper[idx] = (d <= P.s1) ? P.tau1 * P.tau1 : P.tau3 * P.tau3;
    lower[idx] = (d >= P.s2) ? P.tau2 * P.tau2 : 0.0;
  }
}

Vector sign_fix_hyperplane(const Vector& a, const FiniteMetric& X, const ThresholdParams& P,
                           const PairSpace& ps) {
  if (a.size() != ps.count()) throw input_error("hyperplane does not match pair space");
  Vector out = a;
  for (int idx = 0; idx < ps.count(); ++idx) {
    if (std::abs(out[idx]) < kTol.snap) out[idx] = 0.0;
    auto [i, j] = ps.pair(idx);
    // Positive weight on a close pair only weakens the certificate:
    // dropping it keeps the Laplacian form negative semidefinite and
    // can only raise the box margin.
    if (X(i, j) <= P.s1 && out[idx] > 0.0) out[idx] = 0.0;
  }
  return out;
}

PoincareWitness extract_witness(const Vector& a, const FiniteMetric& X, const ThresholdParams& P) {
  P.validate();
  if (!P.solvable()) throw input_error("witness extraction needs a finite tau3");
  const PairSpace ps(X.size());
  const Vector fixed = sign_fix_hyperplane(a, X, P, ps);
  const WitnessParts w = witness_parts(fixed, X, P, ps);

  if (w.lam2 <= 0.0)
    throw invalid_hyperplane_error("hyperplane carries no positive weight on separated pairs");
  const double t1sq = P.tau1 * P.tau1, t2sq = P.tau2 * P.tau2, t3sq = P.tau3 * P.tau3;
  if (!(w.lam1 < w.lam2 * t2sq / t1sq))
    throw invalid_hyperplane_error("close-pair weight too heavy for a distribution witness");
  if (!(w.lam3 < w.lam2 * t2sq / t3sq))
    throw invalid_hyperplane_error("residual weight too heavy for a distribution witness");

  PoincareWitness out;
  if (w.lam1 > 0.0) {
    out.mu1 = w.mu1t / w.lam1;
  } else {
    // No close-pair mass: the bound holds with any averaging
    // distribution, so spread it uniformly over the close pairs when
    // they exist, otherwise over all pairs.
    Vector close = Vector::Zero(ps.count());
    int nclose = 0;
    for (int idx = 0; idx < ps.count(); ++idx) {
      auto [i, j] = ps.pair(idx);
      if (X(i, j) <= P.s1) {
        close[idx] = 1.0;
        ++nclose;
      }
    }
    out.mu1 = nclose > 0 ? Vector(close / nclose)
                         : Vector(Vector::Constant(ps.count(), 1.0 / ps.count()));
  }
  out.mu2 = w.mu2t / w.lam2;
  out.ratio = t1sq / t2sq;
  out.delta = 4.0 * t1sq / t3sq;
  return out;
}

double verify_witness(const PoincareWitness& w, const FiniteMetric& X, const Matrix& f) {
  const PairSpace ps(X.size());
  if (w.mu1.size() != ps.count() || w.mu2.size() != ps.count())
    throw input_error("witness weights do not match the metric's pair space");
  if (f.rows() != X.size()) throw input_error("map has the wrong number of rows");
  require_finite(f, "map");
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    if (f.row(i).norm() > 1.0 + kTol.unit_ball) {
      std::ostringstream os;
      os << "map sends point " << i << " outside the unit ball (norm " << f.row(i).norm() << ")";
      throw input_error(os.str());
    }
  }
  for (const Vector* mu : {&w.mu1, &w.mu2}) {
    if (mu->minCoeff() < -kTol.snap || std::abs(mu->sum() - 1.0) > 1e-6)
      throw input_error("witness weights must form probability distributions");
  }
  double e1 = 0.0, e2 = 0.0;
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    const double stretch = (f.row(i) - f.row(j)).squaredNorm();
    e1 += w.mu1[idx] * stretch;
    e2 += w.mu2[idx] * stretch;
  }
  return e1 - w.ratio * e2 + w.delta;
}

ThresholdMapResult threshold_feasibility(const FiniteMetric& X, const ThresholdParams& P,
                                         double tol, int max_iterations) {
  P.validate();
  if (!P.solvable()) throw input_error("feasibility solver needs a finite tau3");
  if (!(tol > 0.0)) throw input_error("solver tolerance must be positive");
  if (max_iterations < 1) throw input_error("solver needs at least one iteration");

  const PairSpace ps(X.size());
  Vector lower, upper;
  threshold_box(X, P, ps, lower, upper);

  ThresholdMapResult res;
  if (ps.count() == 0) {  // single point: the empty map is feasible
    res.status = SolveStatus::Feasible;
    res.points = Matrix::Zero(1, 0);
    res.feasible_l = Vector(0);
    return res;
  }

  auto box_clamp = [&](const Vector& v) { return v.cwiseMax(lower).cwiseMin(upper); };
  auto box_violation = [&](const Vector& v) {
    return std::max(0.0, std::max((lower - v).maxCoeff(), (v - upper).maxCoeff()));
  };

  // Alternating projections in centered-Gram space between the PSD cone
  // (eigen-clipping) and the slabs lower <= <C_idx, G> <= upper, one per
  // pair, run in their averaged two-set product form. When the sets
  // intersect, the iterate converges into the intersection. When they do
  // not, it converges to a stationary point where the displacements off
  // the individual sets sum to zero: the slab multipliers beta then
  // satisfy sum(beta_idx C_idx) = -(NSD defect), so a = -beta has
  // <a, l> <= 0 on the whole negative-type cone by construction and a
  // strictly positive minimum over the box - the separating hyperplane.
  const int k = ps.points() - 1;
  const int m = ps.count();
  std::vector<Matrix> C(static_cast<std::size_t>(m));
  Vector c_norm2(m);
  for (int idx = 0; idx < m; ++idx) {
    auto [i, j] = ps.pair(idx);
    Matrix ci = Matrix::Zero(k, k);
    if (i == 0) {
      ci(j - 1, j - 1) = 1.0;
    } else {
      ci(i - 1, i - 1) = 1.0;
      ci(j - 1, j - 1) = 1.0;
      ci(i - 1, j - 1) = -1.0;
      ci(j - 1, i - 1) = -1.0;
    }
    c_norm2[idx] = ci.squaredNorm();
    C[static_cast<std::size_t>(idx)] = std::move(ci);
  }

  Vector start(m);
  for (int idx = 0; idx < m; ++idx) {
    auto [i, j] = ps.pair(idx);
    start[idx] = X(i, j) * X(i, j);
  }
  Matrix g = gram_from_l(box_clamp(start), ps);

  std::deque<Vector> a_history;
  const int window = kTol.stabilization_window;

  auto try_certificate = [&](const Vector& a) -> bool {
    const double anorm = a.norm();
    if (anorm <= kTol.snap) return false;
    Vector polished = polish_hyperplane(a / anorm, ps);
    const double pnorm = polished.norm();
    if (pnorm < kTol.snap) return false;
    polished /= pnorm;
    const Vector fixed = sign_fix_hyperplane(polished, X, P, ps);
    if (fixed.norm() < kTol.snap) return false;
    const double margin = canonical_box_margin(fixed, X, P, ps);
    if (margin <= 0.0) return false;
    PoincareWitness w;
    try {
      w = extract_witness(fixed, X, P);
    } catch (const invalid_hyperplane_error&) {
      return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian_form(fixed, ps));
    res.status = SolveStatus::Infeasible;
    res.hyperplane = fixed;
    res.witness = w;
    res.box_margin = margin;
    res.cone_margin = es.eigenvalues().maxCoeff();
    return true;
  };

  for (int iter = 1; iter <= max_iterations; ++iter) {
    // PSD projection and its defect.
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    Vector lam = es.eigenvalues();
    for (Eigen::Index e = 0; e < lam.size(); ++e) lam[e] = std::max(lam[e], 0.0);
    const Matrix g_psd = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    const Matrix defect = g - g_psd;  // NSD part of g

    // Slab projections, recorded through their multipliers.
    Vector beta = Vector::Zero(m);
    for (int idx = 0; idx < m; ++idx) {
      const double t = C[static_cast<std::size_t>(idx)].cwiseProduct(g).sum();
      if (t > upper[idx])
        beta[idx] = (t - upper[idx]) / c_norm2[idx];
      else if (t < lower[idx])
        beta[idx] = (t - lower[idx]) / c_norm2[idx];
    }

    // Average of all projections.
    Matrix g_next = g_psd;
    for (int idx = 0; idx < m; ++idx)
      g_next -= beta[idx] * C[static_cast<std::size_t>(idx)];
    g_next = (g_next + static_cast<double>(m) * g) / static_cast<double>(m + 1);
    // (g_next = g - (defect + sum beta C) / (m + 1))

    const Vector l_cone = l_from_gram(g_psd, ps);
    res.iterations = iter;
    res.box_violation = box_violation(l_cone);
    double gap2 = defect.squaredNorm();
    for (int idx = 0; idx < m; ++idx) gap2 += beta[idx] * beta[idx] * c_norm2[idx];
    res.gap_norm = std::sqrt(gap2);

    if (res.box_violation <= tol) {
      res.status = SolveStatus::Feasible;
      res.feasible_l = l_cone;
      res.points = realize_map(l_cone, ps);
      return res;
    }

    const Vector a = -beta;
    if (static_cast<int>(a_history.size()) == window) {
      const Vector& old = a_history.front();
      const double drift = (a - old).norm();
      if (drift <= kTol.stabilization * std::max(1.0, a.norm()) && res.gap_norm > tol) {
        if (try_certificate(a)) return res;
        // Not certifiable yet: demand a fresh stabilization window
        // before the next attempt instead of giving up early.
        a_history.clear();
      } else {
        a_history.pop_front();
      }
    }
    a_history.push_back(a);
    g = g_next;
  }

  // Budget exhausted: last chance to certify infeasibility.
  if (!a_history.empty() && try_certificate(a_history.back())) return res;
  res.status = SolveStatus::Indeterminate;
  return res;
}

AdversarialResult adversarial_map(const PoincareWitness& w, const FiniteMetric& X, int iterations,
                                  std::uint64_t seed) {
  const PairSpace ps(X.size());
  if (w.mu1.size() != ps.count() || w.mu2.size() != ps.count())
    throw input_error("witness weights do not match the metric's pair space");
  if (iterations < 1) throw input_error("adversarial search needs at least one iteration");
  const int n = X.size();

  // The witness gap is linear in the Gram matrix of the map.
  const Vector c = w.mu1 - w.ratio * w.mu2;
  Matrix grad = Matrix::Zero(n, n);
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    grad(i, i) += c[idx];
    grad(j, j) += c[idx];
    grad(i, j) -= c[idx];
    grad(j, i) -= c[idx];
  }
  const double gnorm = grad.norm();

  auto project = [&](Matrix g) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    Vector lam = es.eigenvalues().cwiseMax(0.0);
    g = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Vector scale(n);
    for (int i = 0; i < n; ++i) scale[i] = g(i, i) > 1.0 ? 1.0 / std::sqrt(g(i, i)) : 1.0;
    return Matrix(scale.asDiagonal() * g * scale.asDiagonal());
  };
  auto gap_of = [&](const Matrix& g) {
    double gap = w.delta;
    for (int idx = 0; idx < ps.count(); ++idx) {
      auto [i, j] = ps.pair(idx);
      gap += c[idx] * (g(i, i) + g(j, j) - 2.0 * g(i, j));
    }
    return gap;
  };

  // The all-zero map is always admissible and handles degenerate
  // witnesses (e.g. ratio 0) exactly: its gap is just delta.
  Matrix best_g = Matrix::Zero(n, n);
  double best_gap = gap_of(best_g);
  if (const Matrix id = Matrix::Identity(n, n); gap_of(id) < best_gap) {
    best_g = id;
    best_gap = gap_of(id);
  }

  for (int restart = 0; restart < 2; ++restart) {
    Matrix g;
    if (restart == 0) {
      g = Matrix::Identity(n, n);
    } else {
      SplitRng rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
      Matrix f(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) f(i, j) = rng.next_gaussian();
        const double norm = f.row(i).norm();
        if (norm > 0.0) f.row(i) /= norm;
      }
      g = f * f.transpose();
    }
    const double eta = gnorm > 0.0 ? 1.0 / gnorm : 0.0;
    for (int it = 0; it < iterations; ++it) {
      g = project(g - eta * grad);
      const double gap = gap_of(g);
      if (gap < best_gap) {
        best_gap = gap;
        best_g = g;
      }
      if (eta == 0.0) break;
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(best_g);
  Matrix f = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  for (int i = 0; i < n; ++i) {
    const double norm = f.row(i).norm();
    if (norm > 1.0) f.row(i) /= norm;
  }
  return AdversarialResult{f, verify_witness(w, X, f)};
}

WitnessSearchResult distribution_witness(const FiniteMetric& X, double s1, double s2, double tau1,
                                         double tau2, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw input_error("witness slack must be positive");
  ThresholdParams P;
  P.s1 = s1;
  P.s2 = s2;
  P.tau1 = tau1;
  P.tau2 = tau2;
  // tau3 large enough that an infeasibility witness certifies the
  // requested slack: (2 tau1 / tau3)^2 < delta.
  P.tau3 = std::max(2.0 * tau2, 2.0 * tau1 / std::sqrt(delta) * (1.0 + 1e-6));
  P.validate();

  WitnessSearchResult out;
  out.details = threshold_feasibility(X, P);
  switch (out.details.status) {
    case SolveStatus::Feasible:
      out.status = WitnessSearchStatus::FeasibleNoWitness;
      break;
    case SolveStatus::Infeasible: {
      out.status = WitnessSearchStatus::WitnessFound;
      PoincareWitness w = *out.details.witness;
      w.delta = delta;  // requested slack dominates the extracted one
      out.witness = w;
      break;
    }
    case SolveStatus::Indeterminate:
      out.status = WitnessSearchStatus::Indeterminate;
      break;
  }
  return out;
}

double ajp_bound(int k, double alpha, double beta, double delta0) {
  if (k < 0) throw input_error("coordinate count must be non-negative");
  if (!(alpha > 0.0) || !(beta >= 0.0)) throw input_error("advantage parameters must be positive");
  if (!(delta0 > 0.0) || !(delta0 < 0.25))
    throw input_error("failure mass must lie in (0, 1/4)");
  // Distributed form k*alpha - k*beta - k*alpha*2*sqrt(delta0): each term is
  // a clean product, so decimal-friendly parameters land on decimal results.
  const double gain = k * alpha;
  const double loss = k * beta;
  const double failure = gain * (2.0 * std::sqrt(delta0));
  return (gain - loss) - failure;
}

}  // namespace normlab
