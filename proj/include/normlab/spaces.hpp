#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "normlab/constants.hpp"
#include "normlab/errors.hpp"

namespace normlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw input_error(std::string(what) + ": non-finite entry");
}

// (sum |x_i|^p)^(1/p) for finite p, max |x_i| for p = inf. Values of p in
// (0, 1) are the standard quasi-norms; p <= 0 is rejected. The largest
// magnitude is factored out so powers stay in range.
template <typename Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& x, double p) {
  require_finite(x, "lp_norm");
  if (std::isnan(p) || p <= 0.0) throw input_error("lp_norm: p must be positive or infinity");
  if (x.size() == 0) return 0.0;
  const double m = x.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  if (std::isinf(p)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    acc += std::pow(std::abs(x(i)) / m, p);
  }
  return m * std::pow(acc, 1.0 / p);
}

// k vectors of equal dimension carrying the max-of-norms product norm.
struct ProductPoint {
  std::vector<Vector> parts;

  explicit ProductPoint(std::vector<Vector> p) : parts(std::move(p)) {
    if (parts.empty()) throw input_error("ProductPoint: needs at least one part");
    const Eigen::Index dim = parts.front().size();
    for (const auto& part : parts) {
      if (part.size() != dim) throw input_error("ProductPoint: mismatched part dimensions");
      require_finite(part, "ProductPoint");
    }
  }

  int arity() const { return static_cast<int>(parts.size()); }
  Eigen::Index dim() const { return parts.front().size(); }
};

double linf_product_norm(const ProductPoint& x, double base_p);

inline double sum_product_norm(double x_norm, double y_norm) {
  if (!(x_norm >= 0.0) || !(y_norm >= 0.0))
    throw input_error("sum_product_norm: norms must be nonnegative");
  return x_norm + y_norm;
}

// Sum of singular values (Schatten-1).
double trace_norm(const Matrix& a);

// A finite metric space: point count and validated distance matrix.
class FiniteMetric {
 public:
  // Validates symmetry, zero diagonal, positivity off the diagonal and
  // all n^3 triangle inequalities; violations name the offending triple.
  FiniteMetric(int n, Matrix d);

#ifdef NORMLAB_ENABLE_UNCHECKED
  static FiniteMetric unchecked(int n, Matrix d) {
    FiniteMetric m;
    m.n_ = n;
    m.d_ = std::move(d);
    return m;
  }
#endif

  int size() const { return n_; }
  double operator()(int i, int j) const { return d_(i, j); }
  const Matrix& distances() const { return d_; }

 private:
  FiniteMetric() = default;
  int n_ = 0;
  Matrix d_;
};

inline FiniteMetric validate_metric(int n, Matrix d) { return FiniteMetric(n, std::move(d)); }

}  // namespace normlab
