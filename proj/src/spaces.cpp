#include "normlab/spaces.hpp"

#include <Eigen/SVD>
#include <sstream>

namespace normlab {

double linf_product_norm(const ProductPoint& x, double base_p) {
  double best = 0.0;
  for (const auto& part : x.parts) best = std::max(best, lp_norm(part, base_p));
  return best;
}

double trace_norm(const Matrix& a) {
  require_finite(a, "trace_norm");
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

FiniteMetric::FiniteMetric(int n, Matrix d) : n_(n), d_(std::move(d)) {
  if (n < 1) throw validation_error("metric: needs at least one point");
  if (d_.rows() != n || d_.cols() != n) throw validation_error("metric: distance matrix is not n x n");
  require_finite(d_, "metric");
  std::ostringstream msg;
  for (int i = 0; i < n; ++i) {
    if (d_(i, i) != 0.0) {
      msg << "metric: nonzero diagonal at point " << i;
      throw validation_error(msg.str());
    }
    for (int j = i + 1; j < n; ++j) {
      if (d_(i, j) != d_(j, i)) {
        msg << "metric: asymmetry at pair (" << i << ", " << j << ")";
        throw validation_error(msg.str());
      }
      if (d_(i, j) <= 0.0) {
        msg << "metric: nonpositive distance at pair (" << i << ", " << j << ")";
        throw validation_error(msg.str());
      }
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (d_(i, k) > d_(i, j) + d_(j, k)) {
          msg << "metric: triangle violation at triple (" << i << ", " << j << ", " << k << "): d(" << i
              << "," << k << ") = " << d_(i, k) << " > " << d_(i, j) + d_(j, k);
          throw validation_error(msg.str());
        }
}

}  // namespace normlab
