#pragma once

#include "gme/types.hpp"

#include <Eigen/Eigenvalues>

namespace gme {

/// Solves A X + X B = C for square complex A (m x m), B (n x n) by
/// Bartels-Stewart on complex Schur forms.
inline CMat solve_sylvester(const CMat& a, const CMat& b, const CMat& c) {
  const auto m = a.rows();
  const auto n = b.rows();
  if (a.cols() != m || b.cols() != n || c.rows() != m || c.cols() != n)
    throw Error("dimension_mismatch", "solve_sylvester shapes");
  Eigen::ComplexSchur<CMat> sa(a);
  Eigen::ComplexSchur<CMat> sb(b);
  const CMat& ua = sa.matrixU();
  const CMat& ta = sa.matrixT();
  const CMat& ub = sb.matrixU();
  const CMat& tb = sb.matrixT();
  const CMat f = ua.adjoint() * c * ub;
  CMat y(m, n);
  // column k: (T_a + T_b(k,k)) y_k = f_k - sum_{j<k} T_b(j,k) y_j
  for (Eigen::Index k = 0; k < n; ++k) {
    CVec rhs = f.col(k);
    for (Eigen::Index j = 0; j < k; ++j) rhs -= tb(j, k) * y.col(j);
    CMat tri = ta;
    tri.diagonal().array() += tb(k, k);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::abs(tri(i, i)) < 1e-300) throw Error("singular_linear_solve", "Sylvester operator is singular");
    }
    y.col(k) = tri.triangularView<Eigen::Upper>().solve(rhs);
  }
  return ua * y * ub.adjoint();
}

}  // namespace gme
