#pragma once

#include "gme/types.hpp"

#include <algorithm>
#include <vector>

namespace gme {

/// Block-diagonal symplectic form for quadrature ordering (x1, p1, ..., xn, pn).
class SymplecticForm {
 public:
  explicit SymplecticForm(int n_modes) : n_modes_(n_modes), matrix_(RMat::Zero(2 * n_modes, 2 * n_modes)) {
    if (n_modes <= 0) throw Error("invalid_dimension", "n_modes must be positive");
    for (int k = 0; k < n_modes; ++k) {
      matrix_(2 * k, 2 * k + 1) = 1.0;
      matrix_(2 * k + 1, 2 * k) = -1.0;
    }
  }

  int n_modes() const { return n_modes_; }
  int dim() const { return 2 * n_modes_; }
  const RMat& matrix() const { return matrix_; }
  CMat complex_matrix() const { return matrix_.cast<cplx>(); }

 private:
  int n_modes_;
  RMat matrix_;
};

inline RMat omega(int n_modes) { return SymplecticForm(n_modes).matrix(); }

/// Symplectic spectrum of a real symmetric positive definite 2n x 2n matrix:
/// the n moduli of the paired eigenvalues of i*Omega*sigma, ascending.
/// Values within 1e-9 below 1 are clamped to 1.
inline std::vector<double> symplectic_eigenvalues(const RMat& sigma) {
  const int dim = static_cast<int>(sigma.rows());
  if (dim == 0 || dim % 2 != 0 || sigma.cols() != dim)
    throw Error("invalid_dimension", "covariance matrix must be 2n x 2n");
  Eigen::LLT<RMat> llt(sym(sigma));
  if (llt.info() != Eigen::Success) throw Error("not_positive_definite", "covariance matrix is not positive definite");
  const CMat m = kI * omega(dim / 2).cast<cplx>() * sigma.cast<cplx>();
  Eigen::ComplexEigenSolver<CMat> es(m, false);
  std::vector<double> mods(dim);
  for (int k = 0; k < dim; ++k) mods[k] = std::abs(es.eigenvalues()(k));
  std::sort(mods.begin(), mods.end());
  // eigenvalues come in +/- pairs; keep one of each
  std::vector<double> nu(dim / 2);
  for (int k = 0; k < dim / 2; ++k) {
    const double a = mods[2 * k], b = mods[2 * k + 1];
    if (std::abs(a - b) > 1e-8 * std::max(1.0, b)) throw Error("unpaired_spectrum", "eigenvalues of i Omega sigma do not pair");
    nu[k] = 0.5 * (a + b);
    if (nu[k] < 1.0 && nu[k] > 1.0 - 1e-9) nu[k] = 1.0;
  }
  return nu;
}

/// Smallest eigenvalue of the Hermitian matrix sigma + i*Omega.
inline double bona_fide_margin(const RMat& sigma) {
  const int dim = static_cast<int>(sigma.rows());
  const CMat h = sigma.cast<cplx>() + kI * omega(dim / 2).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace gme
