#pragma once

#include "gme/model.hpp"
#include "gme/symplectic.hpp"

#include <cmath>
#include <vector>

namespace gme {

/// Quadratic generator of a generalized master equation
///   mu' = {A, mu} + [C, mu] + sum_mn K_mn r_m mu r_n  - c0 mu
/// with A = r^T A_mat r / 2 + a^T Omega r and C = r^T C_mat r / 2 + c^T Omega r.
/// c0 is a constant rate added to xi' (Tr mu = e^{-xi}).
struct GeneratorSpec {
  int n_modes = 0;
  CMat A_mat;
  CMat C_mat;
  CMat K_mat;
  CVec a_vec;
  CVec c_vec;
  cplx c0{0.0, 0.0};

  int dim() const { return 2 * n_modes; }

  static GeneratorSpec zero(int n_modes) {
    const int d = 2 * n_modes;
    return {n_modes, CMat::Zero(d, d), CMat::Zero(d, d), CMat::Zero(d, d), CVec::Zero(d), CVec::Zero(d), 0.0};
  }

  /// Checks dimensions and replaces C_mat by its symmetric part; the
  /// antisymmetric part only adds a multiple of the identity to C, which
  /// drops out of the commutator.
  GeneratorSpec& normalize() {
    const int d = dim();
    if (n_modes <= 0) throw Error("dimension_mismatch", "n_modes must be positive");
    auto square = [d](const CMat& m) { return m.rows() == d && m.cols() == d; };
    if (!square(A_mat) || !square(C_mat) || !square(K_mat) || a_vec.size() != d || c_vec.size() != d)
      throw Error("dimension_mismatch", "generator blocks must match 2n=" + std::to_string(d));
    C_mat = sym(C_mat);
    return *this;
  }
};

/// Coefficients of the moment equations
///   sigma' = sigma Q sigma + A sigma + sigma A^T + D
///   d'     = A d + sigma Q d - sigma Omega a + i c
///   xi'    = -d^T Q d - tr[sigma Q]/2 - tr[W Omega]/2 - 2 a^T Omega d + c0
struct MomentCoefficients {
  int n_modes = 0;
  CMat A, D, Q, W;
  CVec a, c;
  cplx c0{0.0, 0.0};

  int dim() const { return 2 * n_modes; }
};

namespace detail {

inline CMat enforce_symmetric(const CMat& m, const char* name) {
  const double scale = std::max(1.0, max_abs(m));
  if (max_abs(m - m.transpose()) > 1e-12 * scale)
    throw Error("coefficient_symmetry", std::string(name) + " is not symmetric");
  return sym(m);
}

inline CMat enforce_antisymmetric(const CMat& m, const char* name) {
  const double scale = std::max(1.0, max_abs(m));
  if (max_abs(m + m.transpose()) > 1e-12 * scale)
    throw Error("coefficient_symmetry", std::string(name) + " is not antisymmetric");
  return skew(m);
}

}  // namespace detail

inline MomentCoefficients coefficients_from_generator(GeneratorSpec g) {
  g.normalize();
  const CMat om = omega(g.n_modes).cast<cplx>();
  const CMat k_minus_a = g.K_mat - g.A_mat;
  MomentCoefficients mc;
  mc.n_modes = g.n_modes;
  mc.A = om * (kI * g.C_mat + kI * skew(g.K_mat));
  mc.D = detail::enforce_symmetric(om * sym(k_minus_a) * om.transpose(), "D");
  mc.Q = detail::enforce_symmetric(sym(g.K_mat + g.A_mat), "Q");
  mc.W = detail::enforce_antisymmetric(kI * skew(k_minus_a), "W");
  mc.a = g.a_vec;
  mc.c = g.c_vec;
  mc.c0 = g.c0;
  return mc;
}

/// Physical Lindblad generator: C = -iH, c = -ih, a = 0, K = (L^dag L)^T, A = -L^dag L.
inline GeneratorSpec lindblad_generator(const RMat& hamiltonian, const RVec& drive, const CMat& jumps) {
  const int d = static_cast<int>(hamiltonian.rows());
  if (d % 2 != 0 || hamiltonian.cols() != d || drive.size() != d || jumps.cols() != d)
    throw Error("dimension_mismatch", "lindblad_generator inputs must share dimension 2n");
  if (max_abs(hamiltonian - hamiltonian.transpose()) > 1e-12)
    throw Error("asymmetric_hamiltonian", "hamiltonian must be symmetric");
  const CMat ldl = jumps.adjoint() * jumps;
  GeneratorSpec g;
  g.n_modes = d / 2;
  g.C_mat = -kI * sym(hamiltonian).cast<cplx>();
  g.c_vec = -kI * drive.cast<cplx>();
  g.a_vec = CVec::Zero(d);
  g.K_mat = ldl.transpose();
  g.A_mat = -ldl;
  return g.normalize();
}

inline GeneratorSpec lindblad_generator(const ModelPoint& p) {
  return lindblad_generator(p.hamiltonian, p.drive, p.all_jumps());
}

inline GeneratorSpec lindblad_generator(const QuadraticModel& model, double theta) {
  return lindblad_generator(model.at(theta));
}

/// Two-sided master equation: H_theta1 acts from the left, H_theta2 from the
/// right; Tr mu(t) = <Psi_theta2(t)|Psi_theta1(t)>. All channels are included.
inline GeneratorSpec tsme_generator(const QuadraticModel& model, double theta1, double theta2) {
  const ModelPoint p1 = model.at(theta1);
  const ModelPoint p2 = model.at(theta2);
  const CMat l1 = p1.all_jumps();
  const CMat l2 = p2.all_jumps();
  const CMat h_plus = (0.5 * (p1.hamiltonian + p2.hamiltonian)).cast<cplx>();
  const CMat h_minus = (0.5 * (p1.hamiltonian - p2.hamiltonian)).cast<cplx>();
  const CMat g1 = l1.adjoint() * l1;
  const CMat g2 = l2.adjoint() * l2;
  const CMat g_plus = 0.5 * (g1 + g2);
  const CMat g_minus = 0.5 * (g1 - g2);

  GeneratorSpec g;
  g.n_modes = model.n_modes();
  // left action  -i H1 - G1/2 = A + C,  right action  +i H2 - G2/2 = A - C
  g.A_mat = -kI * h_minus - g_plus;
  g.C_mat = -kI * h_plus - g_minus;
  g.K_mat = (l2.adjoint() * l1).transpose();
  g.a_vec = -0.5 * kI * (p1.drive - p2.drive).cast<cplx>();
  g.c_vec = -0.5 * kI * (p1.drive + p2.drive).cast<cplx>();
  return g.normalize();
}

/// Charge weights w_k, one per monitored channel.
struct CountingSpec {
  std::vector<double> weights;
};

/// Tilted jump master equation: monitored sandwich terms acquire e^{i lambda w_k}.
inline GeneratorSpec tilted_jump_generator(const QuadraticModel& model, double theta, const CountingSpec& counting,
                                           double lambda) {
  const ModelPoint p = model.at(theta);
  const auto n_mon = p.jumps_monitored.rows();
  if (static_cast<Eigen::Index>(counting.weights.size()) != n_mon)
    throw Error("weight_mismatch", "expected " + std::to_string(n_mon) + " counting weights, got " +
                                       std::to_string(counting.weights.size()));
  GeneratorSpec g = lindblad_generator(p);
  CVec phases(n_mon);
  for (Eigen::Index k = 0; k < n_mon; ++k) phases(k) = std::exp(kI * (lambda * counting.weights[k]));
  const CMat& lm = p.jumps_monitored;
  const CMat& lu = p.jumps_unmonitored;
  g.K_mat = (lm.adjoint() * phases.asDiagonal() * lm + lu.adjoint() * lu).transpose();
  return g;
}

/// Homodyne-type counting: weights w_k and local-oscillator phases phi_k per
/// monitored channel.
struct DiffusiveSpec {
  std::vector<double> weights;
  std::vector<double> phases;
};

/// Tilted master equation for the integrated diffusive current. Only the
/// linear terms change; the -lambda^2/2 sum w_k^2 mu term is carried as c0.
inline GeneratorSpec tilted_diffusive_generator(const QuadraticModel& model, double theta, const DiffusiveSpec& spec,
                                                double lambda) {
  const ModelPoint p = model.at(theta);
  const auto n_mon = p.jumps_monitored.rows();
  if (spec.weights.size() != spec.phases.size() || static_cast<Eigen::Index>(spec.weights.size()) != n_mon)
    throw Error("weight_mismatch", "diffusive weights/phases must both have length " + std::to_string(n_mon));
  GeneratorSpec g = lindblad_generator(p);
  const int d = p.dim();
  CVec f = CVec::Zero(d);
  CVec gv = CVec::Zero(d);
  double w2 = 0.0;
  for (Eigen::Index k = 0; k < n_mon; ++k) {
    const double w = spec.weights[k];
    const double phi = spec.phases[k];
    f += w * std::exp(-kI * phi) * p.jumps_monitored.row(k).transpose();
    gv += w * std::exp(kI * phi) * p.jumps_monitored.row(k).transpose();
    w2 += w * w;
  }
  // v^T r == (Omega v)^T Omega r
  const CMat om = omega(model.n_modes()).cast<cplx>();
  g.c_vec += 0.5 * kI * lambda * (om * (f - gv));
  g.a_vec = 0.5 * kI * lambda * (om * (f + gv));
  g.c0 = 0.5 * lambda * lambda * w2;
  return g;
}

/// Generalized replica master equation on m+2 = thetas.size() copies of the
/// system. The single monitored row j couples neighbouring replicas cyclically,
/// K_{alpha+1,alpha} = (j^dag(theta_alpha) j(theta_alpha+1))^T.
inline GeneratorSpec replica_generator(const QuadraticModel& model, const std::vector<double>& thetas) {
  const int copies = static_cast<int>(thetas.size());
  if (copies < 2) throw Error("invalid_replicas", "at least 2 replicas are required");
  if (model.n_monitored() != 1)
    throw Error("invalid_replicas", "replica generator needs exactly one monitored channel");
  const int d = model.dim();
  GeneratorSpec g = GeneratorSpec::zero(model.n_modes() * copies);
  std::vector<ModelPoint> pts;
  pts.reserve(copies);
  for (double th : thetas) pts.push_back(model.at(th));
  for (int al = 0; al < copies; ++al) {
    const ModelPoint& p = pts[al];
    const CMat jdj = p.jumps_monitored.adjoint() * p.jumps_monitored;
    const CMat ldl = p.jumps_unmonitored.adjoint() * p.jumps_unmonitored;
    g.C_mat.block(al * d, al * d, d, d) = -kI * p.hamiltonian.cast<cplx>();
    g.c_vec.segment(al * d, d) = -kI * p.drive.cast<cplx>();
    g.A_mat.block(al * d, al * d, d, d) = -(jdj + ldl);
    g.K_mat.block(al * d, al * d, d, d) = ldl.transpose();
  }
  for (int al = 0; al < copies; ++al) {
    const int next = (al + 1) % copies;
    const CMat& j_al = pts[al].jumps_monitored;
    const CMat& j_next = pts[next].jumps_monitored;
    g.K_mat.block(next * d, al * d, d, d) += (j_al.adjoint() * j_next).transpose();
  }
  return g.normalize();
}

}  // namespace gme
