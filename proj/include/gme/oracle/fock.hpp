#pragma once

// Brute-force validator: the generalized master equation as a dense operator
// in a truncated number basis. Test-support API; small mode counts only.

#include "gme/generator.hpp"
#include "gme/model.hpp"

#include <Eigen/SVD>
#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <vector>

namespace gme::oracle {

using SpMat = Eigen::SparseMatrix<cplx>;

struct TruncatedOperator {
  int dim_per_mode = 25;
  int n_modes = 1;
  CMat matrix;

  static TruncatedOperator vacuum(int dim_per_mode, int n_modes) {
    TruncatedOperator op{dim_per_mode, n_modes, {}};
    const auto side = op.side();
    op.matrix = CMat::Zero(side, side);
    op.matrix(0, 0) = 1.0;
    return op;
  }

  Eigen::Index side() const {
    Eigen::Index s = 1;
    for (int k = 0; k < n_modes; ++k) s *= dim_per_mode;
    return s;
  }
};

struct OracleConfig {
  int dim_per_mode = 25;
  int max_modes = 3;
  Eigen::Index max_side = 4096;
  double initial_dt = 0.02;
  double halving_tol = 1e-8;  // |Tr mu(dt) - Tr mu(dt/2)|
  int max_halvings = 6;
  double leakage_tol = 1e-6;  // weight in the top two Fock levels of any mode
};

/// Quadratures (x1, p1, ..., xn, pn) with x = (a + a^dag)/sqrt2,
/// p = -i (a - a^dag)/sqrt2; mode 1 is the most significant tensor factor.
inline std::vector<SpMat> build_quadrature_ops(int dim, int n_modes) {
  if (dim < 2) throw Error("invalid_dimension", "dim per mode must be >= 2");
  SpMat a(dim, dim);
  for (int k = 1; k < dim; ++k) a.insert(k - 1, k) = std::sqrt(static_cast<double>(k));
  const SpMat ad = SpMat(a.adjoint());
  const double r2 = std::sqrt(2.0);
  const SpMat x = (a + ad) / r2;
  const SpMat p = (a - ad) * (-kI / r2);

  auto identity = [](Eigen::Index n) {
    SpMat id(n, n);
    id.setIdentity();
    return id;
  };
  auto kron = [](const SpMat& l, const SpMat& r) {
    std::vector<Eigen::Triplet<cplx>> trip;
    for (int i = 0; i < l.outerSize(); ++i)
      for (SpMat::InnerIterator it(l, i); it; ++it)
        for (int j = 0; j < r.outerSize(); ++j)
          for (SpMat::InnerIterator jt(r, j); jt; ++jt)
            trip.emplace_back(it.row() * r.rows() + jt.row(), it.col() * r.cols() + jt.col(), it.value() * jt.value());
    SpMat out(l.rows() * r.rows(), l.cols() * r.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  };

  std::vector<SpMat> ops;
  for (int mode = 0; mode < n_modes; ++mode) {
    for (const SpMat* single : {&x, &p}) {
      SpMat op = mode == 0 ? *single : identity(dim);
      for (int k = 1; k < n_modes; ++k) op = kron(op, k == mode ? *single : identity(dim));
      op.makeCompressed();
      ops.push_back(op);
    }
  }
  return ops;
}

/// Operator for the linear combination sum_j v_j r_j.
inline SpMat linear_op(const std::vector<SpMat>& r, const CVec& v) {
  SpMat out(r.front().rows(), r.front().cols());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) != cplx(0.0)) out += v(j) * r[j];
  }
  return out;
}

/// Operator for r^T M r / 2 + v^T Omega r.
inline SpMat quadratic_op(const std::vector<SpMat>& r, const CMat& m, const CVec& v) {
  const auto n = static_cast<Eigen::Index>(r.size());
  SpMat out(r.front().rows(), r.front().cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (m(i, j) != cplx(0.0)) out += (0.5 * m(i, j)) * SpMat(r[i] * r[j]);
  const CVec w = (v.transpose() * omega(static_cast<int>(n / 2)).cast<cplx>()).transpose();
  out += linear_op(r, w);
  out.makeCompressed();
  return out;
}

using Superoperator = std::function<CMat(const CMat&)>;

/// mu' = {A, mu} + [C, mu] + sum K_mn r_m mu r_n - c0 mu, realized directly
/// from the generator data.
inline Superoperator generator_action(const GeneratorSpec& g, const std::vector<SpMat>& r) {
  const SpMat a_op = quadratic_op(r, g.A_mat, g.a_vec);
  const SpMat c_op = quadratic_op(r, g.C_mat, g.c_vec);
  const SpMat left = a_op + c_op;
  const SpMat right = a_op - c_op;
  std::vector<SpMat> rk;  // sum_n K_mn r_n
  for (Eigen::Index m = 0; m < g.K_mat.rows(); ++m) rk.push_back(linear_op(r, g.K_mat.row(m).transpose()));
  const cplx c0 = g.c0;
  return [=](const CMat& mu) {
    CMat out = left * mu + mu * right - c0 * mu;
    for (std::size_t m = 0; m < rk.size(); ++m) {
      if (rk[m].nonZeros() == 0) continue;
      out += r[m] * CMat(mu * rk[m]);
    }
    return out;
  };
}

namespace detail {

inline CMat rk4(const Superoperator& f, CMat mu, double t, int steps) {
  const double dt = t / steps;
  for (int s = 0; s < steps; ++s) {
    const CMat k1 = f(mu);
    const CMat k2 = f(mu + 0.5 * dt * k1);
    const CMat k3 = f(mu + 0.5 * dt * k2);
    const CMat k4 = f(mu + dt * k3);
    mu += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return mu;
}

inline double top_level_weight(const TruncatedOperator& op) {
  const cplx tr = op.matrix.trace();
  double w = 0.0;
  const auto side = op.side();
  for (Eigen::Index i = 0; i < side; ++i) {
    Eigen::Index idx = i;
    bool top = false;
    for (int k = 0; k < op.n_modes; ++k) {
      if (idx % op.dim_per_mode >= op.dim_per_mode - 2) top = true;
      idx /= op.dim_per_mode;
    }
    if (top) w += std::abs(op.matrix(i, i));
  }
  return w / std::max(std::abs(tr), 1e-300);
}

}  // namespace detail

/// Fixed-step RK4 of an arbitrary linear superoperator. The step count is
/// doubled until the trace changes by less than cfg.halving_tol.
inline TruncatedOperator evolve_superoperator(const Superoperator& f, const TruncatedOperator& mu0, double t,
                                              const OracleConfig& cfg = {}) {
  if (t == 0.0) return mu0;
  int steps = std::max(1, static_cast<int>(std::ceil(t / cfg.initial_dt)));
  CMat prev = detail::rk4(f, mu0.matrix, t, steps);
  for (int h = 0; h < cfg.max_halvings; ++h) {
    steps *= 2;
    CMat next = detail::rk4(f, mu0.matrix, t, steps);
    const double change = std::abs(next.trace() - prev.trace());
    prev = std::move(next);
    if (change < cfg.halving_tol) {
      TruncatedOperator out{mu0.dim_per_mode, mu0.n_modes, std::move(prev)};
      if (detail::top_level_weight(out) > cfg.leakage_tol)
        throw Error("truncation_insufficient", "top Fock levels carry weight " +
                                                   std::to_string(detail::top_level_weight(out)));
      return out;
    }
  }
  throw Error("tolerance_failure", "RK4 step halving did not converge");
}

inline TruncatedOperator evolve_truncated(const GeneratorSpec& g, const TruncatedOperator& mu0, double t,
                                          const OracleConfig& cfg = {}) {
  if (mu0.n_modes != g.n_modes) throw Error("dimension_mismatch", "operator vs generator modes");
  if (g.n_modes > cfg.max_modes || mu0.side() > cfg.max_side)
    throw Error("dimension_cap", "truncated space too large for the oracle");
  const auto r = build_quadrature_ops(mu0.dim_per_mode, mu0.n_modes);
  return evolve_superoperator(generator_action(g, r), mu0, t, cfg);
}

struct OperatorMoments {
  cplx trace;
  CVec d;
  CMat sigma;
};

/// Normalized first moments and covariance of a (generally non-Hermitian)
/// operator: d = Tr[r nu], sigma = Tr[{dr, dr^T} nu] with nu = mu / Tr mu.
inline OperatorMoments moments_from_operator(const TruncatedOperator& mu) {
  const cplx tr = mu.matrix.trace();
  if (std::abs(tr) < 1e-300) throw Error("zero_trace", "operator has zero trace");
  const CMat nu = mu.matrix / tr;
  const auto r = build_quadrature_ops(mu.dim_per_mode, mu.n_modes);
  const auto n = static_cast<Eigen::Index>(r.size());
  OperatorMoments out{tr, CVec(n), CMat(n, n)};
  std::vector<CMat> r_nu;
  for (const auto& op : r) r_nu.push_back(op * nu);
  for (Eigen::Index i = 0; i < n; ++i) out.d(i) = r_nu[i].trace();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      // Tr[r_i r_j nu] + Tr[r_j r_i nu]
      const cplx second = CMat(r[i] * r_nu[j]).trace() + CMat(r[j] * r_nu[i]).trace();
      out.sigma(i, j) = second - 2.0 * out.d(i) * out.d(j);
    }
  return out;
}

inline double trace_norm_truncated(const TruncatedOperator& mu) {
  Eigen::BDCSVD<CMat> svd(mu.matrix);
  return svd.singularValues().sum();
}

/// Quadratic Hamiltonian and jump operators of a model point.
struct ModelOperators {
  SpMat hamiltonian;
  std::vector<SpMat> monitored;
  std::vector<SpMat> unmonitored;
};

inline ModelOperators model_operators(const ModelPoint& p, const std::vector<SpMat>& r) {
  ModelOperators ops;
  ops.hamiltonian = quadratic_op(r, p.hamiltonian.cast<cplx>(), p.drive.cast<cplx>());
  for (Eigen::Index k = 0; k < p.jumps_monitored.rows(); ++k)
    ops.monitored.push_back(linear_op(r, p.jumps_monitored.row(k).transpose()));
  for (Eigen::Index k = 0; k < p.jumps_unmonitored.rows(); ++k)
    ops.unmonitored.push_back(linear_op(r, p.jumps_unmonitored.row(k).transpose()));
  return ops;
}

// Operator-level master equations built without GeneratorSpec, so they check
// the generator constructors independently.

/// -i(H1 mu - mu H2) + sum J1 mu J2^dag - (J1^dag J1 mu + mu J2^dag J2)/2
inline Superoperator tsme_action(const ModelOperators& o1, const ModelOperators& o2) {
  std::vector<SpMat> j1 = o1.monitored, j2 = o2.monitored;
  j1.insert(j1.end(), o1.unmonitored.begin(), o1.unmonitored.end());
  j2.insert(j2.end(), o2.unmonitored.begin(), o2.unmonitored.end());
  SpMat left = -kI * o1.hamiltonian;
  SpMat right = kI * o2.hamiltonian;
  std::vector<SpMat> j2d;
  for (std::size_t k = 0; k < j1.size(); ++k) {
    left -= 0.5 * SpMat(SpMat(j1[k].adjoint()) * j1[k]);
    right -= 0.5 * SpMat(SpMat(j2[k].adjoint()) * j2[k]);
    j2d.push_back(SpMat(j2[k].adjoint()));
  }
  return [=](const CMat& mu) {
    CMat out = left * mu + mu * right;
    for (std::size_t k = 0; k < j1.size(); ++k) out += j1[k] * CMat(mu * j2d[k]);
    return out;
  };
}

inline Superoperator lindblad_action(const ModelOperators& o) { return tsme_action(o, o); }

/// Lindblad equation with monitored sandwich terms weighted by e^{i lambda w_k}.
inline Superoperator tilted_jump_action(const ModelOperators& o, const std::vector<double>& weights, double lambda) {
  const Superoperator base = lindblad_action(o);
  std::vector<SpMat> jm = o.monitored;
  std::vector<SpMat> jmd;
  for (const auto& j : jm) jmd.push_back(SpMat(j.adjoint()));
  return [=](const CMat& mu) {
    CMat out = base(mu);
    for (std::size_t k = 0; k < jm.size(); ++k)
      out += (std::exp(kI * (lambda * weights[k])) - 1.0) * (jm[k] * CMat(mu * jmd[k]));
    return out;
  };
}

/// Lindblad equation plus i lambda sum w_k (e^{-i phi_k} L_k mu + e^{i phi_k} mu L_k)
/// - lambda^2/2 sum w_k^2 mu for the monitored channels.
inline Superoperator tilted_diffusive_action(const ModelOperators& o, const std::vector<double>& weights,
                                             const std::vector<double>& phases, double lambda) {
  const Superoperator base = lindblad_action(o);
  SpMat left(o.hamiltonian.rows(), o.hamiltonian.cols());
  SpMat right = left;
  double w2 = 0.0;
  for (std::size_t k = 0; k < o.monitored.size(); ++k) {
    left += (kI * lambda * weights[k] * std::exp(-kI * phases[k])) * o.monitored[k];
    right += (kI * lambda * weights[k] * std::exp(kI * phases[k])) * o.monitored[k];
    w2 += weights[k] * weights[k];
  }
  const double scalar = 0.5 * lambda * lambda * w2;
  return [=](const CMat& mu) { return CMat(base(mu) + left * mu + mu * right - scalar * mu); };
}

/// Replica master equation: independent no-jump + unmonitored evolution per
/// replica, plus cyclic monitored transfer J^(a+1) mu J^(a)^dag.
/// `replica_ops[a]` must act on the modes of replica a.
inline Superoperator replica_action(const std::vector<ModelOperators>& replica_ops) {
  const std::size_t copies = replica_ops.size();
  const auto side = replica_ops.front().hamiltonian.rows();
  SpMat left(side, side), right(side, side);
  std::vector<SpMat> sand_l, sand_r;  // L mu R^dag pairs
  for (std::size_t al = 0; al < copies; ++al) {
    const ModelOperators& o = replica_ops[al];
    left -= kI * o.hamiltonian;
    right += kI * o.hamiltonian;
    for (const auto& j : o.monitored) {
      const SpMat jdj = SpMat(j.adjoint()) * j;
      left -= 0.5 * jdj;
      right -= 0.5 * jdj;
    }
    for (const auto& l : o.unmonitored) {
      const SpMat ldl = SpMat(l.adjoint()) * l;
      left -= 0.5 * ldl;
      right -= 0.5 * ldl;
      sand_l.push_back(l);
      sand_r.push_back(SpMat(l.adjoint()));
    }
    const ModelOperators& nx = replica_ops[(al + 1) % copies];
    sand_l.push_back(nx.monitored.front());
    sand_r.push_back(SpMat(o.monitored.front().adjoint()));
  }
  return [=](const CMat& mu) {
    CMat out = left * mu + mu * right;
    for (std::size_t k = 0; k < sand_l.size(); ++k) out += sand_l[k] * CMat(mu * sand_r[k]);
    return out;
  };
}

}  // namespace gme::oracle
