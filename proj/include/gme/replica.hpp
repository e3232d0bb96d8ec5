#pragma once

#include "gme/metrology.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

namespace gme {

struct ReplicaConfig {
  int max_replicas = 24;  // state size grows as (2n * replicas)^2
  IntegratorConfig integrator{1e-12, 1e-14, 0.0, 1e8};
};

/// B(Theta) = Tr[Xi(theta_1) ... Xi(theta_{m+2})] as Tr mu(t) of the replica
/// GME started from the product vacuum.
inline cplx bargmann_invariant(const QuadraticModel& model, const std::vector<double>& thetas, double t,
                               const ReplicaConfig& cfg = {}) {
  if (thetas.size() < 2) throw Error("invalid_replicas", "at least 2 replicas are required");
  if (static_cast<int>(thetas.size()) > cfg.max_replicas)
    throw Error("replica_cap_exceeded", std::to_string(thetas.size()) + " replicas exceed cap " +
                                            std::to_string(cfg.max_replicas));
  if (!(t >= 0.0)) throw Error("invalid_parameter", "t must be nonnegative");
  const auto mc = coefficients_from_generator(replica_generator(model, thetas));
  const auto init = GaussianMomentState::vacuum(mc.n_modes);
  return evolve_to(init, mc, t, cfg.integrator).trace();
}

/// Lambda(theta) = 2 sqrt(Tr Xi(theta)^2).
inline double lambda_purity(const QuadraticModel& model, double theta, double t, const ReplicaConfig& cfg = {}) {
  const cplx b = bargmann_invariant(model, {theta, theta}, t, cfg);
  if (!(b.real() > 0.0)) throw Error("invalid_purity", "Tr Xi^2 has nonpositive real part");
  return 2.0 * std::sqrt(b.real());
}

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n || n < 0) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// D_l^m = 2 C(m,l) - C(m,l+1) - C(m,l-1), binomials vanishing out of range.
inline std::int64_t dlm_coefficient(int m, int l) {
  return 2 * binomial(m, l) - binomial(m, l + 1) - binomial(m, l - 1);
}

struct ReplicaQfiResult {
  double lambda = 0.0;
  std::vector<double> f;        // f_0 .. f_N (real parts)
  std::vector<double> f_imag;   // discarded imaginary residues
  std::vector<double> approximants;  // Q_0 .. Q_N
};

/// Sum_{m=0}^{N} (-1)^m C(N+1, m+1) f_m / Lambda^{m+1}.
inline double replica_series(int order, double lambda, const std::vector<double>& f) {
  double q = 0.0;
  double lam_pow = 1.0;
  for (int m = 0; m <= order; ++m) {
    lam_pow *= lambda;
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    q += sign * static_cast<double>(binomial(order + 1, m + 1)) * f[m] / lam_pow;
  }
  return q;
}

/// All approximants Q_0..Q_N of the waveguide QFI at time t. The mixed
/// partials d_alpha d_beta Tr[Xi(alpha)^{l+1} Xi(beta)^{m-l+1}] use a 4-point
/// cross stencil; invariants are cached per call.
inline ReplicaQfiResult replica_qfi_series(const QuadraticModel& model, double theta, double t, int order,
                                           const FDConfig& fd = {}, const ReplicaConfig& cfg = {}) {
  if (order < 0) throw Error("invalid_parameter", "approximant order must be >= 0");
  if (order + 2 > cfg.max_replicas)
    throw Error("replica_cap_exceeded", "order " + std::to_string(order) + " needs " + std::to_string(order + 2) +
                                            " replicas, cap is " + std::to_string(cfg.max_replicas));
  detail::require_step(fd.mixed_step);

  std::map<std::tuple<int, int, double, double>, cplx> cache;
  auto g = [&](int na, int nb, double alpha, double beta) {
    // Tr[X^a Y^b] = Tr[Y^b X^a], and equal parameters collapse the pattern
    if (alpha == beta) {
      na += nb;
      nb = 0;
    } else if (beta < alpha) {
      std::swap(na, nb);
      std::swap(alpha, beta);
    }
    const auto key = std::make_tuple(na, nb, alpha, beta);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<double> thetas(na, alpha);
    thetas.insert(thetas.end(), nb, beta);
    const cplx v = bargmann_invariant(model, thetas, t, cfg);
    cache.emplace(key, v);
    return v;
  };

  const double h0 = std::abs(fd.mixed_step) * std::max(1.0, std::abs(theta));
  auto mixed = [&](int na, int nb, double h) {
    return (g(na, nb, theta + h, theta + h) - g(na, nb, theta + h, theta - h) - g(na, nb, theta - h, theta + h) +
            g(na, nb, theta - h, theta - h)) /
           (4.0 * h * h);
  };

  ReplicaQfiResult res;
  res.lambda = lambda_purity(model, theta, t, cfg);
  for (int m = 0; m <= order; ++m) {
    auto fm_at = [&](double h) {
      cplx acc = 0.0;
      for (int l = 0; l <= m; ++l) {
        const auto c = dlm_coefficient(m, l);
        if (c != 0) acc += static_cast<double>(c) * mixed(l + 1, m - l + 1, h);
      }
      return acc;
    };
    cplx fm = fm_at(h0);
    if (fd.richardson) fm = (4.0 * fm_at(0.5 * h0) - fm) / 3.0;
    if (std::abs(fm.imag()) > 1e-6)
      throw Error("complex_fm", "f_" + std::to_string(m) + " imaginary part " + std::to_string(fm.imag()));
    res.f.push_back(fm.real());
    res.f_imag.push_back(fm.imag());
  }
  for (int n = 0; n <= order; ++n) res.approximants.push_back(replica_series(n, res.lambda, res.f));
  return res;
}

inline double replica_qfi_approximant(const QuadraticModel& model, double theta, double t, int order,
                                      const FDConfig& fd = {}, const ReplicaConfig& cfg = {}) {
  return replica_qfi_series(model, theta, t, order, fd, cfg).approximants.back();
}

}  // namespace gme
