#pragma once

#include "gme/dynamics.hpp"
#include "gme/generator.hpp"
#include "gme/model.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace gme {

/// Finite-difference settings shared by the QFI and cumulant estimators.
struct FDConfig {
  double step = 1e-3;         // epsilon for parameter stencils, scaled by max(1, |theta|)
  double lambda_step = 1e-3;  // counting-field stencil
  double mixed_step = 1e-2;   // replica mixed partials, scaled by max(1, |theta|)
  bool richardson = false;    // combine steps h and h/2
  std::function<void(const std::string&)> on_warning = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };

  void warn(const std::string& msg) const {
    if (on_warning) on_warning(msg);
  }
};

namespace detail {

/// Evaluates `estimate(h)` once, or with Richardson extrapolation for an
/// O(h^2) estimator. Warns when the two levels disagree by more than 1%.
template <typename Fn>
auto richardson(const FDConfig& fd, double h, Fn&& estimate, const char* what) {
  auto coarse = estimate(h);
  if (!fd.richardson) return coarse;
  auto fine = estimate(0.5 * h);
  auto out = coarse;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
    const double scale = std::abs(out[i]);
    if (scale > 1e-12 && std::abs(fine[i] - coarse[i]) > 0.01 * scale)
      fd.warn(std::string(what) + ": stencil truncation above 1% (step too large)");
  }
  return out;
}

inline double require_step(double h, double theta = 0.0) {
  if (h == 0.0 || !std::isfinite(h)) throw Error("zero_step", "finite-difference step must be nonzero");
  return std::abs(h) * std::max(1.0, std::abs(theta));
}

}  // namespace detail

/// Joint system-environment QFI 4 Re d^2_eps xi(theta, theta+eps, t) on a time
/// grid (starting at 0), from TSME trajectories at theta +/- eps.
inline std::vector<double> joint_qfi_series(const QuadraticModel& model, double theta,
                                            const std::vector<double>& t_grid, const FDConfig& fd = {},
                                            const IntegratorConfig& cfg = {}) {
  const double step = detail::require_step(fd.step, theta);
  const auto init = GaussianMomentState::vacuum(model.n_modes());
  auto estimate = [&](double h) {
    const Trajectory up = evolve(init, coefficients_from_generator(tsme_generator(model, theta, theta + h)), t_grid, cfg);
    const Trajectory dn = evolve(init, coefficients_from_generator(tsme_generator(model, theta, theta - h)), t_grid, cfg);
    std::vector<double> q(t_grid.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = 4.0 * ((up.states[i].xi + dn.states[i].xi) / (h * h)).real();
    return q;
  };
  auto q = detail::richardson(fd, step, estimate, "joint_qfi");
  for (double v : q) {
    if (v < -1e-8) fd.warn("joint_qfi negative beyond tolerance: " + std::to_string(v));
  }
  return q;
}

inline double joint_qfi(const QuadraticModel& model, double theta, double t, const FDConfig& fd = {},
                        const IntegratorConfig& cfg = {}) {
  return joint_qfi_series(model, theta, {0.0, t}, fd, cfg).back();
}

/// Long-time joint QFI rate 4 Re d^2_eps xi'_ss. The +/- eps steady states
/// are Newton-continued from the theta steady state.
inline double joint_qfi_rate(const QuadraticModel& model, double theta, const FDConfig& fd = {},
                             const SteadyStateConfig& cfg = {}) {
  const double step = detail::require_step(fd.step, theta);
  const SteadyState base = steady_state(coefficients_from_generator(tsme_generator(model, theta, theta)), cfg);
  auto estimate = [&](double h) {
    const SteadyState up =
        steady_state(coefficients_from_generator(tsme_generator(model, theta, theta + h)), cfg, base.sigma);
    const SteadyState dn =
        steady_state(coefficients_from_generator(tsme_generator(model, theta, theta - h)), cfg, base.sigma);
    return std::vector<double>{4.0 * ((up.xi_rate + dn.xi_rate - 2.0 * base.xi_rate) / (h * h)).real()};
  };
  return detail::richardson(fd, step, estimate, "joint_qfi_rate").front();
}

namespace detail {

// log |mu|_1 and the smallest symplectic eigenvalue of sigma_K.
inline std::pair<double, double> log_trace_norm(const GaussianMomentState& s) {
  const int dim = s.dim();
  const int n = dim / 2;
  const RMat sr = s.sigma.real();
  const RMat si = s.sigma.imag();
  const RVec di = s.d.imag();
  Eigen::LLT<RMat> llt(sr);
  if (llt.info() != Eigen::Success) throw Error("re_sigma_not_pd", "Re[sigma] is not positive definite");
  const RMat om = omega(n);
  const RMat b = si + om;
  RMat sigma_k = 0.5 * (sr + b * llt.solve(b.transpose()));
  sigma_k = sym(sigma_k);
  const double margin = bona_fide_margin(sigma_k);
  if (margin < -1e-9) throw Error("invalid_cm", "sigma_K + i Omega has eigenvalue " + std::to_string(margin));
  double log_det = 0.0;
  for (int k = 0; k < dim; ++k) log_det += 2.0 * std::log(llt.matrixL()(k, k));
  double log_tr_sqrt = -0.5 * n * std::log(2.0);
  double nu_min = std::numeric_limits<double>::infinity();
  for (double nu : symplectic_eigenvalues(sigma_k)) {
    nu = std::max(nu, 1.0);
    nu_min = std::min(nu_min, nu);
    log_tr_sqrt += std::log(std::sqrt(nu + 1.0) + std::sqrt(nu - 1.0));
  }
  const double disp = di.dot(llt.solve(di));
  return {-s.xi.real() + disp - 0.25 * log_det + log_tr_sqrt, nu_min};
}

}  // namespace detail

/// log of the trace norm |mu|_1 of a Gaussian operator.
inline double log_env_fidelity(const GaussianMomentState& s) { return detail::log_trace_norm(s).first; }

/// Trace norm |mu|_1 of the Gaussian operator, which for a TSME-evolved state
/// is the fidelity between the two environment states.
inline double env_fidelity(const GaussianMomentState& s) { return std::exp(log_env_fidelity(s)); }

/// Environment-only QFI -4 d^2_eps log F on a time grid.
inline std::vector<double> env_qfi_series(const QuadraticModel& model, double theta, const std::vector<double>& t_grid,
                                          const FDConfig& fd = {}, const IntegratorConfig& cfg = {}) {
  const double step = detail::require_step(fd.step, theta);
  const auto init = GaussianMomentState::vacuum(model.n_modes());
  auto estimate = [&](double h) {
    const Trajectory up = evolve(init, coefficients_from_generator(tsme_generator(model, theta, theta + h)), t_grid, cfg);
    const Trajectory dn = evolve(init, coefficients_from_generator(tsme_generator(model, theta, theta - h)), t_grid, cfg);
    std::vector<double> q(t_grid.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto [lf_up, nu_up] = detail::log_trace_norm(up.states[i]);
      const auto [lf_dn, nu_dn] = detail::log_trace_norm(dn.states[i]);
      q[i] = -4.0 * (lf_up + lf_dn) / (h * h);
      // sqrt(nu - 1) amplifies roundoff when the environment is nearly pure
      if (t_grid[i] > 0.0 && std::min(nu_up, nu_dn) - 1.0 < 1e-6)
        fd.warn("env_qfi at t=" + std::to_string(t_grid[i]) +
                ": environment nearly pure (nu - 1 < 1e-6), result is roundoff-limited");
    }
    return q;
  };
  return detail::richardson(fd, step, estimate, "env_qfi");
}

inline double env_qfi(const QuadraticModel& model, double theta, double t, const FDConfig& fd = {},
                      const IntegratorConfig& cfg = {}) {
  return env_qfi_series(model, theta, {0.0, t}, fd, cfg).back();
}

/// Bounds on the optimal error probability for discriminating two equally
/// likely states with fidelity F: (1 - sqrt(1 - F^2))/2 <= p_err <= F/2.
inline std::pair<double, double> error_probability_bounds(double fidelity) {
  if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw Error("invalid_parameter", "fidelity must lie in [0,1]");
  return {0.5 * (1.0 - std::sqrt(1.0 - fidelity * fidelity)), 0.5 * fidelity};
}

}  // namespace gme
