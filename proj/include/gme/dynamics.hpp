#pragma once

#include "gme/generator.hpp"
#include "gme/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace gme {

/// Gaussian operator mu = e^{-xi} nu, with nu described by a complex
/// symmetric covariance `sigma` and complex first moments `d`.
struct GaussianMomentState {
  CMat sigma;
  CVec d;
  cplx xi{0.0, 0.0};

  int dim() const { return static_cast<int>(sigma.rows()); }

  static GaussianMomentState vacuum(int n_modes) {
    return {CMat::Identity(2 * n_modes, 2 * n_modes), CVec::Zero(2 * n_modes), 0.0};
  }

  /// Real physical Gaussian state with xi = 0.
  static GaussianMomentState physical(const RMat& sigma, const RVec& d) {
    return {sigma.cast<cplx>(), d.cast<cplx>(), 0.0};
  }

  cplx trace() const { return std::exp(-xi); }
};

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.0;  // <= 0: unbounded
  double blowup_norm = 1e8;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw Error("invalid_config", "integrator tolerances must be positive");
    if (!(blowup_norm > 0.0)) throw Error("invalid_config", "blowup_norm must be positive");
  }
};

struct StateDerivative {
  CMat sigma;
  CVec d;
  cplx xi;
};

inline cplx xi_rate(const CMat& sigma, const CVec& d, const MomentCoefficients& mc) {
  const CMat om = omega(mc.n_modes).cast<cplx>();
  const cplx quad = d.transpose() * mc.Q * d;
  const cplx lin = mc.a.transpose() * om * d;
  return -quad - 0.5 * (sigma * mc.Q).trace() - 0.5 * (mc.W * om).trace() - 2.0 * lin + mc.c0;
}

inline StateDerivative rhs(const GaussianMomentState& s, const MomentCoefficients& mc) {
  if (s.dim() != mc.dim() || s.d.size() != mc.dim()) throw Error("dimension_mismatch", "state vs coefficients");
  const CMat om = omega(mc.n_modes).cast<cplx>();
  const CMat sq = s.sigma * mc.Q;
  CMat ds = sq * s.sigma + mc.A * s.sigma + s.sigma * mc.A.transpose() + mc.D;
  ds = sym(ds);
  CVec dd = mc.A * s.d + sq * s.d - s.sigma * (om * mc.a) + kI * mc.c;
  return {std::move(ds), std::move(dd), xi_rate(s.sigma, s.d, mc)};
}

inline CMat riccati_residual(const CMat& sigma, const MomentCoefficients& mc) {
  return sigma * mc.Q * sigma + mc.A * sigma + sigma * mc.A.transpose() + mc.D;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<GaussianMomentState> states;
  int steps_accepted = 0;
  int steps_rejected = 0;
  double max_asymmetry = 0.0;  // largest |sigma - sigma^T| seen before re-symmetrization

  const GaussianMomentState& back() const { return states.back(); }
};

namespace detail {

// Flattened layout: sigma column-major, then d, then xi.
inline CVec pack(const GaussianMomentState& s) {
  const Eigen::Index n = s.dim();
  CVec y(n * n + n + 1);
  y.head(n * n) = Eigen::Map<const CVec>(s.sigma.data(), n * n);
  y.segment(n * n, n) = s.d;
  y(n * n + n) = s.xi;
  return y;
}

inline GaussianMomentState unpack(const CVec& y, Eigen::Index n) {
  GaussianMomentState s;
  s.sigma = Eigen::Map<const CMat>(y.data(), n, n);
  s.d = y.segment(n * n, n);
  s.xi = y(n * n + n);
  return s;
}

inline CVec packed_rhs(const CVec& y, Eigen::Index n, const MomentCoefficients& mc) {
  const StateDerivative ds = rhs(unpack(y, n), mc);
  CVec out(y.size());
  out.head(n * n) = Eigen::Map<const CVec>(ds.sigma.data(), n * n);
  out.segment(n * n, n) = ds.d;
  out(n * n + n) = ds.xi;
  return out;
}

// Dormand-Prince 5(4) tableau.
struct DoPri {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {0, 0, 0, 0, 0, 0},
      {1.0 / 5, 0, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr std::array<double, 7> b{35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
  // b - b_hat
  static constexpr std::array<double, 7> e{71.0 / 57600,  0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200,
                                           22.0 / 525, -1.0 / 40};
};

}  // namespace detail

/// Integrates the moment equations with adaptive Dormand-Prince 5(4), landing
/// exactly on every requested time. `t_grid` must start at 0 and be sorted.
inline Trajectory evolve(const GaussianMomentState& state0, const MomentCoefficients& mc,
                         const std::vector<double>& t_grid, const IntegratorConfig& cfg = {}) {
  cfg.validate();
  if (t_grid.empty() || t_grid.front() != 0.0) throw Error("invalid_grid", "time grid must start at 0");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw Error("invalid_grid", "time grid must be sorted");
  if (state0.dim() != mc.dim()) throw Error("dimension_mismatch", "initial state vs coefficients");

  using T = detail::DoPri;
  const Eigen::Index n = mc.dim();
  Trajectory traj;
  traj.times = t_grid;
  traj.states.reserve(t_grid.size());

  GaussianMomentState s0 = state0;
  s0.sigma = sym(s0.sigma);
  CVec y = detail::pack(s0);
  traj.states.push_back(s0);

  double t = 0.0;
  CVec k[7];
  k[0] = detail::packed_rhs(y, n, mc);
  double h = 0.0;
  {
    // initial step from derivative scale
    const double y_scale = cfg.abs_tol + cfg.rel_tol * y.cwiseAbs().maxCoeff();
    const double f_scale = k[0].cwiseAbs().maxCoeff();
    h = f_scale > 0.0 ? 0.01 * std::max(y_scale / cfg.rel_tol, 1e-6) / f_scale : 0.1;
    h = std::clamp(h, 1e-8, 1.0);
  }
  double err_prev = 1e-4;

  for (std::size_t gi = 1; gi < t_grid.size(); ++gi) {
    const double t_target = t_grid[gi];
    while (t < t_target) {
      double step = std::min(h, t_target - t);
      if (cfg.max_step > 0.0) step = std::min(step, cfg.max_step);
      const bool lands = (t + step >= t_target) || (t_target - (t + step) < 1e-14 * std::max(1.0, t_target));
      if (lands) step = t_target - t;
      if (step < 1e-14 * std::max(1.0, std::abs(t)))
        throw Error("tolerance_failure", "step size underflow at t=" + std::to_string(t));

      for (int st = 1; st < 7; ++st) {
        CVec yi = y;
        for (int j = 0; j < st; ++j) {
          if (T::a[st][j] != 0.0) yi += (step * T::a[st][j]) * k[j];
        }
        k[st] = detail::packed_rhs(yi, n, mc);
      }
      CVec y_new = y;
      for (int j = 0; j < 6; ++j) {
        if (T::b[j] != 0.0) y_new += (step * T::b[j]) * k[j];
      }
      CVec err = CVec::Zero(y.size());
      for (int j = 0; j < 7; ++j) {
        if (T::e[j] != 0.0) err += (step * T::e[j]) * k[j];
      }
      double err_norm = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y(i)), std::abs(y_new(i)));
        err_norm = std::max(err_norm, std::abs(err(i)) / sc);
      }
      if (!std::isfinite(err_norm)) err_norm = 1e10;

      if (err_norm <= 1.0) {
        t = lands ? t_target : t + step;
        // re-symmetrize sigma and record the drift
        Eigen::Map<CMat> sig(y_new.data(), n, n);
        traj.max_asymmetry = std::max(traj.max_asymmetry, max_abs(sig - sig.transpose()));
        sig = sym(CMat(sig));
        y = std::move(y_new);
        ++traj.steps_accepted;
        if (y.cwiseAbs().maxCoeff() > cfg.blowup_norm)
          throw Error("riccati_blowup", "state norm exceeded " + std::to_string(cfg.blowup_norm) +
                                            " at t=" + std::to_string(t));
        k[0] = detail::packed_rhs(y, n, mc);
        // PI step-size control
        const double fac = err_norm == 0.0 ? 5.0
                                           : std::clamp(0.9 * std::pow(err_norm, -0.7 / 5.0) *
                                                            std::pow(err_prev, 0.4 / 5.0),
                                                        0.2, 5.0);
        err_prev = std::max(err_norm, 1e-4);
        if (!lands || step >= h) h = step * fac;
      } else {
        ++traj.steps_rejected;
        h = step * std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
      }
    }
    traj.states.push_back(detail::unpack(y, n));
  }
  return traj;
}

inline GaussianMomentState evolve_to(const GaussianMomentState& state0, const MomentCoefficients& mc, double t,
                                     const IntegratorConfig& cfg = {}) {
  if (t == 0.0) return state0;
  return evolve(state0, mc, {0.0, t}, cfg).back();
}

struct SteadyStateConfig {
  IntegratorConfig integrator{};
  double settle_tol = 1e-12;  // integrate until |sigma'|_F < settle_tol |sigma|_F
  double max_time = 1e4;
  double residual_tol = 1e-10;
  int newton_max_iter = 60;
};

struct SteadyState {
  CMat sigma;
  CVec d;
  cplx xi_rate{0.0, 0.0};
  double residual = 0.0;
};

namespace detail {

// Newton on R(sigma) = sigma Q sigma + A sigma + sigma A^T + D. Returns
// nullopt when the iteration fails to reach the residual tolerance.
inline std::optional<CMat> riccati_newton(CMat sigma, const MomentCoefficients& mc, const SteadyStateConfig& cfg) {
  const double scale = 1.0 + mc.D.norm() + mc.A.norm();
  double best = riccati_residual(sigma, mc).norm();
  for (int it = 0; it < cfg.newton_max_iter; ++it) {
    const CMat r = riccati_residual(sigma, mc);
    const CMat m = mc.A + sigma * mc.Q;
    CMat delta;
    try {
      delta = solve_sylvester(m, m.transpose(), -r);
    } catch (const Error&) {
      return std::nullopt;
    }
    const CMat next = sym(CMat(sigma + delta));
    if (!next.allFinite()) return std::nullopt;
    const double res = riccati_residual(next, mc).norm();
    sigma = next;
    if (delta.norm() <= 1e-15 * (1.0 + sigma.norm()) || (res >= best && res < cfg.residual_tol)) break;
    best = std::min(best, res);
    if (res > 1e6 * scale * (1.0 + sigma.norm())) return std::nullopt;
  }
  if (!(riccati_residual(sigma, mc).norm() < cfg.residual_tol)) return std::nullopt;
  return sigma;
}

}  // namespace detail

/// Fixed point of the moment flow. Without `guess` the covariance is
/// integrated from the vacuum until it settles and then polished by Newton;
/// with `guess` Newton starts there and integration is the fallback.
inline SteadyState steady_state(const MomentCoefficients& mc, const SteadyStateConfig& cfg = {},
                                const std::optional<CMat>& guess = std::nullopt) {
  const Eigen::Index n = mc.dim();
  std::optional<CMat> sigma;
  if (guess) sigma = detail::riccati_newton(*guess, mc, cfg);

  if (!sigma) {
    // Integrate the covariance only; d and xi do not feed back into sigma.
    MomentCoefficients cov_only = mc;
    cov_only.a.setZero();
    cov_only.c.setZero();
    GaussianMomentState s = GaussianMomentState::vacuum(mc.n_modes);
    double t = 0.0;
    double chunk = 1.0;
    bool settled = false;
    try {
      while (t < cfg.max_time) {
        s = evolve_to(s, cov_only, chunk, cfg.integrator);
        s.xi = 0.0;
        s.d.setZero();
        t += chunk;
        const double rate = riccati_residual(s.sigma, mc).norm();
        if (rate < cfg.settle_tol * s.sigma.norm()) {
          settled = true;
          break;
        }
        // once close, Newton converges quadratically
        if (rate < 1e-6 * s.sigma.norm()) {
          if (auto polished = detail::riccati_newton(s.sigma, mc, cfg)) {
            sigma = polished;
            break;
          }
        }
        chunk = std::min(2.0 * chunk, 64.0);
      }
    } catch (const Error& e) {
      throw Error("no_steady_state", std::string("covariance flow failed: ") + e.what());
    }
    if (!sigma) {
      if (!settled) throw Error("no_steady_state", "covariance did not settle by t=" + std::to_string(cfg.max_time));
      sigma = detail::riccati_newton(s.sigma, mc, cfg);
      if (!sigma) throw Error("no_steady_state", "Newton polish failed to reach residual tolerance");
    }
  }

  SteadyState out;
  out.sigma = *sigma;
  out.residual = riccati_residual(out.sigma, mc).norm();
  const CMat om = omega(mc.n_modes).cast<cplx>();
  const CMat m = mc.A + out.sigma * mc.Q;
  const CVec b = out.sigma * (om * mc.a) - kI * mc.c;
  if (b.norm() == 0.0) {
    out.d = CVec::Zero(n);
  } else {
    Eigen::FullPivLU<CMat> lu(m);
    if (lu.rank() < n || lu.rcond() < 1e-13) throw Error("singular_linear_solve", "A + sigma Q is singular");
    out.d = lu.solve(b);
  }
  out.xi_rate = xi_rate(out.sigma, out.d, mc);
  return out;
}

}  // namespace gme
