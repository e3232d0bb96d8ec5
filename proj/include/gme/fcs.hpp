#pragma once

#include "gme/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace gme {

struct CumulantReport {
  double J = 0.0;   // average current
  double Dn = 0.0;  // noise (variance rate)
  double S = 0.0;   // skewness rate
  double lambda_step = 0.0;
};

struct ScgfPoint {
  double lambda = 0.0;
  cplx value{0.0, 0.0};
  bool ok = false;
  std::string error;
};

/// SCGF C(lambda) = -xi'_ss(lambda) on a grid. Steady states are continued in
/// lambda from the untilted one, in sub-steps of at most `max_increment`, so
/// every grid point sits on the branch connected to lambda = 0. Once a point
/// fails, points further out on the same side are reported failed too.
inline std::vector<ScgfPoint> scgf_sweep(const QuadraticModel& model, double theta, const CountingSpec& counting,
                                         const std::vector<double>& lambdas, const SteadyStateConfig& cfg = {},
                                         double max_increment = 0.05) {
  std::vector<ScgfPoint> out(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) out[i].lambda = lambdas[i];

  auto coeffs_at = [&](double lam) {
    return coefficients_from_generator(tilted_jump_generator(model, theta, counting, lam));
  };
  const SteadyState base = steady_state(coeffs_at(0.0), cfg);

  std::vector<std::size_t> order(lambdas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int side : {+1, -1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i : order) {
      if ((side > 0 && lambdas[i] >= 0.0) || (side < 0 && lambdas[i] < 0.0)) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(lambdas[a]) < std::abs(lambdas[b]);
    });
    CMat sigma = base.sigma;
    double lam = 0.0;
    std::string failure;
    for (std::size_t i : idx) {
      if (!failure.empty()) {
        out[i].error = failure;
        continue;
      }
      try {
        const double target = lambdas[i];
        const int sub = std::max(1, static_cast<int>(std::ceil(std::abs(target - lam) / max_increment)));
        const double start = lam;
        SteadyState ss = base;
        if (target == 0.0) {
          ss = base;
        } else {
          for (int k = 1; k <= sub; ++k) {
            const double l = start + (target - start) * k / sub;
            ss = steady_state(coeffs_at(l), cfg, sigma);
            sigma = ss.sigma;
          }
        }
        lam = target;
        out[i].value = -ss.xi_rate;
        out[i].ok = true;
      } catch (const Error& e) {
        failure = e.what();
        out[i].error = failure;
      }
    }
  }
  return out;
}

inline cplx scgf(const QuadraticModel& model, double theta, const CountingSpec& counting, double lambda,
                 const SteadyStateConfig& cfg = {}) {
  const auto pts = scgf_sweep(model, theta, counting, {lambda}, cfg);
  if (!pts.front().ok) throw Error("no_steady_state", pts.front().error);
  return pts.front().value;
}

/// Current, noise and skewness from central differences of the SCGF at 0:
/// J = -i C', D = -C'', S = i C'''. J and D use 5-point stencils on the
/// points +-h, +-2h that S needs anyway.
inline CumulantReport cumulants(const QuadraticModel& model, double theta, const CountingSpec& counting,
                                const FDConfig& fd = {}, const SteadyStateConfig& cfg = {}) {
  detail::require_step(fd.lambda_step);
  const double h0 = std::abs(fd.lambda_step);
  auto estimate = [&](double h) {
    const auto pts = scgf_sweep(model, theta, counting, {-2 * h, -h, h, 2 * h}, cfg, h);
    for (const auto& p : pts) {
      if (!p.ok) throw Error("no_steady_state", p.error);
    }
    const cplx cm2 = pts[0].value, cm1 = pts[1].value, cp1 = pts[2].value, cp2 = pts[3].value;
    const cplx d1 = (cp1 - cm1) / (2 * h);
    const cplx d1_5 = (-cp2 + 8.0 * cp1 - 8.0 * cm1 + cm2) / (12 * h);
    // C(0) = 0; the 5-point form keeps truncation small near chi -> kappa/2
    const cplx d2 = (-cp2 + 16.0 * cp1 + 16.0 * cm1 - cm2) / (12 * h * h);
    const cplx d3 = (cp2 - 2.0 * cp1 + 2.0 * cm1 - cm2) / (2 * h * h * h);
    const double j3 = (-kI * d1).real();
    const double j5 = (-kI * d1_5).real();
    if (std::abs(j3 - j5) > 1e-3 * std::max(std::abs(j5), 1e-12))
      fd.warn("cumulants: 3- and 5-point current estimates disagree beyond 1e-3");
    return std::vector<double>{j5, (-d2).real(), (kI * d3).real()};
  };
  const auto v = detail::richardson(fd, h0, estimate, "cumulants");
  return {v[0], v[1], v[2], h0};
}

struct CountDistribution {
  std::vector<double> p;
  double normalization_defect = 0.0;
  double max_imag = 0.0;
};

/// P(n, t) for n = 0..n_max by discrete Fourier inversion of
/// phi(lambda, t) = e^{-xi(lambda, t)} sampled on a uniform grid over [-pi, pi).
inline CountDistribution count_distribution(const QuadraticModel& model, double theta, const CountingSpec& counting,
                                            double t, int n_max, int lambda_points = 256,
                                            const IntegratorConfig& cfg = {},
                                            std::optional<GaussianMomentState> initial = std::nullopt) {
  for (double w : counting.weights) {
    if (w != std::round(w)) throw Error("non_integer_weights", "count distribution needs integer weights");
  }
  if (n_max < 0 || n_max >= lambda_points) throw Error("invalid_parameter", "need 0 <= n_max < lambda_points");
  if (!std::isfinite(t) || t < 0.0) throw Error("invalid_parameter", "t must be finite and nonnegative");
  const GaussianMomentState init = initial.value_or(GaussianMomentState::vacuum(model.n_modes()));
  const double pi = std::numbers::pi;
  std::vector<cplx> phi(lambda_points);
  std::vector<double> lam(lambda_points);
  for (int j = 0; j < lambda_points; ++j) {
    lam[j] = -pi + 2.0 * pi * j / lambda_points;
    const auto mc = coefficients_from_generator(tilted_jump_generator(model, theta, counting, lam[j]));
    phi[j] = evolve_to(init, mc, t, cfg).trace();
  }
  CountDistribution out;
  out.p.resize(n_max + 1);
  double total = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    cplx acc = 0.0;
    for (int j = 0; j < lambda_points; ++j) acc += std::exp(-kI * (n * lam[j])) * phi[j];
    acc /= static_cast<double>(lambda_points);
    out.max_imag = std::max(out.max_imag, std::abs(acc.imag()));
    out.p[n] = std::max(acc.real(), 0.0);
    total += out.p[n];
  }
  if (out.max_imag > 1e-8)
    throw Error("complex_probability", "imaginary residue " + std::to_string(out.max_imag) + " exceeds 1e-8");
  if (out.p[n_max] > 1e-6)
    throw Error("grid_too_coarse", "P(n_max) = " + std::to_string(out.p[n_max]) + "; increase n_max/lambda_points");
  out.normalization_defect = std::abs(total - 1.0);
  return out;
}

/// Joint QFI rate for the deformation H -> (1+theta) H, J -> sqrt(1+theta) J
/// around `theta`; the right-hand side of the TUR D/J^2 >= 1/f.
inline double tur_rate_f(const QuadraticModel& model, double theta, const FDConfig& fd = {},
                         const SteadyStateConfig& cfg = {}) {
  return joint_qfi_rate(tur_deformed(model, theta), 0.0, fd, cfg);
}

struct TurRow {
  double grid_value = 0.0;
  double D_over_J2 = 0.0;
  double inv_f = 0.0;
  double slack = 0.0;
  bool ok = false;
  std::string error;
};

/// Evaluates both sides of the TUR at each grid point; `factory` builds the
/// model for a grid value. Failed points are reported, not thrown.
template <typename Factory>
std::vector<TurRow> tur_check(Factory&& factory, double theta, const CountingSpec& counting,
                              const std::vector<double>& grid, const FDConfig& fd = {},
                              const SteadyStateConfig& cfg = {}) {
  std::vector<TurRow> rows;
  rows.reserve(grid.size());
  for (double g : grid) {
    TurRow row;
    row.grid_value = g;
    try {
      const QuadraticModel model = factory(g);
      const CumulantReport c = cumulants(model, theta, counting, fd, cfg);
      const double f = tur_rate_f(model, theta, fd, cfg);
      row.D_over_J2 = c.Dn / (c.J * c.J);
      row.inv_f = 1.0 / f;
      row.slack = row.D_over_J2 - row.inv_f;
      row.ok = true;
      if (row.slack < -1e-8) {
        row.ok = false;
        row.error = "tur_violated: slack " + std::to_string(row.slack);
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gme
