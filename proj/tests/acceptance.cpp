// Acceptance run: one PASS/FAIL line per criterion. Reference values come from
// closed forms or the truncated Fock-space oracle, never from the moment code.
#include "gme/fcs.hpp"
#include "gme/metrology.hpp"
#include "gme/oracle/fock.hpp"
#include "gme/replica.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

using namespace gme;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double time_limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0 && secs > time_limit_s) {
    v.pass = false;
    v.detail += "; runtime over " + std::to_string(time_limit_s) + " s";
  }
  if (!v.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

FDConfig quiet() {
  FDConfig fd;
  fd.on_warning = nullptr;
  return fd;
}

double qfi_rate_exact(double k, double c) { return 8 * k * c * c * (5 * k * k - 4 * c * c) / std::pow(k * k - 4 * c * c, 3); }

cplx scgf_exact(double k, double c, double lam) {
  const cplx e = std::exp(kI * lam);
  return -0.25 * (std::sqrt(k * k + 4.0 * k * e * c + 4.0 * c * c) + std::sqrt(k * k - 4.0 * k * e * c + 4.0 * c * c) -
                  2.0 * k);
}

double current_exact(double k, double c) { return 2 * k * c * c / (k * k - 4 * c * c); }
double noise_exact(double k, double c) {
  return 4 * k * c * c * (std::pow(k, 4) + 2 * k * k * c * c + 8 * std::pow(c, 4)) / std::pow(k * k - 4 * c * c, 3);
}
double skew_exact(double k, double c) {
  const double k2 = k * k, c2 = c * c;
  return 8 * k * c2 *
         (std::pow(k2, 4) + 14 * std::pow(k2, 3) * c2 + 84 * k2 * k2 * c2 * c2 + 128 * k2 * std::pow(c2, 3) +
          64 * std::pow(c2, 4)) /
         std::pow(k2 - 4 * c2, 5);
}

// OPO with a coherent drive so first moments are nontrivial
QuadraticModel driven_opo(double eta) {
  const auto base = opo_model(0.3, 0.2, 1.0, eta);
  return QuadraticModel(
      "driven-opo", 1, [base](double th) { return base.at(th).hamiltonian; },
      [](double th) { return (RVec(2) << 0.25 + th, -0.15).finished(); },
      [base](double th) { return base.at(th).jumps_monitored; },
      [base](double th) { return base.at(th).jumps_unmonitored; });
}

struct Gap {
  double trace = 0, d = 0, sigma = 0;
};

Gap moment_gap(const GaussianMomentState& s, const oracle::TruncatedOperator& mu) {
  const auto m = oracle::moments_from_operator(mu);
  return {std::abs(m.trace - s.trace()), max_abs(CVec(m.d - s.d)), max_abs(CMat(m.sigma - s.sigma))};
}

}  // namespace

int main() {
  const double pi = std::numbers::pi;

  criterion(1, "Lindblad reduction", 1.0, [] {
    const double kappa = 1.0, chi = 0.2;
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(0.1 * i);
    const auto mc = coefficients_from_generator(lindblad_generator(opo_model(0.5, chi, kappa), 0.0));
    const Trajectory tr = evolve(GaussianMomentState::vacuum(1), mc, grid);
    double max_xi = 0;
    for (const auto& s : tr.states) max_xi = std::max(max_xi, std::abs(s.xi));
    const auto mc0 = coefficients_from_generator(lindblad_generator(opo_model(0.0, chi, kappa), 0.0));
    const CMat s20 = evolve_to(GaussianMomentState::vacuum(1), mc0, 20.0).sigma;
    CMat expect = CMat::Zero(2, 2);
    expect(0, 0) = kappa / (kappa + 2 * chi);
    expect(1, 1) = kappa / (kappa - 2 * chi);
    const double gap = max_abs(CMat(s20 - expect));
    // exact relaxation sigma_ii(t) = s_i + (1 - s_i) e^{-r_i t}, r = kappa +- 2 chi
    CMat exact = expect;
    exact(0, 0) += (1.0 - expect(0, 0).real()) * std::exp(-(kappa + 2 * chi) * 20.0);
    exact(1, 1) += (1.0 - expect(1, 1).real()) * std::exp(-(kappa - 2 * chi) * 20.0);
    const double gap_t = max_abs(CMat(s20 - exact));
    return Verdict{max_xi < 1e-9 && gap < 1e-8, "max|xi| = " + fmt("%.2e", max_xi) + ", |sigma(20) - Lyapunov| = " +
                                                    fmt("%.2e", gap) + ", |sigma(20) - exact relaxation| = " +
                                                    fmt("%.2e", gap_t)};
  });

  criterion(2, "Steady joint QFI rate vs closed form", 10.0, [] {
    FDConfig fd = quiet();
    fd.richardson = true;
    double worst = 0;
    std::string detail;
    for (double chi : {0.1, 0.2, 0.3, 0.4}) {
      const double q = joint_qfi_rate(opo_model(0.0, chi, 1.0), 0.0, fd);
      worst = std::max(worst, rel(q, qfi_rate_exact(1.0, chi)));
      detail += fmt("%.6g", q) + "/" + fmt("%.6g", qfi_rate_exact(1.0, chi)) + " ";
    }
    return Verdict{worst < 1e-4, detail + "worst rel " + fmt("%.2e", worst)};
  });

  criterion(3, "SCGF vs closed form", 10.0, [pi] {
    const auto model = opo_model(0.0, 0.2, 1.0);
    std::vector<double> lams;
    for (int i = 0; i <= 64; ++i) lams.push_back(-pi + 2 * pi * i / 64.0);
    lams.back() = pi;
    const auto pts = scgf_sweep(model, 0.0, CountingSpec{{1.0}}, lams);
    double worst = 0;
    bool all_ok = true;
    for (const auto& p : pts) {
      all_ok = all_ok && p.ok;
      worst = std::max(worst, std::abs(p.value - scgf_exact(1.0, 0.2, p.lambda)));
    }
    const double c0 = std::abs(scgf(model, 0.0, CountingSpec{{1.0}}, 0.0));
    const double cpi = std::abs(pts.back().value);
    return Verdict{all_ok && worst < 1e-8 && c0 < 1e-10 && cpi < 1e-10,
                   "max gap " + fmt("%.2e", worst) + ", |C(0)| = " + fmt("%.1e", c0) + ", |C(pi)| = " + fmt("%.1e", cpi)};
  });

  criterion(4, "Cumulants J, D, S", 5.0, [] {
    const auto c = cumulants(opo_model(0.0, 0.2, 1.0), 0.0, CountingSpec{{1.0}}, quiet());
    const double ej = rel(c.J, current_exact(1, 0.2)), ed = rel(c.Dn, noise_exact(1, 0.2)),
                 es = rel(c.S, skew_exact(1, 0.2));
    return Verdict{ej < 1e-5 && ed < 1e-4 && es < 1e-3, "J = " + fmt("%.7g", c.J) + " (rel " + fmt("%.1e", ej) +
                                                              "), D = " + fmt("%.7g", c.Dn) + " (rel " +
                                                              fmt("%.1e", ed) + "), S = " + fmt("%.6g", c.S) +
                                                              " (rel " + fmt("%.1e", es) + ")"};
  });

  criterion(5, "TUR on chi/kappa in [0.02, 0.45]", 60.0, [] {
    std::vector<double> grid;
    for (int i = 0; i < 44; ++i) grid.push_back(0.02 + 0.01 * i);
    const auto rows = tur_check([](double chi) { return opo_model(0.0, chi, 1.0); }, 0.0, CountingSpec{{1.0}}, grid,
                                quiet());
    bool ok = rows.size() == 44;
    double worst_f = 0, min_slack = 1e300;
    for (const auto& r : rows) {
      ok = ok && r.ok && r.slack >= 0;
      min_slack = std::min(min_slack, r.slack);
      worst_f = std::max(worst_f, rel(r.inv_f, 1.0 / (2 * r.grid_value * r.grid_value)));
    }
    const double ratio = rows.front().D_over_J2 / rows.front().inv_f;
    ok = ok && worst_f < 1e-4 && std::abs(ratio - 2.0) < 0.05;
    return Verdict{ok, "min slack " + fmt("%.4g", min_slack) + ", worst 1/f rel " + fmt("%.1e", worst_f) +
                           ", (D/J^2) f at 0.02 = " + fmt("%.4f", ratio)};
  });

  criterion(6, "Trace-norm fidelity formula", 60.0, [] {
    double worst_phys = 0;
    const RMat thermal = 3.0 * RMat::Identity(2, 2);
    const RVec shift = (RVec(2) << 0.7, -1.2).finished();
    for (const auto& s : {GaussianMomentState::vacuum(1), GaussianMomentState::physical(thermal, RVec::Zero(2)),
                          GaussianMomentState::physical(thermal, shift)})
      worst_phys = std::max(worst_phys, std::abs(env_fidelity(s) - 1.0));
    const auto model = opo_model(0.0, 0.2, 1.0);
    const auto g = tsme_generator(model, 0.0, 0.1);
    const auto mc = coefficients_from_generator(g);
    double worst_oracle = 0;
    for (double t : {0.5, 1.0, 2.0}) {
      const auto mu = oracle::evolve_truncated(g, oracle::TruncatedOperator::vacuum(25, 1), t);
      const auto s = evolve_to(GaussianMomentState::vacuum(1), mc, t);
      worst_oracle = std::max(worst_oracle, std::abs(env_fidelity(s) - oracle::trace_norm_truncated(mu)));
    }
    return Verdict{worst_phys < 1e-10 && worst_oracle < 1e-4,
                   "physical " + fmt("%.1e", worst_phys) + ", vs oracle " + fmt("%.1e", worst_oracle)};
  });

  criterion(7, "Fock-oracle equivalence", 300.0, [] {
    const auto model = driven_opo(0.6);
    const auto r = oracle::build_quadrature_ops(25, 1);
    const auto ops = oracle::model_operators(model.at(0.0), r);
    const auto vac = oracle::TruncatedOperator::vacuum(25, 1);
    const double t = 2.0;
    struct Case {
      const char* name;
      GeneratorSpec g;
      oracle::Superoperator f;
    };
    std::vector<Case> cases;
    cases.push_back({"lindblad", lindblad_generator(model, 0.0), oracle::lindblad_action(ops)});
    cases.push_back({"tsme", tsme_generator(model, 0.0, 0.2),
                     oracle::tsme_action(ops, oracle::model_operators(model.at(0.2), r))});
    cases.push_back({"tilted-jump", tilted_jump_generator(model, 0.0, CountingSpec{{1.0}}, 1.3),
                     oracle::tilted_jump_action(ops, {1.0}, 1.3)});
    cases.push_back({"tilted-diffusive", tilted_diffusive_generator(model, 0.0, DiffusiveSpec{{1.0}, {0.6}}, 0.4),
                     oracle::tilted_diffusive_action(ops, {1.0}, {0.6}, 0.4)});
    Gap worst;
    std::string detail;
    auto absorb = [&](const char* name, const Gap& g) {
      worst.trace = std::max(worst.trace, g.trace);
      worst.d = std::max(worst.d, g.d);
      worst.sigma = std::max(worst.sigma, g.sigma);
      detail += std::string(name) + " " + fmt("%.0e", std::max({g.trace, g.d, g.sigma})) + "; ";
    };
    for (const auto& c : cases) {
      const auto mu = oracle::evolve_superoperator(c.f, vac, t);
      const auto s = evolve_to(GaussianMomentState::vacuum(1), coefficients_from_generator(c.g), t);
      absorb(c.name, moment_gap(s, mu));
    }
    oracle::OracleConfig cfg;
    cfg.dim_per_mode = 14;
    const auto g2 = replica_generator(model, {0.1, -0.1});
    const double t2 = 1.0;
    const auto mu2 = oracle::evolve_truncated(g2, oracle::TruncatedOperator::vacuum(14, 2), t2, cfg);
    const auto s2 = evolve_to(GaussianMomentState::vacuum(2), coefficients_from_generator(g2), t2);
    absorb("2-replica", moment_gap(s2, mu2));
    return Verdict{worst.trace < 1e-5 && worst.d < 1e-4 && worst.sigma < 1e-4, detail};
  });

  criterion(8, "Environment vs joint QFI (ordering, t=20 rate agreement)", 0.0, [] {
    const auto model = opo_model(0.0, 0.2, 1.0);
    const std::vector<double> grid{0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
    const auto joint = joint_qfi_series(model, 0.0, grid, quiet());
    const auto env = env_qfi_series(model, 0.0, grid, quiet());
    bool ordered = true;
    for (std::size_t i = 1; i < grid.size(); ++i) ordered = ordered && env[i] <= joint[i];
    const double gap = rel(env.back() / 20.0, joint.back() / 20.0);
    return Verdict{ordered && gap < 0.05, std::string("env <= joint at all t: ") + (ordered ? "yes" : "no") +
                                              ", t=20 rates " + fmt("%.5g", env.back() / 20) + " vs " +
                                              fmt("%.5g", joint.back() / 20) + " (rel gap " + fmt("%.3f", gap) + ")"};
  });

  criterion(9, "Replica approximants", 600.0, [] {
    const FDConfig fd = quiet();
    const auto lossy = opo_model(0.0, 0.2, 1.0, 0.5);
    const auto pure = opo_model(0.0, 0.2, 1.0, 1.0);
    bool ok = true;
    std::string detail;
    for (double t : {0.5, 1.0, 2.0}) {
      const auto res = replica_qfi_series(lossy, 0.0, t, 10, fd);
      const double q5 = res.approximants[5] / t, q10 = res.approximants[10] / t;
      const double bound = joint_qfi(pure, 0.0, t, fd) / t;
      ok = ok && q5 <= q10 && q10 <= bound;
      detail += "t=" + fmt("%g", t) + ": Q5/t " + fmt("%.4g", q5) + " <= Q10/t " + fmt("%.4g", q10) + " <= " +
                fmt("%.4g", bound) + "; ";
    }
    const double q20 = replica_qfi_approximant(pure, 0.0, 1.0, 20, fd);
    const double env = env_qfi(pure, 0.0, 1.0, fd);
    const double gap = (q20 - env) / env;
    ok = ok && std::abs(gap) < 0.02;
    detail += "eta=1 t=1: Q20 " + fmt("%.5g", q20) + " vs env " + fmt("%.5g", env) + " (rel " + fmt("%+.4f", gap) + ")";
    return Verdict{ok, detail};
  });

  criterion(10, "D_l^m table", 1.0, [] {
    // Pascal's triangle by addition, independent of the library binomial
    std::vector<std::vector<long>> pascal{{1}};
    for (int m = 1; m <= 7; ++m) {
      std::vector<long> row(m + 1, 1);
      for (int k = 1; k < m; ++k) row[k] = pascal[m - 1][k - 1] + pascal[m - 1][k];
      pascal.push_back(row);
    }
    auto c = [&](int m, int l) { return (l < 0 || l > m) ? 0L : pascal[m][l]; };
    bool ok = true;
    for (int m = 0; m <= 6; ++m) {
      long sum = 0;
      for (int l = 0; l <= m; ++l) {
        const long expect = 2 * c(m, l) - c(m, l + 1) - c(m, l - 1);
        ok = ok && dlm_coefficient(m, l) == expect;
        sum += dlm_coefficient(m, l);
      }
      ok = ok && sum == 2;
    }
    return Verdict{ok, "m <= 6 exact, rows sum to 2"};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
