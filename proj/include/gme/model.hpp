#pragma once

#include "gme/types.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>

namespace gme {

/// Concrete arrays of a quadratic model evaluated at one parameter value.
struct ModelPoint {
  RMat hamiltonian;        // 2n x 2n, symmetric
  RVec drive;              // 2n
  CMat jumps_monitored;    // N_mon x 2n
  CMat jumps_unmonitored;  // N_unm x 2n

  int dim() const { return static_cast<int>(hamiltonian.rows()); }

  /// Monitored rows stacked above unmonitored rows.
  CMat all_jumps() const {
    CMat all(jumps_monitored.rows() + jumps_unmonitored.rows(), dim());
    all << jumps_monitored, jumps_unmonitored;
    return all;
  }
};

/// Parametrized family theta -> (H, h, L_mon, L_unm) of a quadratic bosonic
/// model. The evaluation maps must be pure; the model is immutable.
class QuadraticModel {
 public:
  using MatrixMap = std::function<RMat(double)>;
  using VectorMap = std::function<RVec(double)>;
  using JumpMap = std::function<CMat(double)>;

  QuadraticModel(std::string name, int n_modes, MatrixMap hamiltonian, VectorMap drive, JumpMap monitored,
                 JumpMap unmonitored)
      : name_(std::move(name)),
        n_modes_(n_modes),
        hamiltonian_(std::move(hamiltonian)),
        drive_(std::move(drive)),
        monitored_(std::move(monitored)),
        unmonitored_(std::move(unmonitored)) {
    if (n_modes_ <= 0) throw Error("invalid_model", "n_modes must be positive");
    (void)at(0.0);
  }

  const std::string& name() const { return name_; }
  int n_modes() const { return n_modes_; }
  int dim() const { return 2 * n_modes_; }

  ModelPoint at(double theta) const {
    ModelPoint p{hamiltonian_(theta), drive_(theta), monitored_(theta), unmonitored_(theta)};
    const int d = dim();
    if (p.hamiltonian.rows() != d || p.hamiltonian.cols() != d)
      throw Error("invalid_model", "hamiltonian must be " + std::to_string(d) + "x" + std::to_string(d));
    if (p.drive.size() != d) throw Error("invalid_model", "drive must have length " + std::to_string(d));
    if (p.jumps_monitored.cols() != d || p.jumps_unmonitored.cols() != d)
      throw Error("invalid_model", "jump rows must have length " + std::to_string(d));
    if (!p.hamiltonian.allFinite() || !p.drive.allFinite() || !p.jumps_monitored.allFinite() ||
        !p.jumps_unmonitored.allFinite())
      throw Error("invalid_model", "model '" + name_ + "' undefined at theta=" + std::to_string(theta));
    const double asym = max_abs(p.hamiltonian - p.hamiltonian.transpose());
    if (asym > 1e-12) throw Error("asymmetric_hamiltonian", "asymmetry " + std::to_string(asym));
    p.hamiltonian = sym(p.hamiltonian);
    return p;
  }

  int n_monitored() const { return static_cast<int>(monitored_(0.0).rows()); }
  int n_unmonitored() const { return static_cast<int>(unmonitored_(0.0).rows()); }

 private:
  std::string name_;
  int n_modes_;
  MatrixMap hamiltonian_;
  VectorMap drive_;
  JumpMap monitored_;
  JumpMap unmonitored_;
};

inline ModelPoint model_at(const QuadraticModel& model, double theta) { return model.at(theta); }

/// Degenerate optical parametric oscillator, single mode. theta shifts the
/// detuning: H(theta) = [[w+theta, -chi], [-chi, w+theta]]. Monitored jump
/// sqrt(eta*kappa) a, unmonitored sqrt((1-eta)*kappa) a, with a = (x+ip)/sqrt2.
inline QuadraticModel opo_model(double omega_det, double chi, double kappa, double eta = 1.0) {
  if (!(kappa > 0.0)) throw Error("invalid_parameter", "kappa must be > 0");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error("invalid_parameter", "eta must lie in [0,1]");
  const CMat a_row = (CMat(1, 2) << cplx(1.0, 0.0), kI).finished();
  const CMat mon = std::sqrt(eta * kappa / 2.0) * a_row;
  const CMat unm = eta < 1.0 ? CMat(std::sqrt((1.0 - eta) * kappa / 2.0) * a_row) : CMat(0, 2);
  return QuadraticModel(
      "opo", 1,
      [=](double theta) {
        const double w = omega_det + theta;
        return (RMat(2, 2) << w, -chi, -chi, w).finished();
      },
      [](double) { return RVec::Zero(2).eval(); }, [mon](double) { return mon; }, [unm](double) { return unm; });
}

/// Wraps `base` at `theta0` into the family H -> (1+theta) H, h -> (1+theta) h,
/// L -> sqrt(1+theta) L. Defined for theta > -1.
inline QuadraticModel tur_deformed(const QuadraticModel& base, double theta0 = 0.0) {
  const ModelPoint p = base.at(theta0);
  auto scale = [](double theta) {
    if (!(theta > -1.0)) return std::nan("");
    return 1.0 + theta;
  };
  return QuadraticModel(
      base.name() + "-tur-deformed", base.n_modes(),
      [p, scale](double theta) { return (scale(theta) * p.hamiltonian).eval(); },
      [p, scale](double theta) { return (scale(theta) * p.drive).eval(); },
      [p, scale](double theta) { return (std::sqrt(scale(theta)) * p.jumps_monitored).eval(); },
      [p, scale](double theta) { return (std::sqrt(scale(theta)) * p.jumps_unmonitored).eval(); });
}

}  // namespace gme
