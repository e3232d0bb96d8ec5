#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace gme {

using cplx = std::complex<double>;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Numerical or contract failure. `code()` is a stable machine-readable tag
/// such as "riccati_blowup" or "no_steady_state"; what() adds context.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

template <typename Derived>
auto sym(const Eigen::MatrixBase<Derived>& m) {
  return ((m + m.transpose()) * 0.5).eval();
}

template <typename Derived>
auto skew(const Eigen::MatrixBase<Derived>& m) {
  return ((m - m.transpose()) * 0.5).eval();
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace gme
