#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace magfilm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Voigt6 = Eigen::Matrix<double, 6, 1>;

/// Engineering Voigt vector of a symmetric 2x2 matrix: (e11, e22, 2 e12).
using Voigt3 = Eigen::Vector3d;

/// Rejected input: violated precondition or invariant of a model object.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solver ran out of iterations.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Film thickness h in (0, 1], or the symbolic thin-film limit h -> 0+.
class Thickness {
 public:
  static Thickness limit() { return Thickness(0.0, true); }
  static Thickness of(double h) {
    if (!(h > 0.0 && h <= 1.0)) {
      throw ModelError("thickness must lie in (0, 1], got " + std::to_string(h));
    }
    return Thickness(h, false);
  }

  bool is_limit() const { return limit_; }
  /// Finite thickness; throws for the limit value.
  double value() const {
    if (limit_) throw ModelError("thickness is the thin-film limit, no finite value");
    return h_;
  }

  friend bool operator==(const Thickness& a, const Thickness& b) {
    return a.limit_ == b.limit_ && a.h_ == b.h_;
  }

 private:
  Thickness(double h, bool limit) : h_(h), limit_(limit) {}
  double h_;
  bool limit_;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Engineering Voigt strain (e11, e22, e33, 2e23, 2e13, 2e12) of a symmetric matrix.
inline Voigt6 to_voigt_strain(const Mat3& e) {
  Voigt6 v;
  v << e(0, 0), e(1, 1), e(2, 2), e(1, 2) + e(2, 1), e(0, 2) + e(2, 0), e(0, 1) + e(1, 0);
  return v;
}

/// Stress-convention Voigt (s11, s22, s33, s23, s13, s12) back to a symmetric matrix.
inline Mat3 from_voigt_stress(const Voigt6& s) {
  Mat3 m;
  m << s(0), s(5), s(4), s(5), s(1), s(3), s(4), s(3), s(2);
  return m;
}

inline Voigt3 to_voigt_strain2(const Eigen::Matrix2d& a) {
  return Voigt3(a(0, 0), a(1, 1), a(0, 1) + a(1, 0));
}

}  // namespace magfilm
