#pragma once

#include "magfilm/core.hpp"

#include <span>
#include <vector>

namespace magfilm {

/// Full 3D stiffness tensor stored in Voigt form. Strains enter as engineering
/// Voigt vectors, so C:e:e == e^T voigt() e.
class ElasticityTensor {
 public:
  static ElasticityTensor isotropic(double lambda, double mu);
  /// Validates symmetry, positive definiteness and C_3333 > 0.
  static ElasticityTensor from_voigt(const Mat6& voigt);

  const Mat6& voigt() const { return c_; }
  /// Tensor component C_ijkl with 0-based indices.
  double component(int i, int j, int k, int l) const;
  double min_eigenvalue() const;

  Voigt6 stress(const Voigt6& strain) const { return c_ * strain; }
  double energy_density(const Voigt6& strain) const { return strain.dot(c_ * strain); }

 private:
  explicit ElasticityTensor(const Mat6& c) : c_(c) {}
  Mat6 c_;
};

/// Plane-reduced stiffness acting on symmetric 2x2 matrices (engineering Voigt).
struct PlaneReducedTensor {
  Eigen::Matrix3d voigt2;

  double component(int i, int j, int k, int l) const;
  double contract(const Voigt3& a, const Voigt3& b) const { return a.dot(voigt2 * b); }
};

/// Relaxes the transverse strain components (e33, e13, e23) pointwise. For tensors
/// without in-plane/shear coupling this is C_ijkl - C_ij33 C_kl33 / C_3333.
PlaneReducedTensor reduce_tensor(const ElasticityTensor& c);

struct QuadraticFormResult {
  double value = 0.0;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double b = 0.0;
};

/// min over (a, b) of C [[A, a], [a^T, b]] : [[A, a], [a^T, b]] and its minimizer.
QuadraticFormResult quadratic_form_Q(const ElasticityTensor& c, const Eigen::Matrix2d& a);

/// Magnetostrictive eigenstrain m (x) m - (m_sat^2 / 3) I.
Mat3 eps_mag(const Vec3& m, double m_sat);

inline double saturation_tolerance(double m_sat) { return 1e-8 * m_sat; }
inline constexpr double kConstraintTolerance = 1e-10;

/// Monotone nonincreasing thickness scaling f(h) of the planar anisotropy.
class ThicknessScaling {
 public:
  enum class Kind { constant, inverse, linear };

  static ThicknessScaling constant(double c);
  /// f(h) = c / h, right limit +inf.
  static ThicknessScaling inverse(double c);
  /// f(h) = a - b h with b >= 0, right limit a.
  static ThicknessScaling linear(double a, double b);

  double operator()(Thickness h) const;
  double f0() const;
  Kind kind() const { return kind_; }

 private:
  ThicknessScaling(Kind k, double p0, double p1) : kind_(k), p0_(p0), p1_(p1) {}
  Kind kind_;
  double p0_;
  double p1_;
};

/// phi_h = f(h) phi_p + phi_3 with phi_p = K_p |m_p|^2. phi_3 is uniaxial
/// K_3 (m_sat^2 - (m.s)^2), cubic K_3 sum_{i<j} (m.a_i)^2 (m.a_j)^2 / m_sat^2,
/// or uniaxial with a per-node axis table.
class AnisotropyModel {
 public:
  enum class Kind { uniaxial, cubic, tabulated };

  static AnisotropyModel uniaxial(double k_p, double k_3, const Vec3& axis, ThicknessScaling f);
  static AnisotropyModel cubic(double k_p, double k_3, const std::vector<Vec3>& axes,
                               ThicknessScaling f);
  /// One easy axis per planar node.
  static AnisotropyModel tabulated(double k_p, double k_3, std::vector<Vec3> node_axes,
                                   ThicknessScaling f);

  Kind kind() const { return kind_; }
  double k_p() const { return k_p_; }
  double k_3() const { return k_3_; }
  const ThicknessScaling& scaling() const { return f_; }
  /// Easy axes (unit vectors) at a planar node.
  std::span<const Vec3> easy_axes(std::size_t planar_node) const;

  double planar_part(const Vec3& m) const { return k_p_ * (m(0) * m(0) + m(1) * m(1)); }
  double offplane_part(std::size_t planar_node, const Vec3& m, double m_sat) const;
  Vec3 offplane_gradient(std::size_t planar_node, const Vec3& m, double m_sat) const;
  Vec3 planar_gradient(const Vec3& m) const { return Vec3(2 * k_p_ * m(0), 2 * k_p_ * m(1), 0.0); }

  /// True when the limit density imposes the hard constraint {phi_p = 0}.
  bool hard_planar_constraint(Thickness h) const {
    return h.is_limit() && std::isinf(f_.f0()) && k_p_ > 0.0;
  }

 private:
  AnisotropyModel() = default;
  Kind kind_ = Kind::uniaxial;
  double k_p_ = 0.0;
  double k_3_ = 0.0;
  std::vector<Vec3> axes_;
  ThicknessScaling f_ = ThicknessScaling::constant(1.0);
};

/// f(h) phi_p + phi_3 at finite h; f0 phi_p + phi_3 in the limit. With f0 = inf the
/// limit density is phi_3 on {phi_p <= tol} and +inf elsewhere.
double anisotropy_energy_density(const AnisotropyModel& model, Thickness h,
                                 std::size_t planar_node, const Vec3& m, double m_sat);

/// Off-plane yield R_3(h): constant, linear r0 + r1 h, or a piecewise-linear table in h.
class OffplaneYield {
 public:
  static OffplaneYield constant(double r);
  static OffplaneYield linear(double r0, double r1);
  /// Rows (h, R_3) with strictly increasing h; constant extrapolation outside.
  static OffplaneYield table(std::vector<std::pair<double, double>> rows);

  double operator()(Thickness h) const;
  double right_limit() const;

 private:
  OffplaneYield() = default;
  std::vector<std::pair<double, double>> rows_;
  double r0_ = 0.0;
  double r1_ = 0.0;
  bool tabulated_ = false;
};

struct DissipationParams {
  double r_p = 0.0;
  OffplaneYield r3 = OffplaneYield::constant(0.0);

  static DissipationParams make(double r_p, OffplaneYield r3);
  double r3_at(Thickness h) const { return h.is_limit() ? r3.right_limit() : r3(h); }
};

/// R_p |(dm_1, dm_2)| + R_3(h) |dm_3|.
double dissipation_density(const DissipationParams& params, Thickness h, const Vec3& dm);

}  // namespace magfilm
