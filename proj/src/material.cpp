#include "magfilm/material.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <string>

namespace magfilm {
namespace {

// Voigt index of the symmetric pair (i, j).
int voigt_index(int i, int j) {
  static constexpr std::array<std::array<int, 3>, 3> kMap{{{0, 5, 4}, {5, 1, 3}, {4, 3, 2}}};
  return kMap[i][j];
}

// In-plane (11, 22, 12) and transverse (33, 23, 13) Voigt slots.
constexpr std::array<int, 3> kPlanar{0, 1, 5};
constexpr std::array<int, 3> kTransverse{2, 3, 4};

}  // namespace

ElasticityTensor ElasticityTensor::isotropic(double lambda, double mu) {
  Mat6 c = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c(i, j) = lambda;
    c(i, i) = lambda + 2.0 * mu;
    c(i + 3, i + 3) = mu;
  }
  return from_voigt(c);
}

ElasticityTensor ElasticityTensor::from_voigt(const Mat6& voigt) {
  if (!voigt.allFinite()) throw ModelError("elasticity tensor has non-finite entries");
  const double scale = voigt.cwiseAbs().maxCoeff();
  if ((voigt - voigt.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
    throw ModelError("elasticity tensor is not symmetric");
  }
  const Mat6 sym = 0.5 * (voigt + voigt.transpose());
  if (!(sym(2, 2) > 0.0)) throw ModelError("elasticity tensor requires C_3333 > 0");
  Eigen::SelfAdjointEigenSolver<Mat6> eig(sym, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 1e-14 * scale)) {
    throw ModelError("elasticity tensor is not positive definite");
  }
  return ElasticityTensor(sym);
}

double ElasticityTensor::component(int i, int j, int k, int l) const {
  return c_(voigt_index(i, j), voigt_index(k, l));
}

double ElasticityTensor::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(c_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double PlaneReducedTensor::component(int i, int j, int k, int l) const {
  auto idx = [](int a, int b) { return a == b ? a : 2; };
  return voigt2(idx(i, j), idx(k, l));
}

PlaneReducedTensor reduce_tensor(const ElasticityTensor& c) {
  const Mat6& v = c.voigt();
  Eigen::Matrix3d cpp, cpt, ctt;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      cpp(a, b) = v(kPlanar[a], kPlanar[b]);
      cpt(a, b) = v(kPlanar[a], kTransverse[b]);
      ctt(a, b) = v(kTransverse[a], kTransverse[b]);
    }
  }
  PlaneReducedTensor out;
  out.voigt2 = cpp - cpt * ctt.ldlt().solve(cpt.transpose());
  out.voigt2 = 0.5 * (out.voigt2 + out.voigt2.transpose()).eval();
  return out;
}

QuadraticFormResult quadratic_form_Q(const ElasticityTensor& c, const Eigen::Matrix2d& a) {
  const Mat6& v = c.voigt();
  const Voigt3 x = to_voigt_strain2(0.5 * (a + a.transpose()));
  Eigen::Matrix3d cpt, ctt;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      cpt(i, j) = v(kPlanar[i], kTransverse[j]);
      ctt(i, j) = v(kTransverse[i], kTransverse[j]);
    }
  }
  // Transverse engineering strains (b, 2 a_2, 2 a_1) minimizing the energy.
  const Eigen::Vector3d y = -ctt.ldlt().solve(cpt.transpose() * x);
  Voigt6 full = Voigt6::Zero();
  for (int i = 0; i < 3; ++i) {
    full(kPlanar[i]) = x(i);
    full(kTransverse[i]) = y(i);
  }
  QuadraticFormResult r;
  r.value = c.energy_density(full);
  r.b = y(0);
  r.a = Eigen::Vector2d(0.5 * y(2), 0.5 * y(1));
  return r;
}

Mat3 eps_mag(const Vec3& m, double m_sat) {
  if (std::abs(m.norm() - m_sat) > saturation_tolerance(m_sat)) {
    throw ModelError("eps_mag: magnetization violates the saturation constraint");
  }
  return m * m.transpose() - (m_sat * m_sat / 3.0) * Mat3::Identity();
}

ThicknessScaling ThicknessScaling::constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ModelError("constant scaling must be finite and >= 0");
  return ThicknessScaling(Kind::constant, c, 0.0);
}

ThicknessScaling ThicknessScaling::inverse(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ModelError("inverse scaling needs c > 0");
  return ThicknessScaling(Kind::inverse, c, 0.0);
}

ThicknessScaling ThicknessScaling::linear(double a, double b) {
  if (!(b >= 0.0) || !(a - b >= 0.0)) {
    throw ModelError("linear scaling a - b h needs b >= 0 and a - b >= 0");
  }
  return ThicknessScaling(Kind::linear, a, b);
}

double ThicknessScaling::operator()(Thickness h) const {
  if (h.is_limit()) return f0();
  switch (kind_) {
    case Kind::constant: return p0_;
    case Kind::inverse: return p0_ / h.value();
    case Kind::linear: return p0_ - p1_ * h.value();
  }
  return p0_;
}

double ThicknessScaling::f0() const { return kind_ == Kind::inverse ? kInfinity : p0_; }

AnisotropyModel AnisotropyModel::uniaxial(double k_p, double k_3, const Vec3& axis,
                                          ThicknessScaling f) {
  if (!(k_p >= 0.0) || !(k_3 >= 0.0)) throw ModelError("anisotropy constants must be >= 0");
  if (!(axis.norm() > 0.0)) throw ModelError("easy axis must be nonzero");
  AnisotropyModel m;
  m.kind_ = Kind::uniaxial;
  m.k_p_ = k_p;
  m.k_3_ = k_3;
  m.axes_ = {axis.normalized()};
  m.f_ = f;
  return m;
}

AnisotropyModel AnisotropyModel::cubic(double k_p, double k_3, const std::vector<Vec3>& axes,
                                       ThicknessScaling f) {
  if (!(k_p >= 0.0) || !(k_3 >= 0.0)) throw ModelError("anisotropy constants must be >= 0");
  if (axes.size() != 3) throw ModelError("cubic anisotropy needs three axes");
  AnisotropyModel m;
  m.kind_ = Kind::cubic;
  m.k_p_ = k_p;
  m.k_3_ = k_3;
  for (const auto& a : axes) {
    if (!(a.norm() > 0.0)) throw ModelError("easy axis must be nonzero");
    m.axes_.push_back(a.normalized());
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(m.axes_[i].dot(m.axes_[j])) > 1e-10) {
        throw ModelError("cubic axes must be mutually orthogonal");
      }
    }
  }
  m.f_ = f;
  return m;
}

AnisotropyModel AnisotropyModel::tabulated(double k_p, double k_3, std::vector<Vec3> node_axes,
                                           ThicknessScaling f) {
  if (!(k_p >= 0.0) || !(k_3 >= 0.0)) throw ModelError("anisotropy constants must be >= 0");
  if (node_axes.empty()) throw ModelError("tabulated anisotropy needs an axis table");
  AnisotropyModel m;
  m.kind_ = Kind::tabulated;
  m.k_p_ = k_p;
  m.k_3_ = k_3;
  for (auto& a : node_axes) {
    if (!(a.norm() > 0.0)) throw ModelError("easy axis must be nonzero");
    a.normalize();
  }
  m.axes_ = std::move(node_axes);
  m.f_ = f;
  return m;
}

std::span<const Vec3> AnisotropyModel::easy_axes(std::size_t planar_node) const {
  if (kind_ == Kind::tabulated) {
    if (planar_node >= axes_.size()) throw ModelError("axis table smaller than the grid");
    return {&axes_[planar_node], 1};
  }
  return axes_;
}

double AnisotropyModel::offplane_part(std::size_t planar_node, const Vec3& m, double m_sat) const {
  const auto axes = easy_axes(planar_node);
  if (kind_ == Kind::cubic) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        const double pi = axes[i].dot(m);
        const double pj = axes[j].dot(m);
        s += pi * pi * pj * pj;
      }
    }
    return k_3_ * s / (m_sat * m_sat);
  }
  const double p = axes[0].dot(m);
  // m_sat^2 - (m.s)^2 written through |m|^2 so the density stays >= 0 off the sphere.
  return k_3_ * std::max(0.0, m.squaredNorm() - p * p);
}

Vec3 AnisotropyModel::offplane_gradient(std::size_t planar_node, const Vec3& m, double m_sat) const {
  const auto axes = easy_axes(planar_node);
  if (kind_ == Kind::cubic) {
    Vec3 g = Vec3::Zero();
    std::array<double, 3> p{};
    for (int i = 0; i < 3; ++i) p[i] = axes[i].dot(m);
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        g += 2.0 * p[i] * p[j] * p[j] * axes[i] + 2.0 * p[j] * p[i] * p[i] * axes[j];
      }
    }
    return k_3_ * g / (m_sat * m_sat);
  }
  const double p = axes[0].dot(m);
  return k_3_ * (2.0 * m - 2.0 * p * axes[0]);
}

double anisotropy_energy_density(const AnisotropyModel& model, Thickness h,
                                 std::size_t planar_node, const Vec3& m, double m_sat) {
  const double phi_p = model.planar_part(m);
  const double phi_3 = model.offplane_part(planar_node, m, m_sat);
  const double f = model.scaling()(h);
  if (std::isinf(f)) {
    return phi_p <= kConstraintTolerance ? phi_3 : kInfinity;
  }
  return f * phi_p + phi_3;
}

OffplaneYield OffplaneYield::constant(double r) { return linear(r, 0.0); }

OffplaneYield OffplaneYield::linear(double r0, double r1) {
  if (!(r0 >= 0.0) || !(r0 + r1 >= 0.0) || !std::isfinite(r0) || !std::isfinite(r1)) {
    throw ModelError("R_3(h) must be finite and >= 0 on (0, 1]");
  }
  OffplaneYield y;
  y.r0_ = r0;
  y.r1_ = r1;
  return y;
}

OffplaneYield OffplaneYield::table(std::vector<std::pair<double, double>> rows) {
  if (rows.empty()) throw ModelError("R_3 table is empty");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].second >= 0.0) || !std::isfinite(rows[i].second)) {
      throw ModelError("R_3 table values must be finite and >= 0");
    }
    if (i > 0 && !(rows[i].first > rows[i - 1].first)) {
      throw ModelError("R_3 table thicknesses must be strictly increasing");
    }
  }
  OffplaneYield y;
  y.rows_ = std::move(rows);
  y.tabulated_ = true;
  return y;
}

double OffplaneYield::operator()(Thickness h) const {
  if (h.is_limit()) return right_limit();
  const double x = h.value();
  if (!tabulated_) return r0_ + r1_ * x;
  if (x <= rows_.front().first) return rows_.front().second;
  if (x >= rows_.back().first) return rows_.back().second;
  auto it = std::upper_bound(rows_.begin(), rows_.end(), x,
                             [](double v, const auto& row) { return v < row.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double s = (x - lo.first) / (hi.first - lo.first);
  return lo.second + s * (hi.second - lo.second);
}

double OffplaneYield::right_limit() const { return tabulated_ ? rows_.front().second : r0_; }

DissipationParams DissipationParams::make(double r_p, OffplaneYield r3) {
  if (!(r_p >= 0.0) || !std::isfinite(r_p)) throw ModelError("R_p must be finite and >= 0");
  return DissipationParams{r_p, std::move(r3)};
}

double dissipation_density(const DissipationParams& params, Thickness h, const Vec3& dm) {
  return params.r_p * std::hypot(dm(0), dm(1)) + params.r3_at(h) * std::abs(dm(2));
}

}  // namespace magfilm
