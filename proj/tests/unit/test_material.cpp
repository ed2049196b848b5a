#include "magfilm/material.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace magfilm;

namespace {

Mat6 random_spd(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat6 a;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a(i, j) = n(rng);
  return a * a.transpose() + 0.5 * Mat6::Identity();
}

Eigen::Matrix2d sym2(double a, double b, double c) {
  Eigen::Matrix2d m;
  m << a, c, c, b;
  return m;
}

}  // namespace

TEST_CASE("isotropic plane reduction") {
  const auto c = ElasticityTensor::isotropic(1.0, 1.0);
  const auto r = reduce_tensor(c);
  CHECK(r.component(0, 0, 0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(r.component(0, 0, 1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(oracle::brute_force_Q(c.voigt(), sym2(1, 0, 0)) == doctest::Approx(8.0 / 3.0).epsilon(1e-13));
  // plane-stress lambda* = 2 lambda mu / (lambda + 2 mu) for lambda = 2, mu = 0.5
  const auto c2 = ElasticityTensor::isotropic(2.0, 0.5);
  const double lstar = 2 * 2.0 * 0.5 / (2.0 + 1.0);
  CHECK(reduce_tensor(c2).component(0, 0, 1, 1) == doctest::Approx(lstar).epsilon(1e-13));
}

TEST_CASE("quadratic form minimizer") {
  const auto c = ElasticityTensor::isotropic(1.0, 1.0);
  const auto q = quadratic_form_Q(c, sym2(1, 0, 0));
  CHECK(q.value == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(q.a.norm() < 1e-14);
  CHECK(q.b == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));

  const auto z = quadratic_form_Q(c, Eigen::Matrix2d::Zero());
  CHECK(z.value == 0.0);
  CHECK(z.b == 0.0);
}

TEST_CASE("no 33-coupling leaves the planar block unchanged") {
  Mat6 v = Mat6::Zero();
  v.diagonal() << 3, 4, 5, 1, 2, 1.5;
  v(0, 1) = v(1, 0) = 0.7;
  const auto c = ElasticityTensor::from_voigt(v);
  const auto r = reduce_tensor(c);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) CHECK(r.component(i, j, k, l) == doctest::Approx(c.component(i, j, k, l)));
  const auto a = sym2(0.3, -1.2, 0.4);
  const auto q = quadratic_form_Q(c, a);
  CHECK(std::abs(q.b) < 1e-14);
  CHECK(q.value == doctest::Approx(oracle::brute_force_Q(v, a)).epsilon(1e-12));
}

TEST_CASE("random SPD tensors match the brute-force quadratic form") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Mat6 v = random_spd(rng);
    const auto c = ElasticityTensor::from_voigt(v);
    const auto a = sym2(n(rng), n(rng), n(rng));
    const double ref = oracle::brute_force_Q(v, a);
    const auto r = reduce_tensor(c);
    const Voigt3 av(a(0, 0), a(1, 1), 2 * a(0, 1));
    CHECK(std::abs(r.contract(av, av) - ref) <= 1e-10 * (1 + a.squaredNorm()));
    CHECK(std::abs(quadratic_form_Q(c, a).value - ref) <= 1e-10 * (1 + a.squaredNorm()));
  }
}

TEST_CASE("stiffness validation") {
  Mat6 v = Mat6::Identity();
  v(0, 1) = 2.0;
  CHECK_THROWS_AS(ElasticityTensor::from_voigt(v), ModelError);
  v(1, 0) = 2.0;
  CHECK_THROWS_AS(ElasticityTensor::from_voigt(v), ModelError);
  CHECK_THROWS_AS(ElasticityTensor::isotropic(1.0, -1.0), ModelError);
}

TEST_CASE("magnetostrictive eigenstrain") {
  const double ms = 2.0;
  const Mat3 e3 = eps_mag(ms * Vec3::UnitZ(), ms);
  CHECK(e3(0, 0) == doctest::Approx(-ms * ms / 3));
  CHECK(e3(2, 2) == doctest::Approx(2 * ms * ms / 3));
  const Mat3 e1 = eps_mag(ms * Vec3::UnitX(), ms);
  CHECK(e1(0, 0) == doctest::Approx(2 * ms * ms / 3));
  CHECK(e1(1, 1) == doctest::Approx(-ms * ms / 3));
  const Mat3 e13 = eps_mag(ms * Vec3(1, 0, 1).normalized(), ms);
  CHECK(e13(0, 2) == doctest::Approx(ms * ms / 2));
  CHECK(std::abs(e13.trace()) < 1e-14);
  CHECK_THROWS_AS(eps_mag(Vec3(1, 0, 0), ms), ModelError);
}

TEST_CASE("anisotropy density") {
  const double kp = 0.7, k3 = 1.3, ms = 1.5;
  const auto model = AnisotropyModel::uniaxial(kp, k3, Vec3::UnitZ(), ThicknessScaling::inverse(1.0));
  for (double h : {1.0, 0.5, 0.01})
    CHECK(anisotropy_energy_density(model, Thickness::of(h), 0, ms * Vec3::UnitZ(), ms) == doctest::Approx(0.0));
  CHECK(anisotropy_energy_density(model, Thickness::limit(), 0, ms * Vec3::UnitZ(), ms) == doctest::Approx(0.0));
  // f(0.5) = 2, phi_3(m_sat e1) = K3 m_sat^2
  const double expected = 2 * kp * ms * ms + k3 * ms * ms;
  CHECK(anisotropy_energy_density(model, Thickness::of(0.5), 0, ms * Vec3::UnitX(), ms) == doctest::Approx(expected));
  CHECK(std::isinf(anisotropy_energy_density(model, Thickness::limit(), 0, ms * Vec3::UnitX(), ms)));
  CHECK(model.hard_planar_constraint(Thickness::limit()));

  const Vec3 m = ms * Vec3(0.6, 0.0, 0.8);
  double prev = INFINITY;
  for (double h : {0.05, 0.1, 0.3, 0.7, 1.0}) {
    const double d = anisotropy_energy_density(model, Thickness::of(h), 0, m, ms);
    CHECK(d <= prev);
    prev = d;
  }
}

TEST_CASE("thickness scaling must be nonincreasing") {
  CHECK_THROWS_AS(ThicknessScaling::linear(1.0, -0.5), ModelError);
  CHECK(ThicknessScaling::linear(2.0, 0.5).f0() == 2.0);
  CHECK(std::isinf(ThicknessScaling::inverse(1.0).f0()));
}

TEST_CASE("cubic anisotropy vanishes on its axes") {
  const auto model = AnisotropyModel::cubic(0.0, 2.0, {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()},
                                            ThicknessScaling::constant(1.0));
  for (const Vec3& a : {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()})
    CHECK(model.offplane_part(0, a, 1.0) == doctest::Approx(0.0));
  CHECK(model.offplane_part(0, Vec3(1, 1, 0).normalized(), 1.0) > 0.0);
}

TEST_CASE("dissipation density") {
  const auto p = DissipationParams::make(2.0, OffplaneYield::constant(0.5));
  CHECK(dissipation_density(p, Thickness::limit(), Vec3::Zero()) == 0.0);
  CHECK(dissipation_density(p, Thickness::limit(), Vec3(3, 4, 0)) == doctest::Approx(10.0));
  CHECK(dissipation_density(p, Thickness::limit(), Vec3(0, 0, 1)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(DissipationParams::make(-1.0, OffplaneYield::constant(0.0)), ModelError);

  const auto lin = OffplaneYield::linear(0.5, 2.0);
  CHECK(lin(Thickness::of(0.25)) == doctest::Approx(1.0));
  CHECK(lin.right_limit() == doctest::Approx(0.5));
  const auto tab = OffplaneYield::table({{0.1, 1.0}, {0.5, 2.0}});
  CHECK(tab(Thickness::of(0.3)) == doctest::Approx(1.5));
  CHECK(tab.right_limit() == doctest::Approx(1.0));
}
