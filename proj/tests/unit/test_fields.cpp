#include "magfilm/fields.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace magfilm;

namespace {

std::vector<Vec3> sample(const Grid& g, const std::function<Vec3(const Vec3&)>& fn) {
  std::vector<Vec3> out(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) out[n] = fn(g.position(n));
  return out;
}

}  // namespace

TEST_CASE("grid layout and weights") {
  const Grid g = Grid::bulk(5, 4, 3, 2.0, 1.5, 0.5, Edge::bottom);
  CHECK(g.size() == 60);
  CHECK(g.index(1, 2, 1) == 1 + 5 * (2 + 4 * 1));
  double sum = 0.0;
  for (double w : g.weights()) sum += w;
  CHECK(sum == doctest::Approx(3.0).epsilon(1e-14));
  const auto wx = oracle::trapezoid(5, 0.5), wy = oracle::trapezoid(4, 0.5), wz = oracle::trapezoid(3, 0.5);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 5; ++i) CHECK(g.weights()[g.index(i, j, k)] == doctest::Approx(wx(i) * wy(j) * wz(k)));
  CHECK(g.on_dirichlet_edge(3, 0));
  CHECK_FALSE(g.on_dirichlet_edge(3, 1));
  CHECK_THROWS_AS(Grid::bulk(5, 4, 3, 1.0, 1.0, 1.5), ModelError);
  CHECK(parse_edge("top") == Edge::top);
  CHECK_THROWS_AS(parse_edge("middle"), ModelError);
}

TEST_CASE("derivative matches the dense stencil and its adjoint") {
  const Grid g = Grid::bulk(6, 5, 4, 1.0, 0.8, 0.5);
  std::vector<double> f(g.size()), d(g.size()), back(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) f[n] = std::sin(3.0 * g.position(n)(0)) + g.position(n)(1);
  derivative(g, Axis::x, f, d);
  const auto dx = oracle::derivative_matrix(6, g.dx());
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 6; ++i) {
        double ref = 0.0;
        for (int q = 0; q < 6; ++q) ref += dx(i, q) * f[g.index(q, j, k)];
        CHECK(d[g.index(i, j, k)] == doctest::Approx(ref).epsilon(1e-13));
      }
  // <D f, r> == <f, D^T r>
  std::vector<double> r(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) r[n] = std::cos(1.0 + n);
  derivative_adjoint_add(g, Axis::z, r, back);
  derivative(g, Axis::z, f, d);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    lhs += d[n] * r[n];
    rhs += f[n] * back[n];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("symmetric gradient is exact on affine and quadratic fields") {
  const Grid g = Grid::bulk(5, 6, 3, 1.0, 1.2, 0.5);
  Mat3 a;
  a << 0.3, -1.0, 0.5, 2.0, 0.1, -0.4, 0.7, 0.2, -0.6;
  const auto eps = symmetric_gradient(g, sample(g, [&](const Vec3& x) { return Vec3(a * x); }));
  const Mat3 sym = 0.5 * (a + a.transpose());
  for (const auto& e : eps) CHECK((e - sym).norm() < 1e-12);

  for (const auto& e : symmetric_gradient(g, std::vector<Vec3>(g.size(), Vec3::Zero()))) CHECK(e.norm() == 0.0);

  const auto q = symmetric_gradient(g, sample(g, [](const Vec3& x) { return Vec3(x(0) * x(0), 0, 0); }));
  for (std::size_t n = 0; n < g.size(); ++n) CHECK(q[n](0, 0) == doctest::Approx(2 * g.position(n)(0)).epsilon(1e-12));
}

TEST_CASE("Kirchhoff-Love modes") {
  const Grid g = Grid::bulk(9, 7, 3, 1.0, 1.0, 0.5);
  CHECK(validate_KL(DirichletDatum::sample(g, mode_function(ModeKind::stretch))) < 1e-12);
  CHECK(validate_KL(DirichletDatum::sample(g, mode_function(ModeKind::shear))) < 1e-12);
  const auto bend = DirichletDatum::sample(g, mode_function(ModeKind::bending));
  CHECK(validate_KL(bend) <= kl_tolerance(bend));
  const auto bad = DirichletDatum::sample(g, [](const Vec3& x) { return Vec3(0, 0, x(2)); });
  CHECK(validate_KL(bad) == doctest::Approx(1.0));
  CHECK(validate_KL(bad) > kl_tolerance(bad));
}

TEST_CASE("sphere projection") {
  const Grid g = Grid::plate(3, 3, 1.0, 1.0);
  std::vector<Vec3> raw(9, Vec3(0, -3, 4));
  raw[0] = Vec3(0, 0, 2);
  raw[1] = Vec3(1, 1, 1);
  const auto m = project_sphere(g, raw, 1.0);
  CHECK((m[0] - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((m[1] - Vec3(1, 1, 1) / std::sqrt(3.0)).norm() < 1e-15);
  const auto again = project_sphere(g, m.values(), 1.0);
  for (std::size_t n = 0; n < m.size(); ++n) CHECK((again[n] - m[n]).norm() < 1e-15);
  raw[2] = Vec3::Zero();
  CHECK_THROWS_AS(project_sphere(g, raw, 1.0), ModelError);
  CHECK_THROWS_AS(MagnetizationField(g, std::vector<Vec3>(9, Vec3(0.5, 0, 0)), 1.0, false), ModelError);
}

TEST_CASE("extrusion and column constancy") {
  const Grid p = Grid::plate(3, 3, 1.0, 1.0);
  std::vector<Vec3> v(p.size());
  for (std::size_t n = 0; n < v.size(); ++n) v[n] = Vec3(std::cos(0.3 * n), std::sin(0.3 * n), 0.0);
  const MagnetizationField mp(p, v, 1.0, true);
  const Grid b = p.with_layers(4, Thickness::of(0.2));
  const auto e = extrude(mp, b);
  for (std::size_t n = 0; n < b.size(); ++n) CHECK(e[n] == mp[b.planar_index(n)]);
  std::vector<Vec3> mixed(e.values().begin(), e.values().end());
  mixed.back() = Vec3::UnitZ();
  CHECK_THROWS_AS(MagnetizationField(b, mixed, 1.0, true), ModelError);
}

TEST_CASE("lift of uniform magnetizations") {
  const double ms = 1.5;
  const Grid p = Grid::plate(4, 3, 1.0, 1.0);
  const Grid b = p.with_layers(3, Thickness::of(0.5));
  const std::vector<double> zero(p.size(), 0.0);
  {
    const PlateState s{zero, zero, zero, MagnetizationField::uniform(p, Vec3::UnitZ(), ms)};
    const auto u = lift_displacement(s, b);
    for (std::size_t n = 0; n < b.size(); ++n) {
      const double z = b.position(n)(2);
      CHECK((u[n] - Vec3(0, 0, z * 2 * ms * ms / 3)).norm() < 1e-14);
    }
  }
  {
    const PlateState s{zero, zero, zero, MagnetizationField::uniform(p, Vec3(0.6, 0.8, 0), ms)};
    const auto u = lift_displacement(s, b);
    for (std::size_t n = 0; n < b.size(); ++n) {
      const double z = b.position(n)(2);
      CHECK((u[n] - Vec3(0, 0, -z * ms * ms / 3)).norm() < 1e-14);
    }
  }
}

TEST_CASE("lift realizes the transverse eigenstrain") {
  const Grid p = Grid::plate(11, 9, 1.0, 1.0);
  const Grid b = p.with_layers(3, Thickness::of(0.5));
  std::vector<Vec3> m(p.size());
  std::vector<double> v(p.size()), v1(p.size()), v2(p.size());
  for (std::size_t n = 0; n < p.size(); ++n) {
    const Vec3 x = p.position(n);
    const double th = 0.8 * std::sin(2.0 * x(0)) + 0.3 * x(1);
    m[n] = Vec3(std::cos(th), 0.2 * std::sin(x(1)), std::sin(th)).normalized();
    v[n] = 0.1 * x(0) * x(0) * x(1);
    v1[n] = std::sin(x(1));
    v2[n] = x(0) * x(1);
  }
  const PlateState s{v1, v2, v, MagnetizationField(p, m, 1.0, true)};
  const auto eps = symmetric_gradient(b, lift_displacement(s, b));
  for (std::size_t n = 0; n < b.size(); ++n) {
    const Mat3 target = eps_mag(m[b.planar_index(n)], 1.0);
    CHECK(std::abs(eps[n](0, 2) - target(0, 2)) < 1e-12);
    CHECK(std::abs(eps[n](1, 2) - target(1, 2)) < 1e-12);
    CHECK(std::abs(eps[n](2, 2) - target(2, 2)) < 1e-12);
  }
  CHECK_THROWS_AS(lift_displacement(s, Grid::bulk(5, 9, 3, 1.0, 1.0, 0.5)), ModelError);
}
