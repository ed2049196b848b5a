#include "magfilm/fields.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace magfilm {

Edge parse_edge(const std::string& name) {
  if (name == "left") return Edge::left;
  if (name == "right") return Edge::right;
  if (name == "bottom") return Edge::bottom;
  if (name == "top") return Edge::top;
  throw ModelError("unknown dirichlet edge '" + name + "'");
}

std::string to_string(Edge edge) {
  switch (edge) {
    case Edge::left: return "left";
    case Edge::right: return "right";
    case Edge::bottom: return "bottom";
    case Edge::top: return "top";
  }
  return "left";
}

namespace {

std::vector<double> trapezoid_1d(int n, double spacing) {
  if (n == 1) return {1.0};
  std::vector<double> w(n, spacing);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

struct Stencil {
  std::array<int, 3> offset{};
  std::array<double, 3> coeff{};
  int size = 0;
};

Stencil stencil(int n, double h, int i) {
  Stencil s;
  if (n == 1) return s;
  if (n == 2) {
    s.size = 2;
    s.offset = {-i, 1 - i, 0};
    s.coeff = {-1.0 / h, 1.0 / h, 0.0};
    return s;
  }
  s.size = 3;
  if (i == 0) {
    s.offset = {0, 1, 2};
    s.coeff = {-1.5 / h, 2.0 / h, -0.5 / h};
  } else if (i == n - 1) {
    s.offset = {0, -1, -2};
    s.coeff = {1.5 / h, -2.0 / h, 0.5 / h};
  } else {
    s.offset = {-1, 1, 0};
    s.coeff = {-0.5 / h, 0.5 / h, 0.0};
    s.size = 2;
  }
  return s;
}

template <class F>
void for_each_line(const Grid& grid, Axis axis, F&& fn) {
  const std::size_t stride = grid.stride(axis);
  const int n = grid.count(axis);
  const std::size_t block = stride * static_cast<std::size_t>(n);
  for (std::size_t base = 0; base < grid.size(); base += block) {
    for (std::size_t off = 0; off < stride; ++off) fn(base + off, stride, n);
  }
}

}  // namespace

Grid::Grid(int nx, int ny, int nz, double lx, double ly, Thickness h, Edge dirichlet_edge)
    : nx_(nx), ny_(ny), nz_(nz), lx_(lx), ly_(ly), h_(h), edge_(dirichlet_edge) {
  if (nx < 3 || ny < 3) throw ModelError("grid needs nx, ny >= 3");
  if (nz < 1) throw ModelError("grid needs nz >= 1");
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw ModelError("grid side lengths must be positive");
  }
  const auto wx = trapezoid_1d(nx, dx());
  const auto wy = trapezoid_1d(ny, dy());
  const auto wz = trapezoid_1d(nz, dz());
  weights_.resize(size());
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) weights_[index(i, j, k)] = wx[i] * wy[j] * wz[k];
}

double Grid::spacing(Axis a) const {
  switch (a) {
    case Axis::x: return dx();
    case Axis::y: return dy();
    case Axis::z: return dz();
  }
  return 0.0;
}

int Grid::count(Axis a) const {
  switch (a) {
    case Axis::x: return nx_;
    case Axis::y: return ny_;
    case Axis::z: return nz_;
  }
  return 1;
}

std::size_t Grid::stride(Axis a) const {
  switch (a) {
    case Axis::x: return 1;
    case Axis::y: return static_cast<std::size_t>(nx_);
    case Axis::z: return planar_size();
  }
  return 1;
}

Vec3 Grid::position(std::size_t node) const {
  const std::size_t p = planar_index(node);
  const int i = static_cast<int>(p % nx_);
  const int j = static_cast<int>(p / nx_);
  return Vec3(i * dx(), j * dy(), layer(node) * dz());
}

bool Grid::on_dirichlet_edge(int i, int j) const {
  switch (edge_) {
    case Edge::left: return i == 0;
    case Edge::right: return i == nx_ - 1;
    case Edge::bottom: return j == 0;
    case Edge::top: return j == ny_ - 1;
  }
  return false;
}

bool Grid::on_dirichlet_edge(std::size_t node) const {
  const std::size_t p = planar_index(node);
  return on_dirichlet_edge(static_cast<int>(p % nx_), static_cast<int>(p / nx_));
}

bool Grid::same_planar_layout(const Grid& o) const {
  return nx_ == o.nx_ && ny_ == o.ny_ && lx_ == o.lx_ && ly_ == o.ly_ && edge_ == o.edge_;
}

bool Grid::same_layout(const Grid& o) const {
  return same_planar_layout(o) && nz_ == o.nz_ && h_ == o.h_;
}

void derivative(const Grid& grid, Axis axis, std::span<const double> f, std::span<double> out) {
  if (f.size() != grid.size() || out.size() != grid.size()) {
    throw ModelError("derivative: field size does not match the grid");
  }
  const double h = grid.spacing(axis);
  const double c = 0.5 / (h > 0.0 ? h : 1.0);
  for_each_line(grid, axis, [&](std::size_t start, std::size_t stride, int n) {
    if (n < 3) {
      for (int i = 0; i < n; ++i) {
        const Stencil s = stencil(n, h, i);
        double acc = 0.0;
        for (int q = 0; q < s.size; ++q) acc += s.coeff[q] * f[start + (i + s.offset[q]) * stride];
        out[start + i * stride] = acc;
      }
      return;
    }
    const double* fp = f.data() + start;
    double* op = out.data() + start;
    const std::size_t last = static_cast<std::size_t>(n - 1) * stride;
    op[0] = c * (-3.0 * fp[0] + 4.0 * fp[stride] - fp[2 * stride]);
    for (std::size_t k = stride; k < last; k += stride) op[k] = c * (fp[k + stride] - fp[k - stride]);
    op[last] = c * (3.0 * fp[last] - 4.0 * fp[last - stride] + fp[last - 2 * stride]);
  });
}

void derivative_adjoint_add(const Grid& grid, Axis axis, std::span<const double> g,
                            std::span<double> out) {
  if (g.size() != grid.size() || out.size() != grid.size()) {
    throw ModelError("derivative_adjoint_add: field size does not match the grid");
  }
  const double h = grid.spacing(axis);
  const double c = 0.5 / (h > 0.0 ? h : 1.0);
  for_each_line(grid, axis, [&](std::size_t start, std::size_t stride, int n) {
    if (n < 3) {
      for (int i = 0; i < n; ++i) {
        const Stencil s = stencil(n, h, i);
        const double gi = g[start + i * stride];
        for (int q = 0; q < s.size; ++q) out[start + (i + s.offset[q]) * stride] += s.coeff[q] * gi;
      }
      return;
    }
    const double* gp = g.data() + start;
    double* op = out.data() + start;
    const std::size_t last = static_cast<std::size_t>(n - 1) * stride;
    op[0] -= 3.0 * c * gp[0];
    op[stride] += 4.0 * c * gp[0];
    op[2 * stride] -= c * gp[0];
    for (std::size_t k = stride; k < last; k += stride) {
      op[k + stride] += c * gp[k];
      op[k - stride] -= c * gp[k];
    }
    op[last] += 3.0 * c * gp[last];
    op[last - stride] -= 4.0 * c * gp[last];
    op[last - 2 * stride] += c * gp[last];
  });
}

std::vector<Mat3> gradient(const Grid& grid, std::span<const Vec3> u) {
  if (u.size() != grid.size()) throw ModelError("gradient: field size does not match the grid");
  std::vector<Mat3> g(grid.size(), Mat3::Zero());
  std::vector<double> comp(grid.size()), d(grid.size());
  for (int a = 0; a < 3; ++a) {
    for (std::size_t n = 0; n < u.size(); ++n) comp[n] = u[n](a);
    for (int b = 0; b < 3; ++b) {
      derivative(grid, static_cast<Axis>(b), comp, d);
      for (std::size_t n = 0; n < u.size(); ++n) g[n](a, b) = d[n];
    }
  }
  return g;
}

std::vector<Mat3> symmetric_gradient(const Grid& grid, std::span<const Vec3> u) {
  auto g = gradient(grid, u);
  for (auto& m : g) m = (0.5 * (m + m.transpose())).eval();
  return g;
}

MagnetizationField::MagnetizationField(Grid grid, std::vector<Vec3> values, double m_sat,
                                       bool planar_only)
    : grid_(std::move(grid)), values_(std::move(values)), m_sat_(m_sat),
      planar_only_(planar_only || grid_.nz() == 1) {
  if (!(m_sat > 0.0)) throw ModelError("m_sat must be positive");
  if (values_.size() != grid_.size()) throw ModelError("magnetization size does not match the grid");
  const double tol = saturation_tolerance(m_sat);
  for (const auto& v : values_) {
    if (!v.allFinite() || std::abs(v.norm() - m_sat) > tol) {
      throw ModelError("magnetization violates the saturation constraint");
    }
  }
  if (planar_only_) {
    const std::size_t np = grid_.planar_size();
    for (std::size_t n = np; n < values_.size(); ++n) {
      if (values_[n] != values_[n % np]) {
        throw ModelError("planar-only magnetization varies through the thickness");
      }
    }
  }
}

MagnetizationField MagnetizationField::uniform(const Grid& grid, const Vec3& direction,
                                               double m_sat) {
  if (!(direction.norm() > 0.0)) throw ModelError("uniform magnetization needs a nonzero direction");
  const Vec3 m = m_sat * direction.normalized();
  return MagnetizationField(grid, std::vector<Vec3>(grid.size(), m), m_sat, true);
}

double MagnetizationField::max_saturation_violation() const {
  double worst = 0.0;
  for (const auto& v : values_) worst = std::max(worst, std::abs(v.norm() - m_sat_));
  return worst;
}

MagnetizationField project_sphere(const Grid& grid, std::span<const Vec3> raw, double m_sat,
                                  bool planar_only) {
  std::vector<Vec3> out(raw.begin(), raw.end());
  for (auto& v : out) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ModelError("project_sphere: zero or non-finite vector has no projection");
    }
    // Already-saturated vectors are left bit-identical.
    if (n != m_sat) v *= m_sat / n;
  }
  return MagnetizationField(grid, std::move(out), m_sat, planar_only);
}

MagnetizationField extrude(const MagnetizationField& planar, const Grid& grid3d) {
  if (planar.grid().nz() != 1 || !planar.grid().same_planar_layout(grid3d)) {
    throw ModelError("extrude: expects a single-layer field with the same planar layout");
  }
  std::vector<Vec3> values(grid3d.size());
  for (std::size_t n = 0; n < values.size(); ++n) values[n] = planar[grid3d.planar_index(n)];
  return MagnetizationField(grid3d, std::move(values), planar.m_sat(), true);
}

DirichletDatum::DirichletDatum(Grid grid, std::vector<Vec3> mode, bool analytic)
    : grid_(std::move(grid)), mode_(std::move(mode)), analytic_(analytic) {
  if (mode_.size() != grid_.size()) throw ModelError("dirichlet mode size does not match the grid");
}

DirichletDatum DirichletDatum::sample(const Grid& grid, const ModeFunction& fn) {
  std::vector<Vec3> mode(grid.size());
  for (std::size_t n = 0; n < mode.size(); ++n) mode[n] = fn(grid.position(n));
  return DirichletDatum(grid, std::move(mode), true);
}

DirichletDatum DirichletDatum::zero(const Grid& grid) {
  return DirichletDatum(grid, std::vector<Vec3>(grid.size(), Vec3::Zero()), true);
}

ModeKind parse_mode(const std::string& name) {
  if (name == "none") return ModeKind::none;
  if (name == "stretch") return ModeKind::stretch;
  if (name == "shear") return ModeKind::shear;
  if (name == "bending") return ModeKind::bending;
  throw ModelError("unknown dirichlet mode '" + name + "'");
}

DirichletDatum::ModeFunction mode_function(ModeKind kind) {
  switch (kind) {
    case ModeKind::none: return [](const Vec3&) { return Vec3::Zero().eval(); };
    case ModeKind::stretch: return [](const Vec3& x) { return Vec3(x(0), 0.0, 0.0); };
    case ModeKind::shear: return [](const Vec3& x) { return Vec3(0.5 * x(1), 0.5 * x(0), 0.0); };
    case ModeKind::bending:
      return [](const Vec3& x) { return Vec3(-x(2) * x(0), 0.0, 0.5 * x(0) * x(0)); };
  }
  return [](const Vec3&) { return Vec3::Zero().eval(); };
}

double validate_KL(const DirichletDatum& datum) {
  const auto eps = symmetric_gradient(datum.grid(), datum.mode());
  double worst = 0.0;
  for (const auto& e : eps) {
    worst = std::max({worst, std::abs(e(0, 2)), std::abs(e(1, 2)), std::abs(e(2, 2))});
  }
  return worst;
}

double kl_tolerance(const DirichletDatum& datum) {
  if (datum.analytic()) return 1e-10;
  const double d = std::max(datum.grid().dx(), datum.grid().dy());
  return 10.0 * d * d;
}

std::vector<Vec3> lift_displacement(const PlateState& state, const Grid& grid3d) {
  const Grid& pg = state.m.grid();
  if (pg.nz() != 1 || !state.m.planar_only()) {
    throw ModelError("lift_displacement: magnetization must be planar-only on a plate grid");
  }
  if (!pg.same_planar_layout(grid3d)) throw ModelError("lift_displacement: planar layout mismatch");
  const std::size_t np = pg.planar_size();
  if (state.v1.size() != np || state.v2.size() != np || state.v.size() != np) {
    throw ModelError("lift_displacement: displacement size does not match the grid");
  }
  const double ms2 = state.m.m_sat() * state.m.m_sat();
  std::vector<double> g(np), t1(np), t2(np);
  for (std::size_t n = 0; n < np; ++n) {
    const Vec3& m = state.m[n];
    g[n] = m(2) * m(2) - ms2 / 3.0;
    t1[n] = m(0) * m(2);
    t2[n] = m(1) * m(2);
  }
  std::vector<double> dv1(np), dv2(np), dg1(np), dg2(np);
  derivative(pg, Axis::x, state.v, dv1);
  derivative(pg, Axis::y, state.v, dv2);
  derivative(pg, Axis::x, g, dg1);
  derivative(pg, Axis::y, g, dg2);

  std::vector<Vec3> u(grid3d.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    const std::size_t p = grid3d.planar_index(n);
    const double z = grid3d.position(n)(2);
    u[n](0) = state.v1[p] + z * (2.0 * t1[p] - dv1[p]) - 0.5 * z * z * dg1[p];
    u[n](1) = state.v2[p] + z * (2.0 * t2[p] - dv2[p]) - 0.5 * z * z * dg2[p];
    u[n](2) = state.v[p] + z * g[p];
  }
  return u;
}

}  // namespace magfilm
