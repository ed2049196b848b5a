#include "magfilm/energetics.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace magfilm {

// ---------------------------------------------------------------- schedules

template <class T>
PiecewiseLinear<T>::PiecewiseLinear(std::vector<std::pair<double, T>> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw ModelError("schedule needs at least one row");
  if (rows_.front().first != 0.0) throw ModelError("schedule must start at t = 0");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!std::isfinite(rows_[i].first)) throw ModelError("schedule times must be finite");
    if (i > 0 && !(rows_[i].first > rows_[i - 1].first)) {
      throw ModelError("schedule times must be strictly increasing");
    }
  }
}

template <class T>
std::size_t PiecewiseLinear<T>::segment(double t, bool right) const {
  // Index of the row starting the segment used at t.
  auto it = right ? std::upper_bound(rows_.begin(), rows_.end(), t,
                                     [](double v, const auto& r) { return v < r.first; })
                  : std::lower_bound(rows_.begin(), rows_.end(), t,
                                     [](const auto& r, double v) { return r.first < v; });
  std::size_t k = static_cast<std::size_t>(it - rows_.begin());
  k = k == 0 ? 0 : k - 1;
  return std::min(k, rows_.size() - 2);
}

template <class T>
T PiecewiseLinear<T>::operator()(double t) const {
  if (rows_.size() == 1 || t <= rows_.front().first) return rows_.front().second;
  if (t >= rows_.back().first) return rows_.back().second;
  const std::size_t k = segment(t, true);
  const auto& lo = rows_[k];
  const auto& hi = rows_[k + 1];
  const double s = (t - lo.first) / (hi.first - lo.first);
  return T(lo.second + s * (hi.second - lo.second));
}

template <class T>
T PiecewiseLinear<T>::rate(double t, bool right) const {
  if (rows_.size() == 1) return T(0.0 * rows_.front().second);
  if ((right && t >= rows_.back().first) || (!right && t <= rows_.front().first)) {
    return T(0.0 * rows_.front().second);
  }
  const std::size_t k = segment(t, right);
  const auto& lo = rows_[k];
  const auto& hi = rows_[k + 1];
  return T((hi.second - lo.second) / (hi.first - lo.first));
}

template <class T>
bool PiecewiseLinear<T>::is_breakpoint(double t) const {
  return std::any_of(rows_.begin(), rows_.end(), [t](const auto& r) { return r.first == t; });
}

template <class T>
PiecewiseLinear<T> PiecewiseLinear<T>::scaled_in_time(double factor) const {
  if (!(factor > 0.0)) throw ModelError("time scaling factor must be positive");
  auto rows = rows_;
  for (auto& r : rows) r.first *= factor;
  return PiecewiseLinear<T>(std::move(rows));
}

template class PiecewiseLinear<double>;
template class PiecewiseLinear<Vec3>;

namespace {

double schedule_end(const auto& f) {
  return f.rows().size() == 1 ? kInfinity : f.end_time();
}

}  // namespace

LoadSchedule::LoadSchedule(ModeKind mode, PiecewiseLinear<double> lambda, PiecewiseLinear<Vec3> field)
    : mode_(mode), lambda_(std::move(lambda)), field_(std::move(field)),
      horizon_(std::min(schedule_end(lambda_), schedule_end(field_))) {}

LoadSchedule LoadSchedule::constant(double horizon, double lambda, const Vec3& field, ModeKind mode) {
  if (!(horizon > 0.0)) throw ModelError("schedule horizon must be positive");
  return LoadSchedule(mode, PiecewiseLinear<double>({{0.0, lambda}, {horizon, lambda}}),
                      PiecewiseLinear<Vec3>({{0.0, field}, {horizon, field}}));
}

void LoadSchedule::check_time(double t) const {
  if (!(t >= 0.0) || t > horizon_ * (1.0 + 1e-12)) {
    throw ModelError("time " + std::to_string(t) + " outside the schedule horizon");
  }
}

LoadValues LoadSchedule::at(double t) const {
  check_time(t);
  return {lambda_(t), field_(t)};
}

LoadValues LoadSchedule::rate(double t, bool right) const {
  check_time(t);
  return {lambda_.rate(t, right), field_.rate(t, right)};
}

bool LoadSchedule::is_breakpoint(double t) const {
  return lambda_.is_breakpoint(t) || field_.is_breakpoint(t);
}

LoadSchedule LoadSchedule::scaled_in_time(double factor) const {
  return LoadSchedule(mode_, lambda_.scaled_in_time(factor), field_.scaled_in_time(factor));
}

// ---------------------------------------------------------------- shared terms

namespace {

std::vector<double> trapezoid_1d(int n, double spacing) {
  if (n == 1) return {1.0};
  std::vector<double> w(n, spacing);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

double zeeman_terms(const Grid& g, std::span<const Vec3> m, const Vec3& h, std::vector<Vec3>* grad) {
  const auto& w = g.weights();
  const double inv_area = 1.0 / g.area();
  double e = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    e -= w[n] * h.dot(m[n]);
    if (grad) (*grad)[n] -= w[n] * inv_area * h;
  }
  return e * inv_area;
}

// Smooth anisotropy: f phi_p + phi_3, with phi_p dropped under the hard constraint.
double anisotropy_terms(const Grid& g, const AnisotropyModel& model, Thickness h, double m_sat,
                        std::span<const Vec3> m, std::vector<Vec3>* grad) {
  const auto& w = g.weights();
  const double inv_area = 1.0 / g.area();
  double f = model.k_p() > 0.0 ? model.scaling()(h) : 0.0;
  if (std::isinf(f)) f = 0.0;
  double e = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    const std::size_t p = g.planar_index(n);
    e += w[n] * (f * model.planar_part(m[n]) + model.offplane_part(p, m[n], m_sat));
    if (grad) {
      (*grad)[n] += w[n] * inv_area *
                    (f * model.planar_gradient(m[n]) + model.offplane_gradient(p, m[n], m_sat));
    }
  }
  return e * inv_area;
}

double anisotropy_reported(const Grid& g, const AnisotropyModel& model, Thickness h, double m_sat,
                           std::span<const Vec3> m) {
  const auto& w = g.weights();
  double e = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    const double d = anisotropy_energy_density(model, h, g.planar_index(n), m[n], m_sat);
    if (std::isinf(d)) return kInfinity;
    e += w[n] * d;
  }
  return e / g.area();
}

void finish(EnergyBreakdown& e) {
  e.feasible = std::isfinite(e.anisotropy);
  e.total = e.feasible ? e.exchange + e.anisotropy + e.stray + e.zeeman + e.elastic : kInfinity;
}

// Off-sphere extension used by the smooth objective; inputs are validated upstream.
Mat3 eps_mag_unchecked(const Vec3& m, double m_sat) {
  return m * m.transpose() - (m_sat * m_sat / 3.0) * Mat3::Identity();
}

void check_magnetization(const Grid& g, std::span<const Vec3> m) {
  if (m.size() != g.size()) throw ModelError("magnetization size does not match the model grid");
}

std::vector<char> pinned_dofs(const Grid& g, std::size_t nodes) {
  std::vector<char> pinned(3 * nodes, 0);
  for (std::size_t n = 0; n < nodes; ++n) {
    if (g.on_dirichlet_edge(n)) {
      for (int c = 0; c < 3; ++c) pinned[c * nodes + n] = 1;
    }
  }
  return pinned;
}

std::vector<double> component(std::span<const double> x, std::size_t nodes, int c) {
  return std::vector<double>(x.begin() + c * nodes, x.begin() + (c + 1) * nodes);
}

}  // namespace

double exchange_energy(const Grid& grid, std::span<const Vec3> m, double alpha, double inv_h2,
                       std::vector<Vec3>* gradient) {
  check_magnetization(grid, m);
  if (alpha == 0.0) return 0.0;
  const std::array<std::vector<double>, 3> w1 = {trapezoid_1d(grid.nx(), grid.dx()),
                                                 trapezoid_1d(grid.ny(), grid.dy()),
                                                 trapezoid_1d(grid.nz(), grid.dz())};
  const double scale = alpha / grid.area();
  double e = 0.0;
  for (int a = 0; a < 3; ++a) {
    const Axis axis = static_cast<Axis>(a);
    const int count = grid.count(axis);
    if (count < 2) continue;
    const double factor = a == 2 ? inv_h2 : 1.0;
    if (factor == 0.0) continue;
    const double d = grid.spacing(axis);
    const std::size_t stride = grid.stride(axis);
    for (int k = 0; k < grid.nz(); ++k)
      for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
          const int idx[3] = {i, j, k};
          if (idx[a] == count - 1) continue;
          double we = d;
          for (int b = 0; b < 3; ++b) {
            if (b != a) we *= w1[b][idx[b]];
          }
          const std::size_t n0 = grid.index(i, j, k);
          const Vec3 diff = m[n0 + stride] - m[n0];
          const double c = factor * we / (d * d);
          e += c * diff.squaredNorm();
          if (gradient) {
            (*gradient)[n0 + stride] += 2.0 * scale * c * diff;
            (*gradient)[n0] -= 2.0 * scale * c * diff;
          }
        }
  }
  return scale * e;
}

// ---------------------------------------------------------------- plate

namespace {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

Mat9 moment_pattern() {
  Mat9 p = Mat9::Zero();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) p.block<3, 3>(3 * a, 3 * b).setConstant(1.0 / (a + b + 1));
  return p;
}

}  // namespace

const Eigen::Matrix<double, 9, 9>& PlateModel::moment_matrix_pattern() {
  static const Mat9 p = moment_pattern();
  return p;
}

PlateModel::PlateModel(Grid grid, Materials materials, LoadSchedule schedule)
    : grid_(std::move(grid)), mat_(std::move(materials)), schedule_(std::move(schedule)),
      c0_(reduce_tensor(mat_.elasticity)) {
  if (grid_.nz() != 1 || !grid_.thickness().is_limit()) {
    throw ModelError("plate model needs a single-layer limit grid");
  }
  const Mat9& pat = moment_matrix_pattern();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) moments_.block<3, 3>(3 * a, 3 * b) = pat(3 * a, 3 * b) * c0_.voigt2;
  pinned_ = pinned_dofs(grid_, grid_.planar_size());

  const std::size_t np = grid_.planar_size();
  mode_strain_.assign(np, Vec9::Zero());
  if (schedule_.mode() != ModeKind::none) {
    const Grid g2 = grid_.with_layers(2, Thickness::of(1.0));
    const auto datum = DirichletDatum::sample(g2, mode_function(schedule_.mode()));
    const auto eps = symmetric_gradient(g2, datum.mode());
    for (std::size_t n = 0; n < np; ++n) {
      const Voigt3 e0 = to_voigt_strain2(eps[n].topLeftCorner<2, 2>());
      const Voigt3 e1 = to_voigt_strain2(eps[n + np].topLeftCorner<2, 2>());
      mode_strain_[n].segment<3>(0) = e0;
      mode_strain_[n].segment<3>(3) = e1 - e0;
    }
  }
}

std::vector<double> PlateModel::pack(const State& s) const {
  const std::size_t np = grid_.planar_size();
  if (s.v1.size() != np || s.v2.size() != np || s.v.size() != np) {
    throw ModelError("plate state size does not match the grid");
  }
  std::vector<double> x(3 * np);
  std::copy(s.v1.begin(), s.v1.end(), x.begin());
  std::copy(s.v2.begin(), s.v2.end(), x.begin() + np);
  std::copy(s.v.begin(), s.v.end(), x.begin() + 2 * np);
  return x;
}

PlateState PlateModel::make_state(std::span<const double> dofs, MagnetizationField m) const {
  const std::size_t np = grid_.planar_size();
  if (dofs.size() != 3 * np) throw ModelError("plate dof vector has the wrong size");
  return PlateState{component(dofs, np, 0), component(dofs, np, 1), component(dofs, np, 2),
                    std::move(m)};
}

PlateState PlateModel::zero_state(MagnetizationField m) const {
  return make_state(std::vector<double>(dof_count(), 0.0), std::move(m));
}

MagnetizationField PlateModel::make_field(std::vector<Vec3> values) const {
  return MagnetizationField(grid_, std::move(values), mat_.m_sat, true);
}

void PlateModel::linear_strain(std::span<const double> x, std::vector<Vec9>& out) const {
  const std::size_t np = grid_.planar_size();
  const auto v1 = x.subspan(0, np);
  const auto v2 = x.subspan(np, np);
  const auto v = x.subspan(2 * np, np);
  std::vector<double> d11(np), d21(np), d12(np), d22(np), p1(np), p2(np), q11(np), q22(np), q12(np);
  derivative(grid_, Axis::x, v1, d11);
  derivative(grid_, Axis::y, v1, d21);
  derivative(grid_, Axis::x, v2, d12);
  derivative(grid_, Axis::y, v2, d22);
  derivative(grid_, Axis::x, v, p1);
  derivative(grid_, Axis::y, v, p2);
  derivative(grid_, Axis::x, p1, q11);
  derivative(grid_, Axis::y, p2, q22);
  derivative(grid_, Axis::y, p1, q12);
  out.resize(np);
  for (std::size_t n = 0; n < np; ++n) {
    Vec9& X = out[n];
    X << d11[n], d22[n], d21[n] + d12[n], -q11[n], -q22[n], -2.0 * q12[n], 0.0, 0.0, 0.0;
  }
}

void PlateModel::linear_strain_adjoint(std::span<const Vec9> y, std::span<double> out) const {
  const std::size_t np = grid_.planar_size();
  std::vector<double> c(np), tmp(np);
  auto slot = [&](int s) {
    for (std::size_t n = 0; n < np; ++n) c[n] = y[n](s);
    return std::span<const double>(c);
  };
  auto o1 = out.subspan(0, np);
  auto o2 = out.subspan(np, np);
  auto ov = out.subspan(2 * np, np);
  derivative_adjoint_add(grid_, Axis::x, slot(0), o1);
  derivative_adjoint_add(grid_, Axis::y, slot(2), o1);
  derivative_adjoint_add(grid_, Axis::y, slot(1), o2);
  derivative_adjoint_add(grid_, Axis::x, slot(2), o2);
  // B = -(D1 D1 v, D2 D2 v, 2 D2 D1 v)
  const std::pair<Axis, Axis> second[3] = {{Axis::x, Axis::x}, {Axis::y, Axis::y}, {Axis::y, Axis::x}};
  for (int s = 0; s < 3; ++s) {
    const double f = s == 2 ? -2.0 : -1.0;
    for (std::size_t n = 0; n < np; ++n) c[n] = f * y[n](3 + s);
    std::fill(tmp.begin(), tmp.end(), 0.0);
    derivative_adjoint_add(grid_, second[s].first, c, tmp);
    derivative_adjoint_add(grid_, second[s].second, tmp, ov);
  }
}

std::vector<Vec9> PlateModel::generalized_strain(std::span<const double> dofs,
                                                 std::span<const Vec3> m, double lambda) const {
  const std::size_t np = grid_.planar_size();
  check_magnetization(grid_, m);
  if (dofs.size() != dof_count()) throw ModelError("plate dof vector has the wrong size");
  std::vector<Vec9> X;
  linear_strain(dofs, X);
  const double ms = mat_.m_sat;
  std::vector<double> t1(np), t2(np), g(np);
  for (std::size_t n = 0; n < np; ++n) {
    t1[n] = m[n](0) * m[n](2);
    t2[n] = m[n](1) * m[n](2);
    g[n] = m[n](2) * m[n](2) - ms * ms / 3.0;
  }
  std::vector<double> a(np), b(np), c(np), dg1(np), dg2(np), g11(np), g22(np), g12(np);
  derivative(grid_, Axis::x, t1, a);
  derivative(grid_, Axis::y, t2, b);
  std::vector<double> t1y(np), t2x(np);
  derivative(grid_, Axis::y, t1, t1y);
  derivative(grid_, Axis::x, t2, t2x);
  derivative(grid_, Axis::x, g, dg1);
  derivative(grid_, Axis::y, g, dg2);
  derivative(grid_, Axis::x, dg1, g11);
  derivative(grid_, Axis::y, dg2, g22);
  derivative(grid_, Axis::y, dg1, g12);
  for (std::size_t n = 0; n < np; ++n) {
    const Mat3 em = eps_mag_unchecked(m[n], ms);
    Vec9& Xn = X[n];
    Xn.segment<3>(0) += lambda * mode_strain_[n].segment<3>(0) -
                        Voigt3(em(0, 0), em(1, 1), 2.0 * em(0, 1));
    Xn.segment<3>(3) += 2.0 * Voigt3(a[n], b[n], t1y[n] + t2x[n]) + lambda * mode_strain_[n].segment<3>(3);
    Xn.segment<3>(6) += -0.5 * Voigt3(g11[n], g22[n], 2.0 * g12[n]);
  }
  return X;
}

double PlateModel::elastic_energy(std::span<const double> dofs, std::span<const Vec3> m,
                                  double lambda) const {
  const auto X = generalized_strain(dofs, m, lambda);
  const auto& w = grid_.weights();
  double e = 0.0;
  for (std::size_t n = 0; n < X.size(); ++n) e += w[n] * X[n].dot(moments_.lazyProduct(X[n]));
  return 0.5 * e / grid_.area();
}

void PlateModel::apply_hessian(std::span<const double> x, std::span<double> y) const {
  std::vector<double> xm(x.begin(), x.end());
  for (std::size_t d = 0; d < xm.size(); ++d)
    if (pinned_[d]) xm[d] = 0.0;
  std::vector<Vec9> X;
  linear_strain(xm, X);
  const auto& w = grid_.weights();
  const double inv_area = 1.0 / grid_.area();
  for (std::size_t n = 0; n < X.size(); ++n) X[n] = (w[n] * inv_area) * Vec9(moments_.lazyProduct(X[n]));
  std::fill(y.begin(), y.end(), 0.0);
  linear_strain_adjoint(X, y);
  for (std::size_t d = 0; d < y.size(); ++d)
    if (pinned_[d]) y[d] = 0.0;
}

std::vector<double> PlateModel::elastic_rhs(std::span<const Vec3> m, double lambda) const {
  const std::vector<double> zero(dof_count(), 0.0);
  auto X = generalized_strain(zero, m, lambda);
  const auto& w = grid_.weights();
  const double inv_area = 1.0 / grid_.area();
  for (std::size_t n = 0; n < X.size(); ++n) X[n] = (-w[n] * inv_area) * Vec9(moments_.lazyProduct(X[n]));
  std::vector<double> r(dof_count(), 0.0);
  linear_strain_adjoint(X, r);
  for (std::size_t d = 0; d < r.size(); ++d)
    if (pinned_[d]) r[d] = 0.0;
  return r;
}

EnergyBreakdown PlateModel::energy(double t, const State& s) const {
  if (!s.m.grid().same_layout(grid_)) throw ModelError("plate state grid does not match the model");
  const LoadValues load = schedule_.at(t);
  const auto m = s.m.values();
  const auto x = pack(s);
  EnergyBreakdown e;
  e.exchange = exchange_energy(grid_, m, mat_.alpha, 0.0);
  e.anisotropy = anisotropy_reported(grid_, mat_.anisotropy, Thickness::limit(), mat_.m_sat, m);
  e.stray = stray_energy_limit(s.m);
  e.zeeman = zeeman_terms(grid_, m, load.field, nullptr);
  e.elastic = elastic_energy(x, m, load.lambda);
  finish(e);
  return e;
}

double PlateModel::power(double t, const State& s, bool right) const {
  const LoadValues load = schedule_.at(t);
  const LoadValues rate = schedule_.rate(t, right);
  const auto m = s.m.values();
  double p = zeeman_terms(grid_, m, rate.field, nullptr);
  if (rate.lambda != 0.0) {
    const auto X = generalized_strain(pack(s), m, load.lambda);
    const auto& w = grid_.weights();
    double acc = 0.0;
    for (std::size_t n = 0; n < X.size(); ++n) acc += w[n] * X[n].dot(moments_.lazyProduct(mode_strain_[n]));
    p += rate.lambda * acc / grid_.area();
  }
  return p;
}

double PlateModel::dissipation(const MagnetizationField& a, const MagnetizationField& b) const {
  return dissipation_distance(a, b, Thickness::limit(), mat_.dissipation);
}

MagneticTerms PlateModel::magnetic_terms(std::span<const double> dofs, std::span<const Vec3> m,
                                         const LoadValues& load, bool with_gradient) const {
  check_magnetization(grid_, m);
  const std::size_t np = grid_.planar_size();
  MagneticTerms out;
  std::vector<Vec3>* grad = nullptr;
  if (with_gradient) {
    out.gradient.assign(np, Vec3::Zero());
    grad = &out.gradient;
  }
  const auto& w = grid_.weights();
  const double inv_area = 1.0 / grid_.area();
  double v = exchange_energy(grid_, m, mat_.alpha, 0.0, grad);
  v += anisotropy_terms(grid_, mat_.anisotropy, Thickness::limit(), mat_.m_sat, m, grad);
  v += zeeman_terms(grid_, m, load.field, grad);
  double stray = 0.0;
  for (std::size_t n = 0; n < np; ++n) {
    stray += w[n] * 0.5 * m[n](2) * m[n](2);
    if (grad) (*grad)[n](2) += w[n] * inv_area * m[n](2);
  }
  v += stray * inv_area;

  const auto X = generalized_strain(dofs, m, load.lambda);
  double el = 0.0;
  std::vector<Vec9> Y(np);
  for (std::size_t n = 0; n < np; ++n) {
    const Vec9 mx = moments_.lazyProduct(X[n]);
    el += w[n] * X[n].dot(mx);
    Y[n] = (w[n] * inv_area) * mx;
  }
  v += 0.5 * el * inv_area;
  out.value = v;
  if (!grad) return out;

  std::vector<double> gt1(np, 0.0), gt2(np, 0.0), gg(np, 0.0), c(np), tmp(np);
  auto slot = [&](int s, double f) {
    for (std::size_t n = 0; n < np; ++n) c[n] = f * Y[n](s);
    return std::span<const double>(c);
  };
  derivative_adjoint_add(grid_, Axis::x, slot(3, 2.0), gt1);
  derivative_adjoint_add(grid_, Axis::y, slot(5, 2.0), gt1);
  derivative_adjoint_add(grid_, Axis::y, slot(4, 2.0), gt2);
  derivative_adjoint_add(grid_, Axis::x, slot(5, 2.0), gt2);
  const std::pair<Axis, Axis> second[3] = {{Axis::x, Axis::x}, {Axis::y, Axis::y}, {Axis::y, Axis::x}};
  for (int s = 0; s < 3; ++s) {
    slot(6 + s, s == 2 ? -1.0 : -0.5);
    std::fill(tmp.begin(), tmp.end(), 0.0);
    derivative_adjoint_add(grid_, second[s].first, c, tmp);
    derivative_adjoint_add(grid_, second[s].second, tmp, gg);
  }
  for (std::size_t n = 0; n < np; ++n) {
    const Vec3& mn = m[n];
    const Vec9& y = Y[n];
    Vec3& gn = (*grad)[n];
    gn(0) += -(2.0 * mn(0) * y(0) + 2.0 * mn(1) * y(2)) + mn(2) * gt1[n];
    gn(1) += -(2.0 * mn(1) * y(1) + 2.0 * mn(0) * y(2)) + mn(2) * gt2[n];
    gn(2) += mn(0) * gt1[n] + mn(1) * gt2[n] + 2.0 * mn(2) * gg[n];
  }
  return out;
}

const ElasticFactor& PlateModel::factor() const {
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  if (!factor_) factor_ = ElasticFactor::build(*this, 8);
  return *factor_;
}

// ---------------------------------------------------------------- bulk

BulkModel::BulkModel(Grid grid, Materials materials, LoadSchedule schedule, StrayOptions stray)
    : grid_(std::move(grid)), mat_(std::move(materials)), schedule_(std::move(schedule)),
      stray_(stray) {
  if (grid_.thickness().is_limit() || grid_.nz() < 2) {
    throw ModelError("bulk model needs a finite thickness and nz >= 2");
  }
  inv_h_ = 1.0 / grid_.thickness().value();
  pinned_ = pinned_dofs(grid_, grid_.size());
  std::vector<double> mode(dof_count(), 0.0);
  if (schedule_.mode() != ModeKind::none) {
    const auto datum = DirichletDatum::sample(grid_, mode_function(schedule_.mode()));
    const std::size_t N = grid_.size();
    for (std::size_t n = 0; n < N; ++n)
      for (int c = 0; c < 3; ++c) mode[c * N + n] = datum.mode()[n](c);
  }
  linear_strain(mode, mode_strain_);
}

std::vector<double> BulkModel::pack(const State& s) const {
  const std::size_t N = grid_.size();
  if (s.u.size() != N) throw ModelError("bulk state size does not match the grid");
  std::vector<double> x(3 * N);
  for (std::size_t n = 0; n < N; ++n)
    for (int c = 0; c < 3; ++c) x[c * N + n] = s.u[n](c);
  return x;
}

BulkState BulkModel::make_state(std::span<const double> dofs, MagnetizationField m) const {
  const std::size_t N = grid_.size();
  if (dofs.size() != 3 * N) throw ModelError("bulk dof vector has the wrong size");
  std::vector<Vec3> u(N);
  for (std::size_t n = 0; n < N; ++n) u[n] = Vec3(dofs[n], dofs[N + n], dofs[2 * N + n]);
  return BulkState{std::move(u), std::move(m)};
}

BulkState BulkModel::zero_state(MagnetizationField m) const {
  return make_state(std::vector<double>(dof_count(), 0.0), std::move(m));
}

MagnetizationField BulkModel::make_field(std::vector<Vec3> values) const {
  return MagnetizationField(grid_, std::move(values), mat_.m_sat, false);
}

void BulkModel::linear_strain(std::span<const double> x, std::vector<Voigt6>& out) const {
  const std::size_t N = grid_.size();
  // d[a][b] = D_b u_a
  std::array<std::array<std::vector<double>, 3>, 3> d;
  for (int a = 0; a < 3; ++a) {
    const auto ua = x.subspan(a * N, N);
    for (int b = 0; b < 3; ++b) {
      d[a][b].resize(N);
      derivative(grid_, static_cast<Axis>(b), ua, d[a][b]);
    }
  }
  const double ih = inv_h_;
  out.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    out[n] << d[0][0][n], d[1][1][n], ih * ih * d[2][2][n], ih * (d[1][2][n] + d[2][1][n]),
        ih * (d[0][2][n] + d[2][0][n]), d[0][1][n] + d[1][0][n];
  }
}

void BulkModel::linear_strain_adjoint(std::span<const Voigt6> y, std::span<double> out) const {
  const std::size_t N = grid_.size();
  const double ih = inv_h_;
  std::vector<double> c(N);
  auto add = [&](int comp, Axis axis, int s, double f) {
    for (std::size_t n = 0; n < N; ++n) c[n] = f * y[n](s);
    derivative_adjoint_add(grid_, axis, c, out.subspan(comp * N, N));
  };
  add(0, Axis::x, 0, 1.0);
  add(0, Axis::z, 4, ih);
  add(0, Axis::y, 5, 1.0);
  add(1, Axis::y, 1, 1.0);
  add(1, Axis::z, 3, ih);
  add(1, Axis::x, 5, 1.0);
  add(2, Axis::z, 2, ih * ih);
  add(2, Axis::y, 3, ih);
  add(2, Axis::x, 4, ih);
}

Voigt6 BulkModel::scaled_eps_mag(const Vec3& m) const {
  const Mat3 e = eps_mag_unchecked(m, mat_.m_sat);
  const double ih = inv_h_;
  Voigt6 v;
  v << e(0, 0), e(1, 1), ih * ih * e(2, 2), 2.0 * ih * e(1, 2), 2.0 * ih * e(0, 2), 2.0 * e(0, 1);
  return v;
}

std::vector<Voigt6> BulkModel::mismatch(std::span<const double> dofs, std::span<const Vec3> m,
                                        double lambda) const {
  check_magnetization(grid_, m);
  if (dofs.size() != dof_count()) throw ModelError("bulk dof vector has the wrong size");
  std::vector<Voigt6> X;
  linear_strain(dofs, X);
  for (std::size_t n = 0; n < X.size(); ++n) X[n] += lambda * mode_strain_[n] - scaled_eps_mag(m[n]);
  return X;
}

double BulkModel::elastic_energy(std::span<const double> dofs, std::span<const Vec3> m,
                                 double lambda) const {
  const auto X = mismatch(dofs, m, lambda);
  const auto& w = grid_.weights();
  const Mat6& C = mat_.elasticity.voigt();
  double e = 0.0;
  for (std::size_t n = 0; n < X.size(); ++n) e += w[n] * X[n].dot(C * X[n]);
  return 0.5 * e / grid_.area();
}

void BulkModel::apply_hessian(std::span<const double> x, std::span<double> y) const {
  std::vector<double> xm(x.begin(), x.end());
  for (std::size_t d = 0; d < xm.size(); ++d)
    if (pinned_[d]) xm[d] = 0.0;
  std::vector<Voigt6> X;
  linear_strain(xm, X);
  const auto& w = grid_.weights();
  const Mat6& C = mat_.elasticity.voigt();
  const double inv_area = 1.0 / grid_.area();
  for (std::size_t n = 0; n < X.size(); ++n) X[n] = (w[n] * inv_area) * (C * X[n]);
  std::fill(y.begin(), y.end(), 0.0);
  linear_strain_adjoint(X, y);
  for (std::size_t d = 0; d < y.size(); ++d)
    if (pinned_[d]) y[d] = 0.0;
}

std::vector<double> BulkModel::elastic_rhs(std::span<const Vec3> m, double lambda) const {
  const std::vector<double> zero(dof_count(), 0.0);
  auto X = mismatch(zero, m, lambda);
  const auto& w = grid_.weights();
  const Mat6& C = mat_.elasticity.voigt();
  const double inv_area = 1.0 / grid_.area();
  for (std::size_t n = 0; n < X.size(); ++n) X[n] = (-w[n] * inv_area) * (C * X[n]);
  std::vector<double> r(dof_count(), 0.0);
  linear_strain_adjoint(X, r);
  for (std::size_t d = 0; d < r.size(); ++d)
    if (pinned_[d]) r[d] = 0.0;
  return r;
}

EnergyBreakdown BulkModel::energy(double t, const State& s) const {
  if (!s.m.grid().same_layout(grid_)) throw ModelError("bulk state grid does not match the model");
  const LoadValues load = schedule_.at(t);
  const auto m = s.m.values();
  EnergyBreakdown e;
  e.exchange = exchange_energy(grid_, m, mat_.alpha, inv_h_ * inv_h_);
  e.anisotropy = anisotropy_reported(grid_, mat_.anisotropy, grid_.thickness(), mat_.m_sat, m);
  e.stray = solve_stray_fft(s.m, stray_).energy;
  e.zeeman = zeeman_terms(grid_, m, load.field, nullptr);
  e.elastic = elastic_energy(pack(s), m, load.lambda);
  finish(e);
  return e;
}

double BulkModel::power(double t, const State& s, bool right) const {
  const LoadValues load = schedule_.at(t);
  const LoadValues rate = schedule_.rate(t, right);
  const auto m = s.m.values();
  double p = zeeman_terms(grid_, m, rate.field, nullptr);
  if (rate.lambda != 0.0) {
    const auto X = mismatch(pack(s), m, load.lambda);
    const auto& w = grid_.weights();
    const Mat6& C = mat_.elasticity.voigt();
    double acc = 0.0;
    for (std::size_t n = 0; n < X.size(); ++n) acc += w[n] * X[n].dot(C * mode_strain_[n]);
    p += rate.lambda * acc / grid_.area();
  }
  return p;
}

double BulkModel::dissipation(const MagnetizationField& a, const MagnetizationField& b) const {
  return dissipation_distance(a, b, grid_.thickness(), mat_.dissipation);
}

MagneticTerms BulkModel::magnetic_terms(std::span<const double> dofs, std::span<const Vec3> m,
                                        const LoadValues& load, bool with_gradient) const {
  check_magnetization(grid_, m);
  const std::size_t N = grid_.size();
  MagneticTerms out;
  std::vector<Vec3>* grad = nullptr;
  if (with_gradient) {
    out.gradient.assign(N, Vec3::Zero());
    grad = &out.gradient;
  }
  const auto& w = grid_.weights();
  const double inv_area = 1.0 / grid_.area();
  double v = exchange_energy(grid_, m, mat_.alpha, inv_h_ * inv_h_, grad);
  v += anisotropy_terms(grid_, mat_.anisotropy, grid_.thickness(), mat_.m_sat, m, grad);
  v += zeeman_terms(grid_, m, load.field, grad);

  const auto stray = solve_stray_fft(make_field(std::vector<Vec3>(m.begin(), m.end())), stray_);
  v += stray.energy;
  if (grad) {
    for (std::size_t n = 0; n < N; ++n) (*grad)[n] -= w[n] * inv_area * stray.hfield[n];
  }

  const auto X = mismatch(dofs, m, load.lambda);
  const Mat6& C = mat_.elasticity.voigt();
  const double ih = inv_h_;
  double el = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const Voigt6 cx = C * X[n];
    el += w[n] * X[n].dot(cx);
    if (grad) {
      const Voigt6 y = (w[n] * inv_area) * cx;
      const Vec3& mn = m[n];
      Vec3& gn = (*grad)[n];
      gn(0) -= 2.0 * mn(0) * y(0) + 2.0 * ih * mn(2) * y(4) + 2.0 * mn(1) * y(5);
      gn(1) -= 2.0 * mn(1) * y(1) + 2.0 * ih * mn(2) * y(3) + 2.0 * mn(0) * y(5);
      gn(2) -= 2.0 * ih * ih * mn(2) * y(2) + 2.0 * ih * mn(1) * y(3) + 2.0 * ih * mn(0) * y(4);
    }
  }
  v += 0.5 * el * inv_area;
  out.value = v;
  return out;
}

const ElasticFactor& BulkModel::factor() const {
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  if (!factor_) factor_ = ElasticFactor::build(*this, 4);
  return *factor_;
}

// ---------------------------------------------------------------- factorization

struct ElasticFactor::Impl {
  std::vector<std::ptrdiff_t> free_index;  // dof -> free slot or -1
  std::vector<std::size_t> free_dofs;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

ElasticFactor::ElasticFactor() : impl_(std::make_unique<Impl>()) {}
ElasticFactor::~ElasticFactor() = default;

template <class Model>
std::shared_ptr<const ElasticFactor> ElasticFactor::build(const Model& model, int radius) {
  const Grid& g = model.grid();
  const std::size_t ndof = model.dof_count();
  const std::size_t nodes = ndof / 3;
  const auto& pinned = model.pinned();
  std::shared_ptr<ElasticFactor> f(new ElasticFactor());
  Impl& im = *f->impl_;
  im.free_index.assign(ndof, -1);
  for (std::size_t d = 0; d < ndof; ++d) {
    if (!pinned[d]) {
      im.free_index[d] = static_cast<std::ptrdiff_t>(im.free_dofs.size());
      im.free_dofs.push_back(d);
    }
  }
  const int counts[3] = {g.nx(), g.ny(), g.nz()};
  int period[3];
  for (int a = 0; a < 3; ++a) period[a] = std::min(counts[a], 2 * radius + 1);
  auto coords = [&](std::size_t node, int* c) {
    c[0] = static_cast<int>(node % g.nx());
    c[1] = static_cast<int>((node / g.nx()) % g.ny());
    c[2] = static_cast<int>(node / (static_cast<std::size_t>(g.nx()) * g.ny()));
  };
  // Unique coloured coordinate within `radius` of c along an axis.
  auto owner = [&](int c, int residue, int a) {
    if (period[a] == counts[a]) return residue;
    const int p = period[a];
    const int base = c - (((c - residue) % p) + p) % p;
    return c - base <= radius ? base : base + p;
  };

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> x(ndof), y(ndof);
  double max_diag = 0.0;
  for (int comp = 0; comp < 3; ++comp)
    for (int rz = 0; rz < period[2]; ++rz)
      for (int ry = 0; ry < period[1]; ++ry)
        for (int rx = 0; rx < period[0]; ++rx) {
          std::fill(x.begin(), x.end(), 0.0);
          bool any = false;
          for (std::size_t n = 0; n < nodes; ++n) {
            int c[3];
            coords(n, c);
            if (c[0] % period[0] != rx || c[1] % period[1] != ry || c[2] % period[2] != rz) continue;
            const std::size_t d = comp * nodes + n;
            if (pinned[d]) continue;
            x[d] = 1.0;
            any = true;
          }
          if (!any) continue;
          model.apply_hessian(x, y);
          for (std::size_t r = 0; r < ndof; ++r) {
            if (y[r] == 0.0 || pinned[r]) continue;
            int c[3];
            coords(r % nodes, c);
            const int cx = owner(c[0], rx, 0), cy = owner(c[1], ry, 1), cz = owner(c[2], rz, 2);
            if (cx >= counts[0] || cy >= counts[1] || cz >= counts[2]) continue;
            const std::size_t col = comp * nodes + g.index(cx, cy, cz);
            if (pinned[col]) continue;
            triplets.emplace_back(im.free_index[r], im.free_index[col], y[r]);
            if (r == col) max_diag = std::max(max_diag, y[r]);
          }
        }
  const auto nfree = static_cast<Eigen::Index>(im.free_dofs.size());
  const double shift = 1e-10 * max_diag;
  for (Eigen::Index i = 0; i < nfree; ++i) triplets.emplace_back(i, i, shift);
  Eigen::SparseMatrix<double> K(nfree, nfree);
  K.setFromTriplets(triplets.begin(), triplets.end());
  im.ldlt.compute(K);
  if (im.ldlt.info() != Eigen::Success) throw ModelError("elastic preconditioner factorization failed");
  return f;
}

template std::shared_ptr<const ElasticFactor> ElasticFactor::build(const PlateModel&, int);
template std::shared_ptr<const ElasticFactor> ElasticFactor::build(const BulkModel&, int);

void ElasticFactor::solve(std::span<const double> r, std::span<double> z) const {
  const Impl& im = *impl_;
  Eigen::VectorXd b(static_cast<Eigen::Index>(im.free_dofs.size()));
  for (std::size_t i = 0; i < im.free_dofs.size(); ++i) b(static_cast<Eigen::Index>(i)) = r[im.free_dofs[i]];
  const Eigen::VectorXd s = im.ldlt.solve(b);
  std::fill(z.begin(), z.end(), 0.0);
  for (std::size_t i = 0; i < im.free_dofs.size(); ++i) z[im.free_dofs[i]] = s(static_cast<Eigen::Index>(i));
}

// ---------------------------------------------------------------- free functions

EnergyBreakdown energy_plate(double t, const PlateState& state, const LoadSchedule& schedule,
                             const Materials& materials) {
  return PlateModel(state.m.grid(), materials, schedule).energy(t, state);
}

EnergyBreakdown energy_bulk(double t, const BulkState& state, const LoadSchedule& schedule,
                            const Materials& materials, const StrayOptions& stray) {
  return BulkModel(state.m.grid(), materials, schedule, stray).energy(t, state);
}

double dissipation_distance(const MagnetizationField& a, const MagnetizationField& b, Thickness h,
                            const DissipationParams& params) {
  if (!a.grid().same_layout(b.grid())) throw ModelError("dissipation_distance: grid mismatch");
  if (h.is_limit() && !(a.planar_only() && b.planar_only())) {
    throw ModelError("dissipation_distance: limit distance needs planar-only fields");
  }
  const auto& w = a.grid().weights();
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d += w[n] * dissipation_density(params, h, a[n] - b[n]);
  return d / a.grid().area();
}

double trajectory_dissipation(std::span<const MagnetizationField> snapshots, Thickness h,
                              const DissipationParams& params) {
  if (snapshots.empty()) throw ModelError("trajectory_dissipation: no snapshots");
  double total = 0.0;
  for (std::size_t k = 1; k < snapshots.size(); ++k) {
    total += dissipation_distance(snapshots[k - 1], snapshots[k], h, params);
  }
  return total;
}

BalanceSeries balance_residual(std::span<const double> times, std::span<const double> energy,
                               std::span<const double> diss_cum,
                               std::span<const double> power_right,
                               std::span<const double> power_left) {
  const std::size_t n = times.size();
  if (energy.size() != n || diss_cum.size() != n || power_right.size() != n || power_left.size() != n) {
    throw ModelError("balance_residual: series lengths differ");
  }
  BalanceSeries out;
  out.residual.assign(n, 0.0);
  double work = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    work += 0.5 * (power_right[k - 1] + power_left[k]) * (times[k] - times[k - 1]);
    out.residual[k] = energy[k] + diss_cum[k] - energy[0] - work;
    out.max_abs = std::max(out.max_abs, std::abs(out.residual[k]));
  }
  return out;
}

}  // namespace magfilm
