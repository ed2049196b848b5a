// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include "magfilm/harness.hpp"
#include "oracles.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

using namespace magfilm;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

RunConfig config(const std::string& name) { return load_config(std::filesystem::path(MAGFILM_CONFIG_DIR) / name); }

PlateState initial_plate(const PlateModel& model, const Vec3& dir, const SolverConfig& s) {
  auto m = model.make_field(std::vector<Vec3>(model.grid().size(), model.materials().m_sat * dir.normalized()));
  const auto sol = elastic_solve(model, m.values(), model.schedule().at(0.0).lambda, s);
  return model.make_state(sol.dofs, std::move(m));
}

TrajectoryRecord<PlateModel> run_plate(const RunConfig& cfg, const LoadSchedule& schedule, int steps, bool audit) {
  SolverConfig s = cfg.solver;
  s.audit_each_step = audit;
  const PlateModel model(make_grid(cfg, ModelKind::plate), cfg.materials(), schedule);
  return evolve(model, initial_plate(model, cfg.initial_axis(), s), uniform_partition(schedule.horizon(), steps), s);
}

Eigen::Matrix2d random_sym2(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix2d a;
  a(0, 0) = n(rng), a(1, 1) = n(rng), a(0, 1) = a(1, 0) = n(rng);
  return a;
}

Outcome plane_reduction() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Mat6 b;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) b(i, j) = n(rng);
    const Mat6 v = b * b.transpose() + 0.1 * Mat6::Identity();
    const auto c = ElasticityTensor::from_voigt(v);
    const auto a = random_sym2(rng);
    const double ref = oracle::brute_force_Q(v, a);
    const double scale = 1.0 + a.squaredNorm();
    const auto r = reduce_tensor(c);
    worst = std::max(worst, std::abs(r.contract(to_voigt_strain2(a), to_voigt_strain2(a)) - ref) / scale);
    worst = std::max(worst, std::abs(quadratic_form_Q(c, a).value - ref) / scale);
  }
  const double c1111 = reduce_tensor(ElasticityTensor::isotropic(1.0, 1.0)).component(0, 0, 0, 0);
  return {worst <= 1e-10 && std::abs(c1111 - 8.0 / 3.0) <= 1e-12,
          fmt::format("max |dQ|/(1+|A|^2) = {:.2e}, C0_1111 = {:.15f}", worst, c1111)};
}

Outcome stray_limit() {
  const auto cfg = config("stray_diag.yaml");
  const auto rows = run_stray_diag(cfg);
  bool decreasing = rows.size() == 4;
  for (std::size_t k = 1; k < rows.size(); ++k) decreasing = decreasing && rows[k].gap < rows[k - 1].gap;
  const double rel = rows.back().gap / (0.5 * cfg.m_sat * cfg.m_sat);
  std::string gaps;
  for (const auto& r : rows) gaps += fmt::format("{}{:.4f}", gaps.empty() ? "" : " ", r.gap);
  return {decreasing && rel <= 0.15 && cfg.geometry.nx >= 32 && cfg.geometry.ny >= 32,
          fmt::format("{}x{} grid, gaps [{}], final relative gap {:.3f}", cfg.geometry.nx, cfg.geometry.ny, gaps, rel)};
}

Outcome cube_factor() {
  const Grid g = Grid::bulk(17, 17, 17, 1.0, 1.0, 1.0);
  const double e = solve_stray_fft(MagnetizationField::uniform(g, Vec3::UnitZ(), 1.0)).energy;
  const double n3 = 2.0 * e;
  return {std::abs(n3 - 1.0 / 3.0) <= 0.02 / 3.0, fmt::format("N3 = {:.5f} on a 17^3 node grid", n3)};
}

Outcome energy_balance() {
  auto cfg = config("hysteresis.yaml");
  const auto r20 = run_plate(cfg, cfg.schedule, 20, false).max_residual;
  const auto r40 = run_plate(cfg, cfg.schedule, 40, false).max_residual;
  auto free = config("hysteresis_no_dissipation.yaml");
  std::vector<double> lx, ly;
  std::string series;
  for (int steps : {20, 40, 80, 160}) {
    const double r = run_plate(free, free.schedule, steps, false).max_residual;
    lx.push_back(std::log(1.0 / steps));
    ly.push_back(std::log(r));
    series += fmt::format("{}{:.3e}", series.empty() ? "" : " ", r);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k] / lx.size(), my += ly[k] / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) sxy += (lx[k] - mx) * (ly[k] - my), sxx += (lx[k] - mx) * (lx[k] - mx);
  const double slope = sxy / sxx;
  return {r40 < r20 && slope >= 0.9,
          fmt::format("R>0: {:.3e} -> {:.3e}; R=0: [{}], slope {:.3f}", r20, r40, series, slope)};
}

Outcome rate_independence() {
  const auto cfg = config("hysteresis.yaml");
  const auto a = run_plate(cfg, cfg.schedule, cfg.steps, false);
  const auto b = run_plate(cfg, cfg.schedule.scaled_in_time(2.0), cfg.steps, false);
  bool same = a.states.size() == b.states.size();
  std::size_t differing = 0;
  for (std::size_t k = 0; same && k < a.states.size(); ++k) {
    const auto& x = a.states[k];
    const auto& y = b.states[k];
    bool eq = x.v1 == y.v1 && x.v2 == y.v2 && x.v == y.v;
    for (std::size_t n = 0; n < x.m.size(); ++n) eq = eq && x.m[n] == y.m[n];
    if (!eq) ++differing;
  }
  same = same && differing == 0;
  return {same, fmt::format("{} states compared bitwise, {} differ", a.states.size(), differing)};
}

Outcome stability() {
  const auto cfg = config("hysteresis.yaml");
  const auto rec = run_plate(cfg, cfg.schedule, cfg.steps, true);
  bool ok = rec.audits.size() == rec.states.size();
  double worst = -kInfinity, ratio = 0.0;
  int samples = std::numeric_limits<int>::max();
  for (std::size_t k = 0; k < rec.audits.size(); ++k) {
    const auto& a = rec.audits[k];
    const double tol = 1e-6 * (1.0 + std::abs(rec.energies[k].total));
    ok = ok && a.worst <= tol;
    worst = std::max(worst, a.worst);
    ratio = std::max(ratio, a.worst / tol);
    samples = std::min(samples, a.samples);
  }
  ok = ok && samples >= 200;
  return {ok, fmt::format("{} audits, >= {} competitors each, worst violation {:.2e} ({:.2e} of tolerance)",
                          rec.audits.size(), samples, worst, ratio)};
}

Outcome gamma_sweep() {
  const auto rows = run_gamma_sweep(config("gamma_sweep.yaml"));
  auto monotone = [&](auto field) {
    for (std::size_t k = 1; k < rows.size(); ++k)
      if (field(rows[k]) > 1.1 * field(rows[k - 1])) return false;
    return true;
  };
  const bool gap = monotone([](const SweepRow& r) { return r.gap; });
  const bool stray = monotone([](const SweepRow& r) { return r.stray_gap; });
  const bool fixed_elastic = monotone([](const SweepRow& r) { return r.fixed_elastic_gap; });
  const bool fixed_stray = monotone([](const SweepRow& r) { return r.fixed_stray_gap; });
  std::string table;
  for (const auto& r : rows) {
    table += fmt::format("{}h={} gap={:.4f} elastic_gap={:.2e} stray_gap={:.2e} fixed_elastic_gap={:.2e}",
                         table.empty() ? "" : "; ", r.h, r.gap, r.elastic_gap, r.stray_gap, r.fixed_elastic_gap);
  }
  return {rows.size() == 4 && gap && stray && fixed_elastic && fixed_stray, table};
}

Outcome dissipation_structure() {
  const Grid g = Grid::plate(5, 5, 1.0, 1.0);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const auto params = DissipationParams::make(0.7, OffplaneYield::linear(0.4, 0.3));
  auto field = [&] {
    std::vector<Vec3> v(g.size());
    for (auto& x : v) x = Vec3(n(rng), n(rng), n(rng));
    return project_sphere(g, v, 1.3);
  };
  double worst = 0.0;
  for (const auto h : {Thickness::limit(), Thickness::of(0.5)}) {
    for (int k = 0; k < 500; ++k) {
      const auto a = field(), b = field(), c = field();
      const double ab = dissipation_distance(a, b, h, params);
      worst = std::max(worst, std::abs(ab - dissipation_distance(b, a, h, params)));
      worst = std::max(worst, ab - dissipation_distance(a, c, h, params) - dissipation_distance(c, b, h, params));
      const Vec3 dm(n(rng), n(rng), n(rng));
      const double s = u(rng);
      worst = std::max(worst, std::abs(dissipation_density(params, h, s * dm) - s * dissipation_density(params, h, dm)));
    }
  }
  const auto hyst = config("hysteresis.yaml");
  const double diss = run_plate(hyst, hyst.schedule, hyst.steps, false).diss_cum.back();
  const auto free = config("hysteresis_no_dissipation.yaml");
  const auto rec = run_plate(free, free.schedule, free.steps, false);
  double free_max = 0.0;
  for (double d : rec.diss_cum) free_max = std::max(free_max, std::abs(d));
  return {worst <= 1e-12 && diss > 0.0 && free_max == 0.0,
          fmt::format("1000 pairs/triples worst slack {:.2e}; diss_cum {:.4f} (R>0), max {:.1e} (R=0)", worst, diss,
                      free_max)};
}

Outcome lifting() {
  // m from spherical angles, so every derivative of the lift is known in closed form.
  auto theta = [](const Vec3& x) { return 0.6 * std::sin(2.0 * x(0)) + 0.3 * x(1); };
  auto phi = [](const Vec3& x) { return 0.5 * x(0) * x(1); };
  auto theta_d = [](const Vec3& x, int i) { return i == 0 ? 1.2 * std::cos(2.0 * x(0)) : 0.3; };
  auto v = [](const Vec3& x) { return 0.2 * std::sin(x(0)) * std::cos(x(1)); };
  auto v_d = [](const Vec3& x, int i) {
    return i == 0 ? 0.2 * std::cos(x(0)) * std::cos(x(1)) : -0.2 * std::sin(x(0)) * std::sin(x(1));
  };
  std::vector<double> errors;
  for (int nx : {9, 17, 33}) {
    const Grid p = Grid::plate(nx, nx, 1.0, 1.0);
    const Grid b = p.with_layers(3, Thickness::of(0.5));
    std::vector<Vec3> m(p.size());
    std::vector<double> vv(p.size()), v1(p.size()), v2(p.size());
    for (std::size_t n = 0; n < p.size(); ++n) {
      const Vec3 x = p.position(n);
      const double th = theta(x), ph = phi(x);
      m[n] = Vec3(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), std::sin(th));
      vv[n] = v(x);
      v1[n] = std::cos(x(1));
      v2[n] = x(0) * x(1);
    }
    const PlateState s{v1, v2, vv, MagnetizationField(p, m, 1.0, true)};
    const auto u = lift_displacement(s, b);
    const auto dz = oracle::derivative_matrix(3, 0.5);
    double err = 0.0;
    for (std::size_t n = 0; n < b.size(); ++n) {
      const std::size_t q = b.planar_index(n);
      const Vec3 x = b.position(n);
      const int k = b.layer(n);
      Vec3 uz = Vec3::Zero();
      for (int l = 0; l < 3; ++l) uz += dz(k, l) * u[q + l * p.size()];
      const double th = theta(x);
      for (int i = 0; i < 2; ++i) {
        // d_i (v + z g) with g = sin^2(theta) - 1/3
        const double du3 = v_d(x, i) + x(2) * std::sin(2.0 * th) * theta_d(x, i);
        err = std::max(err, std::abs(0.5 * (uz(i) + du3) - m[q](i) * m[q](2)));
      }
      err = std::max(err, std::abs(uz(2) - (m[q](2) * m[q](2) - 1.0 / 3.0)));
    }
    errors.push_back(err);
  }
  const double o1 = std::log2(errors[0] / errors[1]), o2 = std::log2(errors[1] / errors[2]);
  return {std::min(o1, o2) >= 1.9,
          fmt::format("max errors {:.3e} {:.3e} {:.3e}, orders {:.3f} {:.3f}", errors[0], errors[1], errors[2], o1, o2)};
}

Materials oracle_materials() {
  Materials mat;
  mat.m_sat = 1.0;
  mat.alpha = 0.1;
  mat.elasticity = ElasticityTensor::isotropic(0.5, 0.4);
  mat.anisotropy = AnisotropyModel::uniaxial(0.3, 0.8, Vec3::UnitX(), ThicknessScaling::constant(1.0));
  mat.dissipation = DissipationParams::make(0.02, OffplaneYield::constant(0.02));
  return mat;
}

oracle::Physics oracle_physics(const Materials& mat, const Vec3& h, double lambda) {
  oracle::Physics p;
  p.m_sat = mat.m_sat;
  p.alpha = mat.alpha;
  p.c = mat.elasticity.voigt();
  p.k_p = 0.3;
  p.k_3 = 0.8;
  p.axis = Vec3::UnitX();
  p.r_p = p.r_3 = 0.02;
  p.field = h;
  p.lambda = lambda;
  p.mode = 1;
  return p;
}

// Quadratic form of the stray energy, probed column by column from the FFT field.
Eigen::MatrixXd stray_hessian(const Grid& g, double ms) {
  const int n = static_cast<int>(g.size());
  Eigen::MatrixXd s(3 * n, 3 * n);
  std::vector<Vec3> base(n, ms * Vec3::UnitX());
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < 3; ++c) {
      auto plus = base, minus = base;
      plus[j] = ms * Vec3::Unit(c);
      minus[j] = -ms * Vec3::Unit(c);
      const auto hp = solve_stray_fft(MagnetizationField(g, plus, ms, false)).hfield;
      const auto hm = solve_stray_fft(MagnetizationField(g, minus, ms, false)).hfield;
      for (int i = 0; i < n; ++i)
        s.block<3, 1>(3 * i, 3 * j + c) = -g.weights()[i] * (hp[i] - hm[i]) / (2.0 * ms * g.area());
    }
  return 0.5 * (s + s.transpose());
}

template <class Model>
std::pair<double, double> compare(const Model& model, const oracle::DenseProblem& dense, const Vec3& tilt) {
  const auto prev = model.make_field(std::vector<Vec3>(model.grid().size(), tilt.normalized()));
  const auto r = incremental_step(model, model.make_state(std::vector<double>(model.dof_count(), 0.0), prev), 0.5,
                                  SolverConfig{});
  const std::vector<Vec3> pv(prev.values().begin(), prev.values().end());
  const auto ref = dense.alternate(pv, pv);
  return {r.objective, ref.objective};
}

Outcome solver_oracle() {
  const Materials mat = oracle_materials();
  const Vec3 h(2.5, 1.0, 0.2);
  const double lambda = 0.05;
  const Vec3 tilt(0.6, -0.3, 0.7);

  const Grid pg = Grid::plate(5, 5, 1.0, 1.0);
  const PlateModel plate(pg, mat, LoadSchedule::constant(1.0, lambda, h, ModeKind::stretch));
  const oracle::DenseProblem dense_plate({5, 5, 1, 1.0, 1.0, 0.0, 0}, oracle_physics(mat, h, lambda));
  const auto [jp, rp] = compare(plate, dense_plate, tilt);

  const Grid bg = Grid::bulk(4, 4, 3, 1.0, 1.0, 0.5);
  const BulkModel bulk(bg, mat, LoadSchedule::constant(1.0, lambda, h, ModeKind::stretch));
  const oracle::DenseProblem dense_bulk({4, 4, 3, 1.0, 1.0, 0.5, 0}, oracle_physics(mat, h, lambda),
                                        stray_hessian(bg, mat.m_sat));
  const auto [jb, rb] = compare(bulk, dense_bulk, tilt);

  const double dp = std::abs(jp - rp), db = std::abs(jb - rb);
  return {dp <= 1e-6 && db <= 1e-6,
          fmt::format("plate 5x5: {:.10f} vs {:.10f} (diff {:.1e}); bulk 4x4x3: {:.10f} vs {:.10f} (diff {:.1e})", jp, rp,
                      dp, jb, rb, db)};
}

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"plane-reduction", 5, plane_reduction},
      {"stray-limit", 120, stray_limit},
      {"cube-demag-factor", 30, cube_factor},
      {"energy-balance", 180, energy_balance},
      {"rate-independence", 60, rate_independence},
      {"stability-audit", 300, stability},
      {"gamma-sweep", 600, gamma_sweep},
      {"dissipation-structure", 60, dissipation_structure},
      {"kinematic-lift", 60, lifting},
      {"solver-oracle", 120, solver_oracle},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto& c = criteria[k];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.passed && in_time;
    failures += pass ? 0 : 1;
    fmt::print("{} {:2d} {:<22} {:7.2f}s/{:.0f}s  {}{}\n", pass ? "PASS" : "FAIL", k + 1, c.name, secs, c.budget_s,
               o.detail, in_time ? "" : "  [over time budget]");
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
