#include "magfilm/harness.hpp"

#include <fmt/format.h>

#include <functional>

namespace magfilm {
namespace {

class Suite {
 public:
  Suite(std::string name, std::vector<SuiteCheck>& out) : name_(std::move(name)), out_(out) {}

  /// `fn` returns (passed, detail); exceptions count as failures.
  void check(const std::string& invariant, const std::function<std::pair<bool, std::string>()>& fn) {
    SuiteCheck c{name_, invariant, false, ""};
    try {
      std::tie(c.passed, c.detail) = fn();
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = e.what();
    }
    out_.push_back(std::move(c));
  }

 private:
  std::string name_;
  std::vector<SuiteCheck>& out_;
};

std::pair<bool, std::string> bound(double value, double tol) {
  return {value <= tol, fmt::format("value={:.3e} tol={:.1e}", value, tol)};
}

Mat3 random_symmetric(Rng& rng) {
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

// Per-node axis tables fix the planar layout.
Grid small_plate(const RunConfig& cfg, int nx, int ny) {
  if (cfg.anisotropy.kind() == AnisotropyModel::Kind::tabulated) return make_grid(cfg, ModelKind::plate);
  return Grid::plate(nx, ny, cfg.geometry.lx, cfg.geometry.ly, cfg.geometry.edge);
}

Vec3 random_on_sphere(Rng& rng, double ms) { return ms * rng.direction(); }

void material_suite(const RunConfig& cfg, Rng& rng, std::vector<SuiteCheck>& out, const ElasticityTensor& c) {
  Suite s("material", out);
  s.check("elasticity_positive_definite", [&]() -> std::pair<bool, std::string> {
    const auto t = ElasticityTensor::from_voigt(cfg.elasticity_voigt);
    return {true, fmt::format("min_eigenvalue={:.6g}", t.min_eigenvalue())};
  });
  s.check("plane_reduction_is_minimum", [&] {
    const auto c0 = reduce_tensor(c);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const Mat3 full = random_symmetric(rng);
      const Eigen::Matrix2d a = full.topLeftCorner<2, 2>();
      const double q = c0.contract(to_voigt_strain2(a), to_voigt_strain2(a));
      const auto qf = quadratic_form_Q(c, a);
      Mat3 e = full;
      e.topLeftCorner<2, 2>() = a;
      // Any transverse completion costs at least Q(A).
      worst = std::max(worst, q - c.energy_density(to_voigt_strain(e)));
      worst = std::max(worst, std::abs(q - qf.value) / (1.0 + a.squaredNorm()));
    }
    return bound(worst, 1e-10);
  });
  s.check("reduced_tensor_positive", [&]() -> std::pair<bool, std::string> {
    const double ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(reduce_tensor(c).voigt2).eigenvalues().minCoeff();
    return {ev > 0.0, fmt::format("min_eigenvalue={:.6g}", ev)};
  });
  s.check("anisotropy_nonnegative", [&] {
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Vec3 m = random_on_sphere(rng, cfg.m_sat);
      worst = std::min(worst, cfg.anisotropy.offplane_part(0, m, cfg.m_sat));
    }
    return bound(-worst, 1e-12);
  });
}

void fields_suite(std::vector<SuiteCheck>& out) {
  Suite s("fields", out);
  const Grid g = Grid::bulk(6, 5, 4, 1.0, 0.8, 0.5, Edge::left);
  s.check("weights_sum_to_area", [&] {
    double sum = 0.0;
    for (double w : g.weights()) sum += w;
    return bound(std::abs(sum - g.area()), 1e-12);
  });
  s.check("derivative_exact_on_quadratics", [&] {
    std::vector<double> f(g.size()), d(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Vec3 x = g.position(n);
      f[n] = 2.0 * x(0) * x(0) - x(0) * x(1) + 3.0 * x(2);
    }
    derivative(g, Axis::x, f, d);
    double worst = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Vec3 x = g.position(n);
      worst = std::max(worst, std::abs(d[n] - (4.0 * x(0) - x(1))));
    }
    return bound(worst, 1e-11);
  });
  s.check("kirchhoff_love_modes", [&] {
    double worst = 0.0;
    for (auto k : {ModeKind::stretch, ModeKind::shear, ModeKind::bending}) {
      worst = std::max(worst, validate_KL(DirichletDatum::sample(g, mode_function(k))));
    }
    return bound(worst, 1e-10);
  });
}

void stray_suite(const RunConfig& cfg, std::vector<SuiteCheck>& out) {
  Suite s("stray", out);
  s.check("newell_trace_identity", [&] {
    const auto n = newell_tensor(Vec3::Zero(), 1.0, 0.7, 0.4);
    return bound(std::abs(n[0] + n[1] + n[2] - 1.0), 1e-10);
  });
  s.check("fft_matches_direct", [&] {
    const Grid g = Grid::bulk(5, 4, 3, 1.0, 1.0, 0.3, Edge::left);
    Rng rng(cfg.seed);
    std::vector<Vec3> m(g.size());
    for (auto& v : m) v = rng.direction();
    const MagnetizationField f(g, m, 1.0, false);
    const double a = solve_stray_fft(f, cfg.stray).energy;
    const double b = stray_energy_direct(f);
    return bound(std::abs(a - b) / (1.0 + std::abs(b)), 1e-9);
  });
  s.check("energy_nonnegative", [&] {
    const Grid g = Grid::bulk(6, 6, 3, 1.0, 1.0, 0.25, Edge::left);
    const auto f = MagnetizationField::uniform(g, Vec3(0.3, -0.5, 0.8), 1.0);
    return bound(-solve_stray_fft(f, cfg.stray).energy, 0.0);
  });
}

void energetics_suite(const RunConfig& cfg, const Materials& mat, Rng& rng, std::vector<SuiteCheck>& out) {
  Suite s("energetics", out);
  const Grid g = small_plate(cfg, 5, 4);
  auto random_field = [&] {
    std::vector<Vec3> v(g.size());
    for (auto& x : v) x = random_on_sphere(rng, mat.m_sat);
    return MagnetizationField(g, v, mat.m_sat, false);
  };
  const auto params = DissipationParams::make(std::max(mat.dissipation.r_p, 0.1),
                                              OffplaneYield::constant(std::max(mat.dissipation.r3_at(Thickness::limit()), 0.1)));
  s.check("dissipation_metric_axioms", [&] {
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const auto a = random_field(), b = random_field(), c = random_field();
      const auto h = Thickness::limit();
      const double ab = dissipation_distance(a, b, h, params);
      worst = std::max(worst, std::abs(ab - dissipation_distance(b, a, h, params)));
      worst = std::max(worst, ab - dissipation_distance(a, c, h, params) - dissipation_distance(c, b, h, params));
      worst = std::max(worst, dissipation_distance(a, a, h, params));
    }
    return bound(worst, 1e-12);
  });
  s.check("elastic_energy_nonnegative", [&] {
    PlateModel model(g, mat, cfg.schedule);
    const auto m = random_field();
    const auto sol = elastic_solve(model, m.values(), cfg.schedule.at(0.0).lambda, cfg.solver);
    return bound(-model.elastic_energy(sol.dofs, m.values(), cfg.schedule.at(0.0).lambda), 1e-12);
  });
  s.check("elastic_solve_minimizes", [&] {
    PlateModel model(g, mat, cfg.schedule);
    const auto m = random_field();
    const double lambda = cfg.schedule.at(0.0).lambda;
    const auto sol = elastic_solve(model, m.values(), lambda, cfg.solver);
    const double e0 = model.elastic_energy(sol.dofs, m.values(), lambda);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      auto d = sol.dofs;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!model.pinned()[i]) d[i] += 1e-3 * rng.normal();
      }
      worst = std::max(worst, e0 - model.elastic_energy(d, m.values(), lambda));
    }
    return bound(worst, 1e-10 * (1.0 + std::abs(e0)));
  });
}

void solver_suite(const RunConfig& cfg, const Materials& mat, std::vector<SuiteCheck>& out) {
  Suite s("solver", out);
  const Grid g = small_plate(cfg, 5, 5);
  PlateModel model(g, mat, cfg.schedule);
  auto solver = cfg.solver;
  solver.n_stability_samples = 50;
  const auto m0 = model.make_field(std::vector<Vec3>(g.size(), mat.m_sat * cfg.initial_axis()));
  const double t1 = cfg.schedule.horizon() / std::max(cfg.steps, 1);
  const auto sol = elastic_solve(model, m0.values(), cfg.schedule.at(0.0).lambda, solver);
  const auto s0 = model.make_state(sol.dofs, m0);
  s.check("incremental_step_descends", [&] {
    const auto r = incremental_step(model, s0, t1, solver, 1);
    const double before = model.energy(t1, s0).total;
    return bound(r.objective - before, 1e-10 * (1.0 + std::abs(before)));
  });
  s.check("incremental_step_stable", [&]() -> std::pair<bool, std::string> {
    const auto r = incremental_step(model, s0, t1, solver, 1);
    const auto a = stability_audit(model, r.state, t1, solver.n_stability_samples, solver, 1);
    return {a.passed, fmt::format("worst={:.3e} tol={:.1e}", a.worst, a.tolerance)};
  });
  s.check("saturation_preserved", [&] {
    const auto r = incremental_step(model, s0, t1, solver, 1);
    return bound(r.state.m.max_saturation_violation(), saturation_tolerance(mat.m_sat));
  });
}

}  // namespace

std::vector<SuiteCheck> run_validate(const RunConfig& cfg) {
  std::vector<SuiteCheck> out;
  Rng rng(cfg.seed);
  Materials mat;
  bool valid = true;
  try {
    mat = cfg.materials();
  } catch (const ModelError&) {
    valid = false;
  }
  material_suite(cfg, rng, out, mat.elasticity);
  fields_suite(out);
  stray_suite(cfg, out);
  if (valid) {
    energetics_suite(cfg, mat, rng, out);
    solver_suite(cfg, mat, out);
  }
  return out;
}

}  // namespace magfilm
