#include "magfilm/harness.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

namespace magfilm {
namespace {

using Json = nlohmann::ordered_json;

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const RunConfig& cfg, std::initializer_list<const char*> columns)
      : out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << fmt::format("# config_sha256={} seed={}\n", cfg.sha256, cfg.seed);
    std::string sep;
    for (const char* c : columns) {
      out_ << sep << c;
      sep = ",";
    }
    out_ << '\n';
  }

  /// NaN cells are written empty.
  void row(std::initializer_list<double> values) {
    if (values.size() != columns_) throw std::logic_error("csv row width mismatch");
    std::string line;
    bool first = true;
    for (double v : values) {
      if (!first) line += ',';
      first = false;
      if (!std::isnan(v)) line += fmt::format("{:.17g}", v);
    }
    out_ << line << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json header(const RunConfig& cfg, Experiment e) {
  Json j;
  j["config_sha256"] = cfg.sha256;
  j["seed"] = cfg.seed;
  j["experiment"] = to_string(e);
  j["model"] = cfg.model == ModelKind::plate ? "plate" : "bulk";
  return j;
}

Materials without_dissipation(Materials m) {
  m.dissipation = DissipationParams::make(0.0, OffplaneYield::constant(0.0));
  return m;
}

template <class Model>
typename Model::State initial_state(const Model& model, const Vec3& dir, const SolverConfig& s) {
  const double ms = model.materials().m_sat;
  auto m0 = model.make_field(std::vector<Vec3>(model.grid().size(), ms * dir.normalized()));
  const double lambda = model.schedule().at(0.0).lambda;
  auto sol = elastic_solve(model, m0.values(), lambda, s);
  return model.make_state(sol.dofs, std::move(m0));
}

// Incremental machinery at t = 0 with D = 0.
template <class Model>
typename Model::State relax(const Model& model, const Vec3& dir, const SolverConfig& s) {
  const auto st = initial_state(model, dir, s);
  return incremental_step(model, st, 0.0, s, 0).state;
}

std::vector<Vec3> node_displacement(const PlateState& s) {
  std::vector<Vec3> u(s.v.size());
  for (std::size_t n = 0; n < u.size(); ++n) u[n] = Vec3(s.v1[n], s.v2[n], s.v[n]);
  return u;
}

std::vector<Vec3> node_displacement(const BulkState& s) { return s.u; }

void write_state(const std::filesystem::path& path, const RunConfig& cfg, const Grid& g, std::span<const Vec3> m,
                 std::span<const Vec3> u) {
  CsvFile f(path, cfg, {"node", "i", "j", "k", "x", "y", "z", "m1", "m2", "m3", "u1", "u2", "u3"});
  const std::size_t np = g.planar_size();
  for (std::size_t n = 0; n < m.size(); ++n) {
    const std::size_t p = n % np;
    const Vec3 x = g.position(n);
    const Vec3 un = n < u.size() ? u[n] : Vec3::Zero();
    f.row({double(n), double(p % g.nx()), double(p / g.nx()), double(n / np), x(0), x(1), x(2), m[n](0), m[n](1),
           m[n](2), un(0), un(1), un(2)});
  }
}

Vec3 mean_magnetization(const Grid& g, std::span<const Vec3> m) {
  Vec3 s = Vec3::Zero();
  const auto& w = g.weights();
  for (std::size_t n = 0; n < m.size(); ++n) s += w[n] * m[n];
  return s / g.area();
}

template <class Model>
RunReport evolve_with(const Model& model, const RunConfig& cfg, const std::filesystem::path& dir, RunReport report) {
  const auto s0 = initial_state(model, cfg.initial_axis(), cfg.solver);
  const auto partition = uniform_partition(model.schedule().horizon(), cfg.steps);
  const auto rec = evolve(model, s0, partition, cfg.solver);
  const Grid& g = model.grid();

  const auto path = dir / "trajectory.csv";
  {
    CsvFile f(path, cfg,
              {"t", "exchange", "anisotropy", "stray", "zeeman", "elastic", "total", "diss_cum", "residual",
               "power_right", "power_left", "upper_slack", "lambda", "H1", "H2", "H3", "mean_m1", "mean_m2", "mean_m3",
               "outer_iterations", "prox_iterations", "cg_iterations", "restarts", "last_step", "audit_worst",
               "breakpoint"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
      const auto& e = rec.energies[k];
      const auto load = model.schedule().at(rec.times[k]);
      const Vec3 mm = mean_magnetization(g, rec.states[k].m.values());
      const auto& st = rec.stats[k];
      double audit = nan;
      if (cfg.solver.audit_each_step && k < rec.audits.size()) audit = rec.audits[k].worst;
      if (k == 0 && !rec.audits.empty()) audit = rec.audits[0].worst;
      f.row({rec.times[k], e.exchange, e.anisotropy, e.stray, e.zeeman, e.elastic, e.total, rec.diss_cum[k],
             rec.residual[k], rec.power_right[k], rec.power_left[k], rec.upper_slack[k], load.lambda, load.field(0),
             load.field(1), load.field(2), mm(0), mm(1), mm(2), double(st.outer_iterations), double(st.prox_iterations),
             double(st.cg_iterations), double(st.restarts), st.last_step, audit, double(rec.breakpoint[k])});
    }
  }
  report.files.push_back(path);

  if (cfg.snapshots) {
    std::filesystem::create_directories(dir / "snapshots");
    for (std::size_t k = 0; k < rec.states.size(); ++k) {
      const auto p = dir / "snapshots" / fmt::format("state_{:05d}.csv", k);
      write_state(p, cfg, g, rec.states[k].m.values(), node_displacement(rec.states[k]));
      report.files.push_back(p);
    }
  }

  Json j = header(cfg, Experiment::evolve);
  j["steps"] = cfg.steps;
  j["horizon"] = model.schedule().horizon();
  double worst = -kInfinity;
  bool all_passed = true;
  Json audits = Json::array();
  for (std::size_t k = 0; k < rec.audits.size(); ++k) {
    const auto& a = rec.audits[k];
    worst = std::max(worst, a.worst);
    all_passed = all_passed && a.passed;
    audits.push_back({{"step", cfg.solver.audit_each_step ? k : 0}, {"worst", a.worst}, {"tolerance", a.tolerance},
                      {"samples", a.samples}, {"passed", a.passed}});
  }
  double max_slack = -kInfinity;
  for (double s : rec.upper_slack) max_slack = std::max(max_slack, s);
  j["initial_stable"] = rec.initial_stable;
  j["max_stability_violation"] = rec.audits.empty() ? Json(nullptr) : Json(worst);
  j["audits_passed"] = all_passed;
  j["max_balance_residual"] = rec.max_residual;
  j["max_upper_slack"] = max_slack;
  j["final_diss_cum"] = rec.diss_cum.back();
  j["audits"] = audits;
  const auto jp = dir / "audit.json";
  write_json(jp, j);
  report.files.push_back(jp);

  report.lines.push_back(fmt::format("steps={} max_balance_residual={:.6e} diss_cum={:.6e}", cfg.steps, rec.max_residual,
                                     rec.diss_cum.back()));
  if (!rec.audits.empty()) {
    report.lines.push_back(fmt::format("max_stability_violation={:.6e} initial_stable={}", worst, rec.initial_stable));
  }
  if (!rec.initial_stable) report.lines.push_back("warning: initial state failed the stability audit");
  if (cfg.solver.audit_each_step && !all_passed) {
    throw InvariantFailure(fmt::format("stability audit failed: worst violation {:.6e}", worst));
  }
  return report;
}

}  // namespace

Grid make_grid(const RunConfig& cfg, ModelKind kind, std::optional<double> h) {
  const auto& g = cfg.geometry;
  if (kind == ModelKind::plate) return Grid::plate(g.nx, g.ny, g.lx, g.ly, g.edge);
  return Grid::bulk(g.nx, g.ny, g.nz, g.lx, g.ly, h.value_or(g.h), g.edge);
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg, const RunOptions& opts) {
  if (opts.output_dir) return *opts.output_dir;
  if (const char* env = std::getenv("MAGFILM_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

StaticResult run_static(const RunConfig& cfg) {
  const Materials mat = without_dissipation(cfg.materials());
  StaticResult r;
  if (cfg.model == ModelKind::plate) {
    PlateModel model(make_grid(cfg, ModelKind::plate), mat, cfg.schedule);
    const auto s = relax(model, cfg.initial_axis(), cfg.solver);
    r.energy = model.energy(0.0, s);
    r.m.assign(s.m.values().begin(), s.m.values().end());
    r.u = node_displacement(s);
  } else {
    BulkModel model(make_grid(cfg, ModelKind::bulk), mat, cfg.schedule, cfg.stray);
    const auto s = relax(model, cfg.initial_axis(), cfg.solver);
    r.energy = model.energy(0.0, s);
    r.m.assign(s.m.values().begin(), s.m.values().end());
    r.u = s.u;
  }
  return r;
}

std::vector<SweepRow> run_gamma_sweep(const RunConfig& cfg) {
  if (cfg.geometry.h_list.empty()) throw ModelError("gamma-sweep needs geometry.h_list");
  const Materials mat = without_dissipation(cfg.materials());
  PlateModel plate(make_grid(cfg, ModelKind::plate), mat, cfg.schedule);
  const auto p = relax(plate, cfg.initial_axis(), cfg.solver);
  const auto e0 = plate.energy(0.0, p);
  const double lambda = cfg.schedule.at(0.0).lambda;
  // Fixed planar m: the uniform initial datum, displacement minimized on both sides.
  const auto mp = MagnetizationField::uniform(plate.grid(), cfg.initial_axis(), cfg.m_sat);
  const double fixed_elastic_0 = plate.elastic_energy(elastic_solve(plate, mp.values(), lambda, cfg.solver).dofs,
                                                      mp.values(), lambda);
  const double fixed_stray_0 = stray_energy_limit(mp);
  std::vector<SweepRow> rows;
  for (double h : cfg.geometry.h_list) {
    BulkModel bulk(make_grid(cfg, ModelKind::bulk, h), mat, cfg.schedule, cfg.stray);
    const auto b = relax(bulk, cfg.initial_axis(), cfg.solver);
    const auto eh = bulk.energy(0.0, b);
    SweepRow r;
    r.h = h;
    r.nz = bulk.grid().nz();
    r.energy_h = eh.total;
    r.energy_0 = e0.total;
    r.gap = std::abs(eh.total - e0.total);
    r.elastic_h = eh.elastic;
    r.elastic_0 = e0.elastic;
    r.elastic_gap = std::abs(eh.elastic - e0.elastic);
    r.stray_h = eh.stray;
    r.stray_0 = e0.stray;
    r.stray_gap = std::abs(eh.stray - e0.stray);
    const auto mx = extrude(mp, bulk.grid());
    const auto sol = elastic_solve(bulk, mx.values(), lambda, cfg.solver);
    r.fixed_elastic_h = bulk.elastic_energy(sol.dofs, mx.values(), lambda);
    r.fixed_elastic_0 = fixed_elastic_0;
    r.fixed_elastic_gap = std::abs(r.fixed_elastic_h - fixed_elastic_0);
    r.fixed_stray_h = solve_stray_fft(mx, cfg.stray).energy;
    r.fixed_stray_0 = fixed_stray_0;
    r.fixed_stray_gap = std::abs(r.fixed_stray_h - fixed_stray_0);
    rows.push_back(r);
  }
  return rows;
}

std::vector<StrayDiagnosticRow> run_stray_diag(const RunConfig& cfg) {
  const auto& h = cfg.geometry.h_list;
  if (h.empty()) throw ModelError("stray-diag needs geometry.h_list");
  const Grid g = make_grid(cfg, ModelKind::plate);
  const auto m = MagnetizationField::uniform(g, cfg.initial_axis(), cfg.m_sat);
  return stray_limit_diagnostic(m, h, cfg.stray);
}

RunReport run_experiment(const RunConfig& cfg, Experiment e, const RunOptions& opts) {
  const auto dir = resolve_output_dir(cfg, opts);
  if (e != Experiment::validate) {
    try {
      (void)cfg.materials();
    } catch (const ModelError& err) {
      throw ConfigError(fmt::format("{}: material.elasticity: {}", cfg.source, err.what()));
    }
  }
  std::filesystem::create_directories(dir);
  RunReport report;
  switch (e) {
    case Experiment::static_min: {
      const auto r = run_static(cfg);
      const Grid g = make_grid(cfg, cfg.model);
      const auto sp = dir / "state.csv";
      write_state(sp, cfg, g, r.m, r.u);
      const auto ep = dir / "energy.csv";
      {
        CsvFile f(ep, cfg, {"exchange", "anisotropy", "stray", "zeeman", "elastic", "total"});
        const auto& x = r.energy;
        f.row({x.exchange, x.anisotropy, x.stray, x.zeeman, x.elastic, x.total});
      }
      report.files = {sp, ep};
      report.lines.push_back(fmt::format("total={:.12g} elastic={:.12g} magnetic={:.12g}", r.energy.total,
                                         r.energy.elastic, r.energy.magnetic()));
      return report;
    }
    case Experiment::evolve: {
      const Materials mat = cfg.materials();
      if (cfg.model == ModelKind::plate) {
        return evolve_with(PlateModel(make_grid(cfg, ModelKind::plate), mat, cfg.schedule), cfg, dir, report);
      }
      return evolve_with(BulkModel(make_grid(cfg, ModelKind::bulk), mat, cfg.schedule, cfg.stray), cfg, dir, report);
    }
    case Experiment::gamma_sweep: {
      const auto rows = run_gamma_sweep(cfg);
      const auto p = dir / "gamma_sweep.csv";
      {
        CsvFile f(p, cfg,
                  {"h", "nz", "energy_h", "energy_0", "gap", "elastic_h", "elastic_0", "elastic_gap", "stray_h",
                   "stray_0", "stray_gap", "fixed_elastic_h", "fixed_elastic_0", "fixed_elastic_gap",
                   "fixed_stray_h", "fixed_stray_0", "fixed_stray_gap"});
        for (const auto& r : rows) {
          f.row({r.h, double(r.nz), r.energy_h, r.energy_0, r.gap, r.elastic_h, r.elastic_0, r.elastic_gap, r.stray_h,
                 r.stray_0, r.stray_gap, r.fixed_elastic_h, r.fixed_elastic_0, r.fixed_elastic_gap,
                 r.fixed_stray_h, r.fixed_stray_0, r.fixed_stray_gap});
        }
      }
      auto monotone = [&](auto get) {
        for (std::size_t k = 1; k < rows.size(); ++k) {
          if (get(rows[k]) > 1.1 * get(rows[k - 1])) return false;
        }
        return true;
      };
      Json j = header(cfg, e);
      j["rows"] = rows.size();
      j["gap_nonincreasing"] = monotone([](const SweepRow& r) { return r.gap; });
      j["stray_gap_nonincreasing"] = monotone([](const SweepRow& r) { return r.stray_gap; });
      j["elastic_gap_nonincreasing"] = monotone([](const SweepRow& r) { return r.elastic_gap; });
      j["fixed_elastic_gap_nonincreasing"] = monotone([](const SweepRow& r) { return r.fixed_elastic_gap; });
      j["fixed_stray_gap_nonincreasing"] = monotone([](const SweepRow& r) { return r.fixed_stray_gap; });
      j["slack"] = 0.1;
      const auto jp = dir / "gamma_sweep.json";
      write_json(jp, j);
      report.files = {p, jp};
      for (const auto& r : rows) {
        report.lines.push_back(fmt::format("h={:<10.6g} gap={:.6e} fixed_elastic_gap={:.6e} fixed_stray_gap={:.6e}", r.h, r.gap,
                                           r.fixed_elastic_gap, r.fixed_stray_gap));
      }
      return report;
    }
    case Experiment::stray_diag: {
      const auto rows = run_stray_diag(cfg);
      const auto p = dir / "stray_diag.csv";
      {
        CsvFile f(p, cfg, {"h", "nz", "fft_energy", "surrogate", "gap"});
        for (const auto& r : rows) f.row({r.h, double(r.nz), r.fft_energy, r.surrogate, r.gap});
      }
      report.files = {p};
      for (const auto& r : rows) {
        report.lines.push_back(fmt::format("h={:<10.6g} fft={:.10f} surrogate={:.10f} gap={:.6e}", r.h, r.fft_energy,
                                           r.surrogate, r.gap));
      }
      return report;
    }
    case Experiment::validate: {
      const auto checks = run_validate(cfg);
      Json j = header(cfg, e);
      bool ok = true;
      Json arr = Json::array();
      for (const auto& c : checks) {
        ok = ok && c.passed;
        arr.push_back({{"suite", c.suite}, {"invariant", c.invariant}, {"passed", c.passed}, {"detail", c.detail}});
        report.lines.push_back(
            fmt::format("{:<5} {}/{} {}", c.passed ? "PASS" : "FAIL", c.suite, c.invariant, c.detail));
      }
      j["passed"] = ok;
      j["checks"] = arr;
      const auto jp = dir / "validate.json";
      write_json(jp, j);
      report.files = {jp};
      if (!ok) {
        std::string names;
        for (const auto& c : checks) {
          if (!c.passed) names += (names.empty() ? "" : ", ") + c.suite + "/" + c.invariant;
        }
        throw InvariantFailure("invariant suite failed: " + names);
      }
      return report;
    }
  }
  return report;
}

}  // namespace magfilm
