#include "magfilm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace magfilm {

void SolverConfig::validate() const {
  if (!(tol_outer > 0 && tol_cg > 0 && tol_prox > 0 && tol_step > 0 && tol_stability > 0)) {
    throw ModelError("solver tolerances must be positive");
  }
  if (max_outer < 1 || max_cg < 1 || max_prox < 1) throw ModelError("solver caps must be >= 1");
  if (!(prox_step > 0.0)) throw ModelError("prox_step must be positive");
  if (!(cautious_move >= 0.0)) throw ModelError("cautious_move must be >= 0");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ModelError("backtrack must lie in (0, 1)");
  if (n_stability_samples < 0 || competitor_samples < 0) {
    throw ModelError("sample counts must be >= 0");
  }
  if (!(perturbation_scale > 0.0)) throw ModelError("perturbation_scale must be positive");
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller on our own uniforms keeps streams identical across standard libraries.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec3 Rng::direction() {
  while (true) {
    const Vec3 v(2.0 * uniform() - 1.0, 2.0 * uniform() - 1.0, 2.0 * uniform() - 1.0);
    const double n = v.squaredNorm();
    if (n > 1e-6 && n <= 1.0) return v / std::sqrt(n);
  }
}

std::vector<double> uniform_partition(double horizon, int steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ModelError("partition horizon must be finite and positive");
  if (steps < 1) throw ModelError("partition needs at least one step");
  std::vector<double> t(steps + 1);
  for (int k = 0; k <= steps; ++k) t[k] = horizon * k / steps;
  t.back() = horizon;
  return t;
}

namespace {

template <class Model>
double dissipation_of(const Model& model, const MagnetizationField& prev, std::span<const Vec3> m) {
  const Grid& g = model.grid();
  const auto& w = g.weights();
  const auto& params = model.materials().dissipation;
  const Thickness h = model.thickness();
  double d = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) d += w[n] * dissipation_density(params, h, m[n] - prev[n]);
  return d / g.area();
}

template <class Model>
double objective(const Model& model, std::span<const double> x, std::span<const Vec3> m,
                 const MagnetizationField& prev, const LoadValues& load) {
  return model.magnetic_terms(x, m, load, false).value + dissipation_of(model, prev, m);
}

Vec3 onto_sphere(const Vec3& v, double m_sat) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ModelError("cannot project a zero vector onto the sphere");
  return v * (m_sat / n);
}

Vec3 onto_axis(const Vec3& v, double m_sat, double fallback_sign) {
  const double s = v(2) > 0.0 ? 1.0 : v(2) < 0.0 ? -1.0 : fallback_sign;
  return Vec3(0.0, 0.0, s * m_sat);
}

template <class Model>
void constrain(const Model& model, std::vector<Vec3>& m) {
  const double ms = model.materials().m_sat;
  for (auto& v : m) v = model.hard_constraint() ? onto_axis(v, ms, 1.0) : onto_sphere(v, ms);
}

// Enforces column-constancy of plate fields (trivial) and leaves bulk fields free.
template <class Model>
typename Model::State assemble(const Model& model, std::span<const double> x, std::vector<Vec3> m) {
  return model.make_state(x, model.make_field(std::move(m)));
}

double shrink(double v, double thr) {
  if (v > thr) return v - thr;
  if (v < -thr) return v + thr;
  return 0.0;
}

std::vector<std::vector<Vec3>> search_competitors(const Grid& g, std::span<const Vec3> m,
                                                  const AnisotropyModel& anis, const Vec3& field,
                                                  double m_sat, int n_random, Rng& rng) {
  std::vector<std::vector<Vec3>> out;
  const std::size_t N = m.size();
  auto uniform = [&](const Vec3& d) { out.emplace_back(N, m_sat * d.normalized()); };
  std::vector<Vec3> dirs = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (const auto& a : anis.easy_axes(0)) dirs.push_back(a);
  if (field.norm() > 0.0) dirs.push_back(field.normalized());
  Vec3 mean = Vec3::Zero();
  for (const auto& v : m) mean += v;
  if (mean.norm() > 1e-12 * m_sat * N) dirs.push_back(mean.normalized());
  for (const auto& d : dirs) {
    uniform(d);
    uniform(-d);
  }
  std::vector<Vec3> flipped(m.begin(), m.end());
  for (auto& v : flipped) v = -v;
  out.push_back(flipped);
  // Half-domain and quadrant flips.
  const int nx = g.nx(), ny = g.ny();
  const int boxes[8][4] = {{0, nx / 2, 0, ny},      {nx / 2, nx, 0, ny},     {0, nx, 0, ny / 2},
                           {0, nx, ny / 2, ny},     {0, nx / 2, 0, ny / 2},  {nx / 2, nx, 0, ny / 2},
                           {0, nx / 2, ny / 2, ny}, {nx / 2, nx, ny / 2, ny}};
  for (const auto& b : boxes) {
    std::vector<Vec3> c(m.begin(), m.end());
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t p = g.planar_index(n);
      const int i = static_cast<int>(p % nx), j = static_cast<int>(p / nx);
      if (i >= b[0] && i < b[1] && j >= b[2] && j < b[3]) c[n] = -c[n];
    }
    out.push_back(std::move(c));
  }
  for (int s = 0; s < n_random; ++s) {
    const Eigen::AngleAxisd rot(std::numbers::pi * rng.uniform(), rng.direction());
    std::vector<Vec3> c(m.begin(), m.end());
    for (auto& v : c) v = rot * v;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- elastic solve

template <class Model>
ElasticSolution elastic_solve(const Model& model, std::span<const Vec3> m, double lambda,
                              const SolverConfig& cfg) {
  const std::size_t n = model.dof_count();
  ElasticSolution sol;
  sol.dofs.assign(n, 0.0);
  std::vector<double> r = model.elastic_rhs(m, lambda);
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double bnorm = std::sqrt(dot(r, r));
  if (bnorm == 0.0) return sol;
  const ElasticFactor& pre = model.factor();
  std::vector<double> z(n), p(n), q(n);
  pre.solve(r, z);
  p = z;
  double rz = dot(r, z);
  double rnorm = bnorm;
  for (int it = 1; it <= cfg.max_cg; ++it) {
    model.apply_hessian(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      sol.dofs[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rnorm = std::sqrt(dot(r, r));
    sol.iterations = it;
    if (rnorm <= cfg.tol_cg * bnorm) {
      sol.residual = rnorm / bnorm;
      return sol;
    }
    pre.solve(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  sol.residual = rnorm / bnorm;
  if (sol.residual <= cfg.tol_cg) return sol;
  throw ConvergenceError("elastic CG did not reach tol_cg", sol.residual);
}

// ---------------------------------------------------------------- magnetization step

namespace {

// Projected proximal gradient on m with Barzilai-Borwein trial steps and monotone
// backtracking. `eval(m, grad)` returns the smooth part and, on request, its gradient.
template <class Model, class Eval>
MagnetizationStepResult proximal_descent(const Model& model, const MagnetizationField& m_prev,
                                         std::span<const Vec3> m_init, const SolverConfig& cfg,
                                         Eval&& eval, double first_move = 0.0) {
  const Grid& g = model.grid();
  const std::size_t N = g.size();
  if (m_init.size() != N || m_prev.size() != N) throw ModelError("magnetization_step: size mismatch");
  const auto& w = g.weights();
  const double inv_area = 1.0 / g.area();
  const double ms = model.materials().m_sat;
  const double rp = model.materials().dissipation.r_p;
  const double r3 = model.materials().dissipation.r3_at(model.thickness());
  const bool hard = model.hard_constraint();
  const double tau_max = 1e8;

  MagnetizationStepResult res;
  res.m.assign(m_init.begin(), m_init.end());
  if (hard) {
    for (std::size_t n = 0; n < N; ++n) res.m[n] = onto_axis(res.m[n], ms, m_prev[n](2) < 0 ? -1.0 : 1.0);
  }
  auto total = [&](std::span<const Vec3> m, MagneticTerms* terms) {
    MagneticTerms t = eval(m, terms != nullptr);
    const double v = t.value + dissipation_of(model, m_prev, m);
    if (terms) *terms = std::move(t);
    return v;
  };
  MagneticTerms terms;
  double J = total(res.m, &terms);
  double tau = cfg.prox_step;
  std::vector<Vec3> cand(N), gt(N), gt_old, m_old;
  for (int it = 0; it < cfg.max_prox; ++it) {
    for (std::size_t n = 0; n < N; ++n) {
      const Vec3 gn = terms.gradient[n] / (w[n] * inv_area);
      const Vec3 mh = res.m[n] / ms;
      gt[n] = hard ? gn : Vec3(gn - gn.dot(mh) * mh);
    }
    if (!gt_old.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const Vec3 sv = res.m[n] - m_old[n];
        ss += w[n] * sv.squaredNorm();
        sy += w[n] * sv.dot(gt[n] - gt_old[n]);
      }
      if (ss > 0.0) tau = sy > 0.0 ? std::clamp(ss / sy, 1e-10, tau_max) : std::min(tau / cfg.backtrack, tau_max);
    } else if (first_move > 0.0) {
      double gmax = 0.0;
      for (const auto& v : gt) gmax = std::max(gmax, v.norm());
      if (gmax > 0.0) tau = std::min(tau, first_move * ms / gmax);
    }
    double Jc = J, step = 0.0;
    bool accepted = false;
    MagneticTerms cand_terms;
    while (tau >= 1e-14) {
      double dist2 = 0.0;
      step = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const Vec3 y = res.m[n] - tau * gt[n];
        const Vec3 d = y - m_prev[n];
        const double pn = std::hypot(d(0), d(1));
        const double sp = pn > tau * rp ? (pn - tau * rp) / pn : 0.0;
        const Vec3 ds(sp * d(0), sp * d(1), shrink(d(2), tau * r3));
        if (ds.isZero(0.0)) {
          cand[n] = m_prev[n];
        } else {
          const Vec3 raw = m_prev[n] + ds;
          cand[n] = hard ? onto_axis(raw, ms, res.m[n](2) < 0 ? -1.0 : 1.0) : onto_sphere(raw, ms);
        }
        const double sn = (cand[n] - res.m[n]).norm();
        step = std::max(step, sn);
        dist2 += w[n] * inv_area * sn * sn;
      }
      if (step <= 1e-3 * cfg.tol_step) {
        res.objective = J;
        res.last_step = step;
        return res;
      }
      Jc = total(cand, &cand_terms);
      if (Jc < J && Jc <= J - 1e-4 * dist2 / tau) {
        accepted = true;
        break;
      }
      tau *= cfg.backtrack;
    }
    if (!accepted) {
      res.objective = J;
      res.last_step = 0.0;
      return res;
    }
    const double dec = J - Jc;
    m_old = res.m;
    gt_old = gt;
    res.m = cand;
    J = Jc;
    terms = std::move(cand_terms);
    res.iterations = it + 1;
    res.last_step = step;
    if (dec <= cfg.tol_prox * (1.0 + std::abs(J)) && step <= cfg.tol_step) {
      res.objective = J;
      return res;
    }
  }
  throw ConvergenceError("magnetization step hit max_prox", res.last_step);
}

}  // namespace

template <class Model>
MagnetizationStepResult magnetization_step(const Model& model, const MagnetizationField& m_prev,
                                           std::span<const Vec3> m_init, std::span<const double> dofs,
                                           const LoadValues& load, const SolverConfig& cfg) {
  return proximal_descent(model, m_prev, m_init, cfg, [&](std::span<const Vec3> m, bool grad) {
    return model.magnetic_terms(dofs, m, load, grad);
  });
}

namespace {

template <class Model>
MagnetizationStepResult reduced_descent(const Model& model, const MagnetizationField& m_prev,
                                        std::span<const Vec3> m_init, const LoadValues& load,
                                        const SolverConfig& cfg, int* cg_iterations, double first_move) {
  return proximal_descent(
      model, m_prev, m_init, cfg,
      [&](std::span<const Vec3> m, bool grad) {
        // The displacement is optimal for m, so the partial m-gradient is the reduced gradient.
        const auto sol = elastic_solve(model, m, load.lambda, cfg);
        if (cg_iterations) *cg_iterations += sol.iterations;
        return model.magnetic_terms(sol.dofs, m, load, grad);
      },
      first_move);
}

}  // namespace

template <class Model>
MagnetizationStepResult relaxed_magnetization_step(const Model& model, const MagnetizationField& m_prev,
                                                   std::span<const Vec3> m_init, const LoadValues& load,
                                                   const SolverConfig& cfg, int* cg_iterations) {
  return reduced_descent(model, m_prev, m_init, load, cfg, cg_iterations, 0.0);
}

// ---------------------------------------------------------------- incremental step

template <class Model>
StepResult<Model> incremental_step(const Model& model, const typename Model::State& prev, double t,
                                   const SolverConfig& cfg, std::uint64_t step_index) {
  const LoadValues load = model.schedule().at(t);
  const MagnetizationField& m_prev = prev.m;
  StepStats st;

  std::vector<Vec3> m(m_prev.values().begin(), m_prev.values().end());
  auto es = elastic_solve(model, m, load.lambda, cfg);
  st.cg_iterations += es.iterations;
  std::vector<double> x = std::move(es.dofs);
  double J = objective(model, x, m, m_prev, load);
  st.objective_series.push_back(J);

  Rng rng(cfg.rng_seed ^ (0x9E3779B97F4A7C15ULL * (step_index + 1)));
  const int max_restarts = 16;
  // Alternation from (am, ax) until the objective stalls.
  auto alternate = [&](std::vector<Vec3>& am, std::vector<double>& ax, double& aJ, double first_move,
                       std::vector<double>* series) {
    for (int outer = 0; outer < cfg.max_outer; ++outer) {
      auto ms = reduced_descent(model, m_prev, am, load, cfg, &st.cg_iterations, outer == 0 ? first_move : 0.0);
      st.prox_iterations += ms.iterations;
      st.last_step = ms.last_step;
      auto sol = elastic_solve(model, ms.m, load.lambda, cfg);
      st.cg_iterations += sol.iterations;
      const double Jn = objective(model, sol.dofs, ms.m, m_prev, load);
      ++st.outer_iterations;
      if (Jn > aJ) {
        // Round-off only: the m-step and the exact elastic solve never increase J.
        if (Jn - aJ > 1e-12 * (1.0 + std::abs(aJ))) st.monotone = false;
        break;
      }
      if (series) series->push_back(Jn);
      const double dec = aJ - Jn;
      am = std::move(ms.m);
      ax = std::move(sol.dofs);
      aJ = Jn;
      if (dec <= cfg.tol_outer * (1.0 + std::abs(aJ))) break;
      if (outer + 1 == cfg.max_outer) throw ConvergenceError("alternation hit max_outer", dec);
    }
  };
  bool first = true;
  while (true) {
    if (first && cfg.cautious_move > 0.0) {
      auto cm = m;
      auto cx = x;
      double cJ = J;
      alternate(m, x, J, 0.0, &st.objective_series);
      alternate(cm, cx, cJ, cfg.cautious_move, nullptr);
      if (cJ < J) {
        m = std::move(cm);
        x = std::move(cx);
        J = cJ;
        st.objective_series.push_back(J);
      }
    } else {
      alternate(m, x, J, 0.0, &st.objective_series);
    }
    first = false;
    if (!cfg.competitor_search || st.restarts >= max_restarts) break;

    auto comps = search_competitors(model.grid(), m, model.materials().anisotropy, load.field,
                                    model.materials().m_sat, cfg.competitor_samples, rng);
    double best = J;
    std::vector<Vec3> best_m;
    std::vector<double> best_x;
    for (auto& c : comps) {
      constrain(model, c);
      auto sol = elastic_solve(model, c, load.lambda, cfg);
      st.cg_iterations += sol.iterations;
      const double Jc = objective(model, sol.dofs, c, m_prev, load);
      if (Jc < best - 1e-10 * (1.0 + std::abs(best))) {
        best = Jc;
        best_m = std::move(c);
        best_x = std::move(sol.dofs);
      }
    }
    if (best_m.empty()) break;
    ++st.restarts;
    m = std::move(best_m);
    x = std::move(best_x);
    J = best;
    st.objective_series.push_back(J);
  }
  return StepResult<Model>{assemble(model, x, std::move(m)), J, std::move(st)};
}

// ---------------------------------------------------------------- audit

template <class Model>
AuditResult stability_audit(const Model& model, const typename Model::State& state, double t,
                            int n_samples, const SolverConfig& cfg, std::uint64_t salt) {
  const LoadValues load = model.schedule().at(t);
  const Grid& g = model.grid();
  const std::size_t N = g.size();
  const double ms = model.materials().m_sat;
  const auto m = state.m.values();
  const double E = model.energy(t, state).total;
  AuditResult res;
  res.tolerance = cfg.tol_stability * (1.0 + std::abs(E));
  res.worst = -kInfinity;
  Rng rng(cfg.rng_seed ^ 0xA5A5A5A5DEADBEEFULL ^ (0xC2B2AE3D27D4EB4FULL * (salt + 1)));

  auto evaluate = [&](std::vector<Vec3> c) {
    constrain(model, c);
    auto sol = elastic_solve(model, c, load.lambda, cfg);
    const auto field = model.make_field(std::move(c));
    const double d = model.dissipation(state.m, field);
    const auto comp = model.make_state(sol.dofs, field);
    const double v = E - model.energy(t, comp).total - d;
    res.worst = std::max(res.worst, v);
    ++res.samples;
  };

  evaluate(std::vector<Vec3>(m.begin(), m.end()));
  const auto& axes = model.materials().anisotropy.easy_axes(0);
  for (int s = 0; s < n_samples; ++s) {
    std::vector<Vec3> c(m.begin(), m.end());
    switch (s % 4) {
      case 0: {
        const Eigen::AngleAxisd rot(std::numbers::pi * rng.uniform(), rng.direction());
        for (auto& v : c) v = rot * v;
        break;
      }
      case 1: {
        const double scale = cfg.perturbation_scale * ms * rng.uniform();
        for (auto& v : c) v += scale * Vec3(rng.normal(), rng.normal(), rng.normal());
        for (auto& v : c) {
          if (v.norm() < 1e-12 * ms) v = ms * rng.direction();
        }
        break;
      }
      case 2: {
        int i0 = static_cast<int>(rng.uniform() * g.nx()), i1 = static_cast<int>(rng.uniform() * g.nx());
        int j0 = static_cast<int>(rng.uniform() * g.ny()), j1 = static_cast<int>(rng.uniform() * g.ny());
        if (i0 > i1) std::swap(i0, i1);
        if (j0 > j1) std::swap(j0, j1);
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t p = g.planar_index(n);
          const int i = static_cast<int>(p % g.nx()), j = static_cast<int>(p / g.nx());
          if (i >= i0 && i <= i1 && j >= j0 && j <= j1) c[n] = -c[n];
        }
        break;
      }
      default: {
        const std::size_t k = static_cast<std::size_t>(rng.uniform() * (axes.size() + 1));
        const Vec3 d = k < axes.size() ? Vec3(axes[k]) : rng.direction();
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (auto& v : c) v = sign * ms * d;
        break;
      }
    }
    evaluate(std::move(c));
  }
  res.passed = res.worst <= res.tolerance;
  return res;
}

// ---------------------------------------------------------------- evolve

template <class Model>
TrajectoryRecord<Model> evolve(const Model& model, const typename Model::State& initial,
                               std::span<const double> partition, const SolverConfig& cfg) {
  cfg.validate();
  if (partition.empty()) throw ModelError("evolve: empty partition");
  for (std::size_t k = 1; k < partition.size(); ++k) {
    if (!(partition[k] > partition[k - 1])) throw ModelError("evolve: partition must be strictly increasing");
  }
  TrajectoryRecord<Model> rec;
  auto push = [&](double t, const typename Model::State& s, double diss) {
    rec.times.push_back(t);
    rec.energies.push_back(model.energy(t, s));
    rec.diss_cum.push_back(diss);
    rec.power_right.push_back(model.power(t, s, true));
    rec.power_left.push_back(model.power(t, s, false));
    rec.breakpoint.push_back(model.schedule().is_breakpoint(t) ? 1 : 0);
    rec.states.push_back(s);
  };
  push(partition[0], initial, 0.0);
  rec.upper_slack.push_back(0.0);
  rec.stats.emplace_back();
  if (cfg.n_stability_samples > 0) {
    rec.audits.push_back(stability_audit(model, initial, partition[0], cfg.n_stability_samples, cfg, 0));
    rec.initial_stable = rec.audits.back().passed;
  }
  double diss = 0.0;
  for (std::size_t k = 1; k < partition.size(); ++k) {
    const auto& prev = rec.states.back();
    const double t = partition[k];
    const double e_stay = model.energy(t, prev).total;
    auto step = incremental_step(model, prev, t, cfg, k);
    const double d = model.dissipation(prev.m, step.state.m);
    diss += d;
    push(t, step.state, diss);
    rec.upper_slack.push_back(rec.energies.back().total + d - e_stay);
    rec.stats.push_back(std::move(step.stats));
    if (cfg.audit_each_step) {
      rec.audits.push_back(stability_audit(model, rec.states.back(), t, cfg.n_stability_samples, cfg, k));
    }
  }
  const auto bal = balance_residual(rec);
  rec.residual = bal.residual;
  rec.max_residual = bal.max_abs;
  return rec;
}

template <class Model>
BalanceSeries balance_residual(const TrajectoryRecord<Model>& record) {
  std::vector<double> e(record.energies.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = record.energies[k].total;
  return balance_residual(record.times, e, record.diss_cum, record.power_right, record.power_left);
}

#define MAGFILM_INSTANTIATE(M)                                                                     \
  template ElasticSolution elastic_solve<M>(const M&, std::span<const Vec3>, double,             \
                                            const SolverConfig&);                                 \
  template MagnetizationStepResult magnetization_step<M>(const M&, const MagnetizationField&,     \
                                                         std::span<const Vec3>,                   \
                                                         std::span<const double>,                 \
                                                         const LoadValues&, const SolverConfig&); \
  template MagnetizationStepResult relaxed_magnetization_step<M>(                                 \
      const M&, const MagnetizationField&, std::span<const Vec3>, const LoadValues&,              \
      const SolverConfig&, int*);                                                                 \
  template StepResult<M> incremental_step<M>(const M&, const M::State&, double,                   \
                                             const SolverConfig&, std::uint64_t);                 \
  template AuditResult stability_audit<M>(const M&, const M::State&, double, int,                 \
                                          const SolverConfig&, std::uint64_t);                    \
  template TrajectoryRecord<M> evolve<M>(const M&, const M::State&, std::span<const double>,      \
                                         const SolverConfig&);                                    \
  template BalanceSeries balance_residual<M>(const TrajectoryRecord<M>&);

MAGFILM_INSTANTIATE(PlateModel)
MAGFILM_INSTANTIATE(BulkModel)

#undef MAGFILM_INSTANTIATE

}  // namespace magfilm
