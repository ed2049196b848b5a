#pragma once

#include "magfilm/energetics.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace magfilm {

struct SolverConfig {
  double tol_outer = 1e-12;  ///< relative objective decrease ending the alternation
  double tol_cg = 1e-10;     ///< relative elastic residual
  double tol_prox = 1e-12;   ///< relative objective decrease ending the m-step
  double tol_step = 1e-7;    ///< largest per-node change ending the m-step
  int max_outer = 200;
  int max_cg = 500;
  int max_prox = 20000;
  double prox_step = 1.0;  ///< initial proximal step tau
  /// Second start of each step whose first proximal move is capped at this fraction
  /// of m_sat per node; the lower objective wins. 0 disables it.
  double cautious_move = 0.1;
  double backtrack = 0.5;
  int n_stability_samples = 200;
  double perturbation_scale = 0.3;
  double tol_stability = 1e-6;  ///< relative to 1 + |E|
  std::uint64_t rng_seed = 12345;
  bool competitor_search = true;
  int competitor_samples = 24;
  bool audit_each_step = false;

  void validate() const;
};

struct ElasticSolution {
  std::vector<double> dofs;
  int iterations = 0;
  double residual = 0.0;
};

/// Minimizes the elastic energy over displacement unknowns at fixed m by
/// preconditioned conjugate gradients from a zero initial guess.
template <class Model>
ElasticSolution elastic_solve(const Model& model, std::span<const Vec3> m, double lambda,
                              const SolverConfig& cfg);

struct MagnetizationStepResult {
  std::vector<Vec3> m;
  double objective = 0.0;
  int iterations = 0;
  double last_step = 0.0;
};

/// Proximal-gradient minimization of E(t, u, .) + D(m_prev, .) over saturated m at
/// fixed displacement.
template <class Model>
MagnetizationStepResult magnetization_step(const Model& model, const MagnetizationField& m_prev,
                                           std::span<const Vec3> m_init, std::span<const double> dofs,
                                           const LoadValues& load, const SolverConfig& cfg);

/// Same update on the reduced objective min_u E(t, u, .) + D(m_prev, .): every
/// evaluation re-solves the elastic problem, so the coupling is never lagged.
template <class Model>
MagnetizationStepResult relaxed_magnetization_step(const Model& model, const MagnetizationField& m_prev,
                                                   std::span<const Vec3> m_init, const LoadValues& load,
                                                   const SolverConfig& cfg, int* cg_iterations = nullptr);

struct StepStats {
  int outer_iterations = 0;
  int prox_iterations = 0;
  int cg_iterations = 0;
  int restarts = 0;
  double last_step = 0.0;
  bool monotone = true;
  std::vector<double> objective_series;
};

template <class Model>
struct StepResult {
  typename Model::State state;
  double objective = 0.0;  ///< E(t, new) + D(prev, new)
  StepStats stats;
};

/// One step of the time-incremental scheme. `step_index` seeds the competitor search.
template <class Model>
StepResult<Model> incremental_step(const Model& model, const typename Model::State& prev, double t,
                                   const SolverConfig& cfg, std::uint64_t step_index = 0);

struct AuditResult {
  double worst = 0.0;  ///< max E(t, z) - E(t, z^) - D(z, z^)
  double tolerance = 0.0;
  int samples = 0;
  bool passed = true;
};

template <class Model>
AuditResult stability_audit(const Model& model, const typename Model::State& state, double t,
                            int n_samples, const SolverConfig& cfg, std::uint64_t salt = 0);

template <class Model>
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<EnergyBreakdown> energies;
  std::vector<double> diss_cum;
  std::vector<double> power_right;
  std::vector<double> power_left;
  std::vector<double> residual;
  std::vector<double> upper_slack;  ///< E_k + D_k - E(t_k, z_{k-1}), <= 0 up to tolerance
  std::vector<typename Model::State> states;
  std::vector<StepStats> stats;
  std::vector<AuditResult> audits;  ///< per step when auditing, else only the initial audit
  std::vector<char> breakpoint;
  double max_residual = 0.0;
  bool initial_stable = true;
};

/// Sequential incremental steps over a strictly increasing partition starting at 0.
template <class Model>
TrajectoryRecord<Model> evolve(const Model& model, const typename Model::State& initial,
                               std::span<const double> partition, const SolverConfig& cfg);

template <class Model>
BalanceSeries balance_residual(const TrajectoryRecord<Model>& record);

/// Uniform partition of [0, T] into `steps` intervals.
std::vector<double> uniform_partition(double horizon, int steps);

/// Deterministic generator shared by the competitor search and the audit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  ///< [0, 1)
  Vec3 direction();  ///< uniform on the unit sphere
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace magfilm
