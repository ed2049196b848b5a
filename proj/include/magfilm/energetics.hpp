#pragma once

#include "magfilm/fields.hpp"
#include "magfilm/material.hpp"
#include "magfilm/stray.hpp"

#include <memory>
#include <span>
#include <vector>

namespace magfilm {

struct EnergyBreakdown {
  double exchange = 0.0;
  double anisotropy = 0.0;
  double stray = 0.0;
  double zeeman = 0.0;
  double elastic = 0.0;
  double total = 0.0;
  bool feasible = true;

  double magnetic() const { return exchange + anisotropy + stray + zeeman; }
};

/// Continuous piecewise-linear function of time through (t, value) rows.
template <class T>
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  /// Rows must start at t = 0 with strictly increasing times.
  explicit PiecewiseLinear(std::vector<std::pair<double, T>> rows);

  T operator()(double t) const;
  /// One-sided slope: from the right when `right`, from the left otherwise.
  T rate(double t, bool right) const;
  bool is_breakpoint(double t) const;
  double end_time() const { return rows_.back().first; }
  const std::vector<std::pair<double, T>>& rows() const { return rows_; }
  PiecewiseLinear scaled_in_time(double factor) const;

 private:
  std::size_t segment(double t, bool right) const;
  std::vector<std::pair<double, T>> rows_;
};

extern template class PiecewiseLinear<double>;
extern template class PiecewiseLinear<Vec3>;

struct LoadValues {
  double lambda = 0.0;
  Vec3 field = Vec3::Zero();
};

/// Dirichlet amplitude lambda(t) applied to a Kirchhoff-Love mode, and a spatially
/// uniform external field H(t). Both are piecewise linear on [0, T].
class LoadSchedule {
 public:
  LoadSchedule(ModeKind mode, PiecewiseLinear<double> lambda, PiecewiseLinear<Vec3> field);
  /// Zero loading on [0, horizon].
  static LoadSchedule constant(double horizon, double lambda = 0.0, const Vec3& field = Vec3::Zero(),
                               ModeKind mode = ModeKind::none);

  ModeKind mode() const { return mode_; }
  double horizon() const { return horizon_; }
  LoadValues at(double t) const;
  /// One-sided rates (lambda', H').
  LoadValues rate(double t, bool right) const;
  bool is_breakpoint(double t) const;
  /// Same loads reached at factor * t.
  LoadSchedule scaled_in_time(double factor) const;
  const PiecewiseLinear<double>& lambda() const { return lambda_; }
  const PiecewiseLinear<Vec3>& field() const { return field_; }

 private:
  void check_time(double t) const;
  ModeKind mode_;
  PiecewiseLinear<double> lambda_;
  PiecewiseLinear<Vec3> field_;
  double horizon_;
};

struct Materials {
  double m_sat = 1.0;
  double alpha = 0.0;  ///< exchange constant
  ElasticityTensor elasticity = ElasticityTensor::isotropic(1.0, 1.0);
  AnisotropyModel anisotropy =
      AnisotropyModel::uniaxial(0.0, 0.0, Vec3::UnitX(), ThicknessScaling::constant(1.0));
  DissipationParams dissipation;
};

/// Smooth magnetic objective pieces evaluated at fixed displacement.
struct MagneticTerms {
  double value = 0.0;
  std::vector<Vec3> gradient;  ///< Euclidean gradient per node (includes quadrature weight)
};

class ElasticFactor;

/// Thin-film (Kirchhoff-Love) model on a single-layer grid. Displacement unknowns
/// are (v1, v2, v) per planar node, pinned on the Dirichlet edge.
class PlateModel {
 public:
  using State = PlateState;

  PlateModel(Grid grid, Materials materials, LoadSchedule schedule);

  const Grid& grid() const { return grid_; }
  const Materials& materials() const { return mat_; }
  const LoadSchedule& schedule() const { return schedule_; }
  Thickness thickness() const { return Thickness::limit(); }
  const PlaneReducedTensor& reduced_tensor() const { return c0_; }

  std::size_t dof_count() const { return 3 * grid_.planar_size(); }
  const std::vector<char>& pinned() const { return pinned_; }
  std::vector<double> pack(const State& s) const;
  State make_state(std::span<const double> dofs, MagnetizationField m) const;
  State zero_state(MagnetizationField m) const;

  /// y = K x for the elastic Hessian (pinned rows and columns act as zero).
  void apply_hessian(std::span<const double> x, std::span<double> y) const;
  /// -grad of the elastic energy at zero displacement.
  std::vector<double> elastic_rhs(std::span<const Vec3> m, double lambda) const;
  /// Cached sparse factorization of K used as preconditioner.
  const ElasticFactor& factor() const;

  EnergyBreakdown energy(double t, const State& s) const;
  double elastic_energy(std::span<const double> dofs, std::span<const Vec3> m, double lambda) const;
  /// d/dt E at fixed state with one-sided load rates.
  double power(double t, const State& s, bool right) const;
  double dissipation(const MagnetizationField& a, const MagnetizationField& b) const;

  /// Exchange, anisotropy (smooth part), stray surrogate, Zeeman and elastic
  /// coupling at fixed displacement.
  MagneticTerms magnetic_terms(std::span<const double> dofs, std::span<const Vec3> m,
                               const LoadValues& load, bool with_gradient) const;
  bool hard_constraint() const { return mat_.anisotropy.hard_planar_constraint(Thickness::limit()); }
  MagnetizationField make_field(std::vector<Vec3> values) const;

  /// Per-node generalized strain (A, B, C), each in engineering Voigt form.
  std::vector<Eigen::Matrix<double, 9, 1>> generalized_strain(std::span<const double> dofs,
                                                             std::span<const Vec3> m,
                                                             double lambda) const;
  /// Mode strain at the lower face and its z3 slope.
  const std::vector<Eigen::Matrix<double, 9, 1>>& mode_strain() const { return mode_strain_; }
  static const Eigen::Matrix<double, 9, 9>& moment_matrix_pattern();

 private:
  void linear_strain(std::span<const double> x, std::vector<Eigen::Matrix<double, 9, 1>>& out) const;
  void linear_strain_adjoint(std::span<const Eigen::Matrix<double, 9, 1>> y,
                             std::span<double> out) const;

  Grid grid_;
  Materials mat_;
  LoadSchedule schedule_;
  PlaneReducedTensor c0_;
  Eigen::Matrix<double, 9, 9> moments_;
  std::vector<char> pinned_;
  std::vector<Eigen::Matrix<double, 9, 1>> mode_strain_;
  mutable std::shared_ptr<const ElasticFactor> factor_;
};

/// Rescaled three-dimensional model at finite thickness h on S x [0, 1].
class BulkModel {
 public:
  using State = BulkState;

  BulkModel(Grid grid, Materials materials, LoadSchedule schedule, StrayOptions stray = {});

  const Grid& grid() const { return grid_; }
  const Materials& materials() const { return mat_; }
  const LoadSchedule& schedule() const { return schedule_; }
  Thickness thickness() const { return grid_.thickness(); }

  std::size_t dof_count() const { return 3 * grid_.size(); }
  const std::vector<char>& pinned() const { return pinned_; }
  std::vector<double> pack(const State& s) const;
  State make_state(std::span<const double> dofs, MagnetizationField m) const;
  State zero_state(MagnetizationField m) const;

  void apply_hessian(std::span<const double> x, std::span<double> y) const;
  std::vector<double> elastic_rhs(std::span<const Vec3> m, double lambda) const;
  const ElasticFactor& factor() const;

  EnergyBreakdown energy(double t, const State& s) const;
  double elastic_energy(std::span<const double> dofs, std::span<const Vec3> m, double lambda) const;
  double power(double t, const State& s, bool right) const;
  double dissipation(const MagnetizationField& a, const MagnetizationField& b) const;

  MagneticTerms magnetic_terms(std::span<const double> dofs, std::span<const Vec3> m,
                               const LoadValues& load, bool with_gradient) const;
  bool hard_constraint() const { return false; }
  MagnetizationField make_field(std::vector<Vec3> values) const;

  /// Per-node rescaled mismatch eps_h(u + lambda mode) - eps_h^mag(m), engineering Voigt.
  std::vector<Voigt6> mismatch(std::span<const double> dofs, std::span<const Vec3> m,
                               double lambda) const;

 private:
  void linear_strain(std::span<const double> x, std::vector<Voigt6>& out) const;
  void linear_strain_adjoint(std::span<const Voigt6> y, std::span<double> out) const;
  Voigt6 scaled_eps_mag(const Vec3& m) const;

  Grid grid_;
  Materials mat_;
  LoadSchedule schedule_;
  StrayOptions stray_;
  double inv_h_;
  std::vector<char> pinned_;
  std::vector<Voigt6> mode_strain_;
  mutable std::shared_ptr<const ElasticFactor> factor_;
};

/// Sparse Cholesky of the probed elastic Hessian restricted to free unknowns,
/// shifted by a tiny multiple of the identity so null directions stay invertible.
class ElasticFactor {
 public:
  template <class Model>
  static std::shared_ptr<const ElasticFactor> build(const Model& model, int probe_period);
  ~ElasticFactor();
  void solve(std::span<const double> r, std::span<double> z) const;

 private:
  ElasticFactor();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

EnergyBreakdown energy_plate(double t, const PlateState& state, const LoadSchedule& schedule,
                             const Materials& materials);
EnergyBreakdown energy_bulk(double t, const BulkState& state, const LoadSchedule& schedule,
                            const Materials& materials, const StrayOptions& stray = {});

/// (1/|S|) int R_p |dm_p| + R_3(h) |dm_3| by node quadrature.
double dissipation_distance(const MagnetizationField& a, const MagnetizationField& b, Thickness h,
                            const DissipationParams& params);
/// Sum of consecutive distances along the snapshot list.
double trajectory_dissipation(std::span<const MagnetizationField> snapshots, Thickness h,
                              const DissipationParams& params);

/// Exchange energy alpha / |S| int |grad_p m|^2 + h^-2 |m,3|^2 on a compact
/// nearest-neighbour stencil. `inv_h2` is 0 for plates.
double exchange_energy(const Grid& grid, std::span<const Vec3> m, double alpha, double inv_h2,
                       std::vector<Vec3>* gradient = nullptr);

struct BalanceSeries {
  std::vector<double> residual;
  double max_abs = 0.0;
};

/// r_k = E_k + Diss_k - E_0 - int_0^{t_k} P, the power integral by per-interval
/// trapezoids of the one-sided powers at the interval ends.
BalanceSeries balance_residual(std::span<const double> times, std::span<const double> energy,
                               std::span<const double> diss_cum,
                               std::span<const double> power_right,
                               std::span<const double> power_left);

}  // namespace magfilm
