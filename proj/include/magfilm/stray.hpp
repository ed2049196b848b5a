#pragma once

#include "magfilm/fields.hpp"

#include <array>
#include <memory>
#include <span>
#include <vector>

namespace magfilm {

struct StrayOptions {
  int padding_factor = 2;  ///< zero padding per axis, >= 2
  int nz_cap = 32;         ///< layer cap when extruding a planar field
};

struct StrayFieldSolution {
  std::vector<Vec3> hfield;  ///< -grad xi averaged over each node's dual cell
  double energy = 0.0;       ///< (1 / (2 |S| h)) int m . grad xi
};

/// Newell cell-averaged demagnetizing tensor (xx, yy, zz, xy, xz, yz) between two
/// boxes of size (sx, sy, sz) whose centres differ by `offset`. H = -N m.
std::array<double, 6> newell_tensor(const Vec3& offset, double sx, double sy, double sz);

/// Zero-padded FFT convolution with the Newell kernel on a uniform box grid.
/// Immutable after construction; apply() is safe to call concurrently.
class DemagKernel {
 public:
  DemagKernel(int nx, int ny, int nz, double sx, double sy, double sz, int padding_factor);
  ~DemagKernel();
  DemagKernel(const DemagKernel&) = delete;
  DemagKernel& operator=(const DemagKernel&) = delete;

  /// H = -N * m over the box grid (x fastest).
  std::vector<Vec3> apply(std::span<const Vec3> m) const;

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }

 private:
  struct Impl;
  int nx_, ny_, nz_;
  std::unique_ptr<Impl> impl_;
};

/// Whole-space magnetostatic solve for a magnetization on a bulk grid (physical
/// thickness h, nz >= 2). Each node owns its clipped dual cell, so the cell volumes
/// are exactly the trapezoidal weights.
StrayFieldSolution solve_stray_fft(const MagnetizationField& m, const StrayOptions& opts = {});

/// Same energy via direct O(N^2) summation of the cell quadratic form (reference path).
double stray_energy_direct(const MagnetizationField& m);

/// Thin-film surrogate (1 / |S|) int_S m3^2 / 2 for a planar-only field.
double stray_energy_limit(const MagnetizationField& m);

/// max(2, round(h / planar spacing)) capped at `cap`.
int extrusion_layers(double h, double planar_spacing, int cap);

struct StrayDiagnosticRow {
  double h = 0.0;
  int nz = 0;
  double fft_energy = 0.0;
  double surrogate = 0.0;
  double gap = 0.0;
};

/// Extrudes a planar field to each thickness of a strictly decreasing list and
/// compares the FFT stray energy with the surrogate.
std::vector<StrayDiagnosticRow> stray_limit_diagnostic(const MagnetizationField& planar,
                                                       std::span<const double> h_list,
                                                       const StrayOptions& opts = {});

/// gap[k+1] <= (1 + slack) gap[k] along the table.
bool gaps_nonincreasing(std::span<const StrayDiagnosticRow> rows, double slack = 0.1);

}  // namespace magfilm
