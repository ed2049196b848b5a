#pragma once

#include "magfilm/material.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace magfilm {

enum class Edge { left, right, bottom, top };
enum class Axis { x = 0, y = 1, z = 2 };

Edge parse_edge(const std::string& name);
std::string to_string(Edge edge);

/// Node grid on S x [0, 1] in rescaled coordinates (x1, x2, z3). Plate grids carry
/// nz = 1 and the limit thickness; bulk grids carry a finite h.
class Grid {
 public:
  Grid(int nx, int ny, int nz, double lx, double ly, Thickness h, Edge dirichlet_edge);

  static Grid plate(int nx, int ny, double lx, double ly, Edge edge = Edge::left) {
    return Grid(nx, ny, 1, lx, ly, Thickness::limit(), edge);
  }
  static Grid bulk(int nx, int ny, int nz, double lx, double ly, double h,
                   Edge edge = Edge::left) {
    return Grid(nx, ny, nz, lx, ly, Thickness::of(h), edge);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  Thickness thickness() const { return h_; }
  Edge dirichlet_edge() const { return edge_; }

  double dx() const { return lx_ / (nx_ - 1); }
  double dy() const { return ly_ / (ny_ - 1); }
  /// Rescaled through-thickness spacing (0 for single-layer grids).
  double dz() const { return nz_ > 1 ? 1.0 / (nz_ - 1) : 0.0; }
  double spacing(Axis a) const;
  int count(Axis a) const;
  std::size_t stride(Axis a) const;

  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_ * nz_; }
  std::size_t planar_size() const { return static_cast<std::size_t>(nx_) * ny_; }
  double area() const { return lx_ * ly_; }

  std::size_t index(int i, int j, int k = 0) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx_) * (j + static_cast<std::size_t>(ny_) * k);
  }
  std::size_t planar_index(std::size_t node) const { return node % planar_size(); }
  int layer(std::size_t node) const { return static_cast<int>(node / planar_size()); }
  Vec3 position(std::size_t node) const;

  bool on_dirichlet_edge(int i, int j) const;
  bool on_dirichlet_edge(std::size_t node) const;

  /// Trapezoidal weights over S x [0, 1]; they sum to |S|.
  const std::vector<double>& weights() const { return weights_; }

  /// Same planar layout with a different layer count / thickness.
  Grid with_layers(int nz, Thickness h) const { return Grid(nx_, ny_, nz, lx_, ly_, h, edge_); }
  bool same_planar_layout(const Grid& other) const;
  bool same_layout(const Grid& other) const;

 private:
  int nx_, ny_, nz_;
  double lx_, ly_;
  Thickness h_;
  Edge edge_;
  std::vector<double> weights_;
};

/// d/d(axis): central differences inside, second-order one-sided at the ends
/// (two-point difference when the axis has two nodes, zero for one node).
void derivative(const Grid& grid, Axis axis, std::span<const double> f, std::span<double> out);
/// out += D^T g, the adjoint of derivative().
void derivative_adjoint_add(const Grid& grid, Axis axis, std::span<const double> g,
                            std::span<double> out);

/// Per-node displacement gradient G with G(a, b) = d u_a / d x_b.
std::vector<Mat3> gradient(const Grid& grid, std::span<const Vec3> u);
/// Per-node symmetric gradient (G + G^T) / 2.
std::vector<Mat3> symmetric_gradient(const Grid& grid, std::span<const Vec3> u);

class MagnetizationField {
 public:
  /// Validates saturation at every node and column-constancy when planar_only.
  MagnetizationField(Grid grid, std::vector<Vec3> values, double m_sat, bool planar_only);

  static MagnetizationField uniform(const Grid& grid, const Vec3& direction, double m_sat);

  const Grid& grid() const { return grid_; }
  std::span<const Vec3> values() const { return values_; }
  const Vec3& operator[](std::size_t n) const { return values_[n]; }
  std::size_t size() const { return values_.size(); }
  double m_sat() const { return m_sat_; }
  bool planar_only() const { return planar_only_; }
  double max_saturation_violation() const;

 private:
  Grid grid_;
  std::vector<Vec3> values_;
  double m_sat_;
  bool planar_only_;
};

/// Rescales every node to norm m_sat. Zero vectors are rejected.
MagnetizationField project_sphere(const Grid& grid, std::span<const Vec3> raw, double m_sat,
                                  bool planar_only = false);

/// Copies a single-layer (plate) field onto every layer of `grid3d`.
MagnetizationField extrude(const MagnetizationField& planar, const Grid& grid3d);

/// Dirichlet mode sampled on a node grid; the applied datum is amplitude * mode.
class DirichletDatum {
 public:
  using ModeFunction = std::function<Vec3(const Vec3& x)>;

  DirichletDatum(Grid grid, std::vector<Vec3> mode, bool analytic);
  /// Samples `fn` at (x1, x2, z3) of every node.
  static DirichletDatum sample(const Grid& grid, const ModeFunction& fn);
  static DirichletDatum zero(const Grid& grid);

  const Grid& grid() const { return grid_; }
  std::span<const Vec3> mode() const { return mode_; }
  bool analytic() const { return analytic_; }

 private:
  Grid grid_;
  std::vector<Vec3> mode_;
  bool analytic_;
};

enum class ModeKind { none, stretch, shear, bending };
ModeKind parse_mode(const std::string& name);
/// Kirchhoff-Love modes: stretch (x1, 0, 0), shear (x2, x1, 0) / 2,
/// bending (-z3 x1, 0, x1^2 / 2).
DirichletDatum::ModeFunction mode_function(ModeKind kind);

/// max over nodes of |eps_i3(mode)|, i = 1, 2, 3.
double validate_KL(const DirichletDatum& datum);
/// 1e-10 for analytically sampled modes, 10 dx^2 otherwise.
double kl_tolerance(const DirichletDatum& datum);

struct PlateState {
  std::vector<double> v1, v2, v;
  MagnetizationField m;
};

struct BulkState {
  std::vector<Vec3> u;
  MagnetizationField m;
};

/// 3D displacement on `grid3d` (same planar layout) realizing eps_i3 = eps_mag_i3:
/// u3 = v + z3 g, u_i = v_i + z3 (2 t_i - d_i v) - z3^2 / 2 d_i g with
/// g = m3^2 - m_sat^2 / 3 and t_i = m_i m3.
std::vector<Vec3> lift_displacement(const PlateState& state, const Grid& grid3d);

}  // namespace magfilm
