#include "magfilm/stray.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace magfilm {
namespace {

using real = long double;

// Newell, Williams & Dunlop auxiliary functions. f is even in every argument,
// g is odd in x and y and even in z; both are evaluated for non-negative input.
real newell_f(real x, real y, real z) {
  const real x2 = x * x, y2 = y * y, z2 = z * z;
  const real r = std::sqrt(x2 + y2 + z2);
  real f = (2 * x2 - y2 - z2) * r / 6;
  if (y > 0 && x2 + z2 > 0) f += 0.5L * y * (z2 - x2) * std::asinh(y / std::sqrt(x2 + z2));
  if (z > 0 && x2 + y2 > 0) f += 0.5L * z * (y2 - x2) * std::asinh(z / std::sqrt(x2 + y2));
  if (x > 0 && y > 0 && z > 0) f -= x * y * z * std::atan(y * z / (x * r));
  return f;
}

real newell_g(real x, real y, real z) {
  const real x2 = x * x, y2 = y * y, z2 = z * z;
  const real r = std::sqrt(x2 + y2 + z2);
  real g = -x * y * r / 3;
  if (z > 0 && x2 + y2 > 0) g += x * y * z * std::asinh(z / std::sqrt(x2 + y2));
  if (x > 0 && y2 + z2 > 0) g += y / 6 * (3 * z2 - y2) * std::asinh(x / std::sqrt(y2 + z2));
  if (y > 0 && x2 + z2 > 0) g += x / 6 * (3 * z2 - x2) * std::asinh(y / std::sqrt(x2 + z2));
  if (z > 0 && x > 0 && y > 0) g -= z2 * z / 6 * std::atan(x * y / (z * r));
  if (y > 0 && x > 0 && z > 0) g -= z * y2 / 2 * std::atan(x * z / (y * r));
  if (x > 0 && y > 0 && z > 0) g -= z * x2 / 2 * std::atan(y * z / (x * r));
  return g;
}

// Lattice table of f or g at (i sx, j sy, k sz) for i in [0, ni] etc.
class LatticeTable {
 public:
  template <class Fn>
  LatticeTable(int ni, int nj, int nk, Fn&& fn) : ni_(ni + 1), nj_(nj + 1), nk_(nk + 1) {
    data_.resize(static_cast<std::size_t>(ni_) * nj_ * nk_);
    for (int k = 0; k < nk_; ++k)
      for (int j = 0; j < nj_; ++j)
        for (int i = 0; i < ni_; ++i) data_[idx(i, j, k)] = fn(i, j, k);
  }
  real operator()(int i, int j, int k) const { return data_[idx(i, j, k)]; }

 private:
  std::size_t idx(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(ni_) * (j + static_cast<std::size_t>(nj_) * k);
  }
  int ni_, nj_, nk_;
  std::vector<real> data_;
};

constexpr real kWeights[4] = {8.0L, -4.0L, 2.0L, -1.0L};

// 27-point second mixed difference of a lattice table around (I, J, K).
// `odd` selects which two lattice arguments carry the sign of g.
real stencil_sum(const LatticeTable& t, int I, int J, int K, int odd_a, int odd_b) {
  real acc = 0;
  for (int k = -1; k <= 1; ++k) {
    for (int j = -1; j <= 1; ++j) {
      for (int i = -1; i <= 1; ++i) {
        const int a[3] = {I + i, J + j, K + k};
        real v = t(std::abs(a[0]), std::abs(a[1]), std::abs(a[2]));
        if (odd_a >= 0) {
          const int sa = (a[odd_a] > 0) - (a[odd_a] < 0);
          const int sb = (a[odd_b] > 0) - (a[odd_b] < 0);
          v *= sa * sb;
        }
        acc += kWeights[std::abs(i) + std::abs(j) + std::abs(k)] * v;
      }
    }
  }
  return acc;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  std::memset(static_cast<void*>(p), 0, sizeof(T) * n);
  return FftwBuffer<T>(p);
}

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::array<double, 6> newell_tensor(const Vec3& offset, double sx, double sy, double sz) {
  const real X = offset(0), Y = offset(1), Z = offset(2);
  const real dx = sx, dy = sy, dz = sz;
  std::array<real, 6> acc{};
  for (int k = -1; k <= 1; ++k) {
    for (int j = -1; j <= 1; ++j) {
      for (int i = -1; i <= 1; ++i) {
        const real w = kWeights[std::abs(i) + std::abs(j) + std::abs(k)];
        const real x = X + i * dx, y = Y + j * dy, z = Z + k * dz;
        const real ax = std::fabs(x), ay = std::fabs(y), az = std::fabs(z);
        const real sgx = (x > 0) - (x < 0), sgy = (y > 0) - (y < 0), sgz = (z > 0) - (z < 0);
        acc[0] += w * newell_f(ax, ay, az);
        acc[1] += w * newell_f(ay, ax, az);
        acc[2] += w * newell_f(az, ay, ax);
        acc[3] += w * sgx * sgy * newell_g(ax, ay, az);
        acc[4] += w * sgx * sgz * newell_g(ax, az, ay);
        acc[5] += w * sgy * sgz * newell_g(ay, az, ax);
      }
    }
  }
  const real norm = 4 * std::numbers::pi_v<real> * dx * dy * dz;
  std::array<double, 6> out{};
  for (int c = 0; c < 6; ++c) out[c] = static_cast<double>(acc[c] / norm);
  return out;
}

struct DemagKernel::Impl {
  int px, py, pz;
  std::size_t real_size, complex_size;
  std::array<FftwBuffer<fftw_complex>, 6> kernel_hat;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

DemagKernel::DemagKernel(int nx, int ny, int nz, double sx, double sy, double sz,
                         int padding_factor)
    : nx_(nx), ny_(ny), nz_(nz), impl_(std::make_unique<Impl>()) {
  if (nx < 1 || ny < 1 || nz < 1) throw ModelError("demag kernel needs a non-empty box grid");
  if (padding_factor < 2) throw ModelError("padding factor must be >= 2");
  if (!(sx > 0 && sy > 0 && sz > 0)) throw ModelError("demag kernel needs positive cell sizes");
  Impl& im = *impl_;
  im.px = padding_factor * nx;
  im.py = padding_factor * ny;
  im.pz = padding_factor * nz;
  im.real_size = static_cast<std::size_t>(im.px) * im.py * im.pz;
  im.complex_size = static_cast<std::size_t>(im.px / 2 + 1) * im.py * im.pz;

  const real dx = sx, dy = sy, dz = sz;
  const LatticeTable fxx(nx, ny, nz, [&](int i, int j, int k) { return newell_f(i * dx, j * dy, k * dz); });
  const LatticeTable fyy(nx, ny, nz, [&](int i, int j, int k) { return newell_f(j * dy, i * dx, k * dz); });
  const LatticeTable fzz(nx, ny, nz, [&](int i, int j, int k) { return newell_f(k * dz, j * dy, i * dx); });
  const LatticeTable gxy(nx, ny, nz, [&](int i, int j, int k) { return newell_g(i * dx, j * dy, k * dz); });
  const LatticeTable gxz(nx, ny, nz, [&](int i, int j, int k) { return newell_g(i * dx, k * dz, j * dy); });
  const LatticeTable gyz(nx, ny, nz, [&](int i, int j, int k) { return newell_g(j * dy, k * dz, i * dx); });
  const real norm = 4 * std::numbers::pi_v<real> * dx * dy * dz;

  std::array<FftwBuffer<double>, 6> spatial;
  for (auto& s : spatial) s = fftw_buffer<double>(im.real_size);
  auto wrap = [](int v, int p) { return v < 0 ? v + p : v; };
  for (int K = -(nz - 1); K <= nz - 1; ++K) {
    for (int J = -(ny - 1); J <= ny - 1; ++J) {
      for (int I = -(nx - 1); I <= nx - 1; ++I) {
        const std::size_t at = static_cast<std::size_t>(wrap(I, im.px)) +
                               static_cast<std::size_t>(im.px) *
                                   (wrap(J, im.py) + static_cast<std::size_t>(im.py) * wrap(K, im.pz));
        spatial[0][at] = static_cast<double>(stencil_sum(fxx, I, J, K, -1, -1) / norm);
        spatial[1][at] = static_cast<double>(stencil_sum(fyy, I, J, K, -1, -1) / norm);
        spatial[2][at] = static_cast<double>(stencil_sum(fzz, I, J, K, -1, -1) / norm);
        spatial[3][at] = static_cast<double>(stencil_sum(gxy, I, J, K, 0, 1) / norm);
        spatial[4][at] = static_cast<double>(stencil_sum(gxz, I, J, K, 0, 2) / norm);
        spatial[5][at] = static_cast<double>(stencil_sum(gyz, I, J, K, 1, 2) / norm);
      }
    }
  }

  auto scratch_r = fftw_buffer<double>(im.real_size);
  auto scratch_c = fftw_buffer<fftw_complex>(im.complex_size);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    im.forward = fftw_plan_dft_r2c_3d(im.pz, im.py, im.px, scratch_r.get(), scratch_c.get(),
                                      FFTW_ESTIMATE);
    im.backward = fftw_plan_dft_c2r_3d(im.pz, im.py, im.px, scratch_c.get(), scratch_r.get(),
                                       FFTW_ESTIMATE);
  }
  for (int c = 0; c < 6; ++c) {
    im.kernel_hat[c] = fftw_buffer<fftw_complex>(im.complex_size);
    fftw_execute_dft_r2c(im.forward, spatial[c].get(), im.kernel_hat[c].get());
  }
}

DemagKernel::~DemagKernel() {
  if (!impl_) return;
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (impl_->forward) fftw_destroy_plan(impl_->forward);
  if (impl_->backward) fftw_destroy_plan(impl_->backward);
}

std::vector<Vec3> DemagKernel::apply(std::span<const Vec3> m) const {
  const Impl& im = *impl_;
  const std::size_t ncell = static_cast<std::size_t>(nx_) * ny_ * nz_;
  if (m.size() != ncell) throw ModelError("demag kernel: magnetization size mismatch");
  std::array<FftwBuffer<fftw_complex>, 3> mhat;
  auto buf = fftw_buffer<double>(im.real_size);
  for (int a = 0; a < 3; ++a) {
    std::fill(buf.get(), buf.get() + im.real_size, 0.0);
    for (int k = 0; k < nz_; ++k)
      for (int j = 0; j < ny_; ++j)
        for (int i = 0; i < nx_; ++i) {
          buf[static_cast<std::size_t>(i) + static_cast<std::size_t>(im.px) * (j + static_cast<std::size_t>(im.py) * k)] =
              m[static_cast<std::size_t>(i) + static_cast<std::size_t>(nx_) * (j + static_cast<std::size_t>(ny_) * k)](a);
        }
    mhat[a] = fftw_buffer<fftw_complex>(im.complex_size);
    fftw_execute_dft_r2c(im.forward, buf.get(), mhat[a].get());
  }
  // Symmetric tensor slots for (row, col).
  static constexpr int kSlot[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
  auto hhat = fftw_buffer<fftw_complex>(im.complex_size);
  std::vector<Vec3> h(ncell, Vec3::Zero());
  const double scale = 1.0 / static_cast<double>(im.real_size);
  for (int a = 0; a < 3; ++a) {
    for (std::size_t q = 0; q < im.complex_size; ++q) {
      std::complex<double> acc = 0.0;
      for (int b = 0; b < 3; ++b) {
        const auto* kq = im.kernel_hat[kSlot[a][b]].get()[q];
        const auto* mq = mhat[b].get()[q];
        acc += std::complex<double>(kq[0], kq[1]) * std::complex<double>(mq[0], mq[1]);
      }
      hhat[q][0] = -acc.real();
      hhat[q][1] = -acc.imag();
    }
    fftw_execute_dft_c2r(im.backward, hhat.get(), buf.get());
    for (int k = 0; k < nz_; ++k)
      for (int j = 0; j < ny_; ++j)
        for (int i = 0; i < nx_; ++i) {
          h[static_cast<std::size_t>(i) + static_cast<std::size_t>(nx_) * (j + static_cast<std::size_t>(ny_) * k)](a) =
              scale * buf[static_cast<std::size_t>(i) + static_cast<std::size_t>(im.px) * (j + static_cast<std::size_t>(im.py) * k)];
        }
  }
  return h;
}

namespace {

struct CellLayout {
  int cx, cy, cz;      // box counts
  double sx, sy, sz;   // physical box sizes
};

CellLayout cell_layout(const Grid& g) {
  return {2 * (g.nx() - 1), 2 * (g.ny() - 1), 2 * (g.nz() - 1), 0.5 * g.dx(), 0.5 * g.dy(),
          0.5 * g.dz() * g.thickness().value()};
}

// Node owning box c along an axis: node 0 owns box 0, node i owns boxes 2i-1 and 2i.
int owner(int c) { return (c + 1) / 2; }

void check_stray_grid(const MagnetizationField& m) {
  const Grid& g = m.grid();
  if (g.nz() < 2 || g.thickness().is_limit()) {
    throw ModelError("stray solve needs a bulk grid with at least two layers");
  }
  for (const auto& v : m.values()) {
    if (!v.allFinite()) throw ModelError("stray solve: non-finite magnetization");
  }
}

std::vector<Vec3> boxes_from_nodes(const MagnetizationField& m, const CellLayout& L) {
  const Grid& g = m.grid();
  std::vector<Vec3> boxes(static_cast<std::size_t>(L.cx) * L.cy * L.cz);
  for (int k = 0; k < L.cz; ++k)
    for (int j = 0; j < L.cy; ++j)
      for (int i = 0; i < L.cx; ++i)
        boxes[static_cast<std::size_t>(i) + static_cast<std::size_t>(L.cx) * (j + static_cast<std::size_t>(L.cy) * k)] =
            m[g.index(owner(i), owner(j), owner(k))];
  return boxes;
}

using KernelKey = std::tuple<int, int, int, double, double, double, int>;

std::shared_ptr<const DemagKernel> cached_kernel(const CellLayout& L, int padding) {
  static std::mutex mutex;
  static std::map<KernelKey, std::shared_ptr<const DemagKernel>> cache;
  const KernelKey key{L.cx, L.cy, L.cz, L.sx, L.sy, L.sz, padding};
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  if (cache.size() > 64) cache.clear();
  auto k = std::make_shared<const DemagKernel>(L.cx, L.cy, L.cz, L.sx, L.sy, L.sz, padding);
  cache.emplace(key, k);
  return k;
}

}  // namespace

StrayFieldSolution solve_stray_fft(const MagnetizationField& m, const StrayOptions& opts) {
  check_stray_grid(m);
  const Grid& g = m.grid();
  const CellLayout L = cell_layout(g);
  const auto kernel = cached_kernel(L, opts.padding_factor);
  const auto hbox = kernel->apply(boxes_from_nodes(m, L));

  StrayFieldSolution sol;
  sol.hfield.assign(g.size(), Vec3::Zero());
  std::vector<int> count(g.size(), 0);
  for (int k = 0; k < L.cz; ++k)
    for (int j = 0; j < L.cy; ++j)
      for (int i = 0; i < L.cx; ++i) {
        const std::size_t n = g.index(owner(i), owner(j), owner(k));
        sol.hfield[n] += hbox[static_cast<std::size_t>(i) + static_cast<std::size_t>(L.cx) * (j + static_cast<std::size_t>(L.cy) * k)];
        ++count[n];
      }
  double e = 0.0;
  const auto& w = g.weights();
  for (std::size_t n = 0; n < g.size(); ++n) {
    sol.hfield[n] /= count[n];
    e -= w[n] * m[n].dot(sol.hfield[n]);
  }
  sol.energy = 0.5 * e / g.area();
  return sol;
}

double stray_energy_direct(const MagnetizationField& m) {
  check_stray_grid(m);
  const Grid& g = m.grid();
  const CellLayout L = cell_layout(g);
  const auto boxes = boxes_from_nodes(m, L);
  auto centre = [&](std::size_t c) {
    const std::size_t i = c % L.cx, j = (c / L.cx) % L.cy, k = c / (static_cast<std::size_t>(L.cx) * L.cy);
    return Vec3(i * L.sx, j * L.sy, k * L.sz);
  };
  double e = 0.0;
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const auto n = newell_tensor(centre(a) - centre(b), L.sx, L.sy, L.sz);
      Mat3 t;
      t << n[0], n[3], n[4], n[3], n[1], n[5], n[4], n[5], n[2];
      e += boxes[a].dot(t * boxes[b]);
    }
  }
  const double volume = L.sx * L.sy * L.sz;
  return 0.5 * e * volume / (g.area() * g.thickness().value());
}

double stray_energy_limit(const MagnetizationField& m) {
  if (!m.planar_only()) throw ModelError("stray_energy_limit: magnetization must be planar-only");
  const Grid& g = m.grid();
  const auto& w = g.weights();
  double e = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) e += w[n] * 0.5 * m[n](2) * m[n](2);
  return e / g.area();
}

int extrusion_layers(double h, double planar_spacing, int cap) {
  const int n = static_cast<int>(std::lround(h / planar_spacing));
  return std::max(2, std::min(n, std::max(cap, 2)));
}

std::vector<StrayDiagnosticRow> stray_limit_diagnostic(const MagnetizationField& planar,
                                                       std::span<const double> h_list,
                                                       const StrayOptions& opts) {
  if (planar.grid().nz() != 1) throw ModelError("stray diagnostic expects a plate magnetization");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    if (!(h_list[i] > 0.0 && h_list[i] <= 1.0)) throw ModelError("h_list entries must lie in (0, 1]");
    if (i > 0 && !(h_list[i] < h_list[i - 1])) throw ModelError("h_list must be strictly decreasing");
  }
  const Grid& pg = planar.grid();
  const double surrogate = stray_energy_limit(planar);
  std::vector<StrayDiagnosticRow> rows;
  for (double h : h_list) {
    const int nz = extrusion_layers(h, std::min(pg.dx(), pg.dy()), opts.nz_cap);
    const Grid g3 = pg.with_layers(nz, Thickness::of(h));
    const auto sol = solve_stray_fft(extrude(planar, g3), opts);
    rows.push_back({h, nz, sol.energy, surrogate, std::abs(sol.energy - surrogate)});
  }
  return rows;
}

bool gaps_nonincreasing(std::span<const StrayDiagnosticRow> rows, double slack) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].gap > (1.0 + slack) * rows[i - 1].gap) return false;
  }
  return true;
}

}  // namespace magfilm
