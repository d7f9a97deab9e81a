#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/SparseCore>

#include "nonlocal_spectra/coefficients.hpp"
#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/grid.hpp"
#include "nonlocal_spectra/kernel.hpp"

namespace nls {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

/// FULL_I keeps the nonlocal gain; LOCAL_A drops it and keeps only the -nu(x) loss.
enum class OperatorVariant { FullI, LocalA };

/// Sparse realisation of the operator on the interior unknowns of a grid.
///
/// `L` acts on interior values with u = 0 on the complement of D. `B` holds
/// the couplings from interior rows to stored exterior nodes, so that
/// `L u + B g` evaluates the operator for exterior data g.
struct DiscreteOperator {
  std::shared_ptr<const SpatialGrid> grid;
  OperatorVariant variant = OperatorVariant::FullI;
  SparseMatrix L;
  SparseMatrix B;
  /// Provenance: local stencil rows (diffusion, drift, c) without the -nu diagonal.
  SparseMatrix local;
  /// Provenance: nonnegative nonlocal gain toward interior nodes (self-gain on the diagonal).
  SparseMatrix gain;
  /// Per-row discrete kernel mass, the part landing on interior nodes, and the part leaving D.
  std::vector<double> nu, gain_mass, leak;
  /// c at interior nodes.
  std::vector<double> c;
  /// All off-diagonal entries of L and all entries of B are >= 0.
  bool is_monotone_scheme = false;
  /// Smallest s >= 0 with L + s I entrywise nonnegative (when monotone).
  double min_shift = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(L.rows()); }
  double max_c() const { return *std::max_element(c.begin(), c.end()); }
  double min_c() const { return *std::min_element(c.begin(), c.end()); }

  /// (L u + B g) for interior values u and exterior data g.
  Vector apply(const Vector& u, const Vector& g) const { return L * u + B * g; }
};

struct LocalAssembly {
  SparseMatrix interior;
  SparseMatrix exterior;
  bool monotone = true;
};

/// Central differences for trace(a D^2), first-order upwind for b . grad, plus c on the diagonal.
///
/// In 2D the mixed derivative uses the 7-point scheme oriented by sign(a12);
/// the scheme is monotone when a11 >= |a12| and a22 >= |a12|.
inline LocalAssembly assemble_local(const SpatialGrid& grid, const CoefficientField& field) {
  const std::size_t n = grid.num_interior();
  const std::size_t m = grid.num_exterior();
  const double h = grid.h();
  const double h2 = h * h;
  std::vector<Triplet> tin, tex;
  tin.reserve(n * (grid.dim() == 1 ? 3 : 9));
  LocalAssembly out;

  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t id = grid.interior_node(p);
    const Node& node = grid.nodes()[id];
    const Matrix2& a = field.a[id];
    const Vector2& b = field.b[id];
    double diag = field.c[id];

    auto couple = [&](long di, long dj, double w) {
      if (w == 0.0) return;
      const auto nb = grid.find(node.lattice[0] + di, node.lattice[1] + dj);
      if (!nb) fail(ErrorCode::Internal, "local stencil left the stored lattice");
      const long q = grid.unknown_of(*nb);
      if (q >= 0)
        tin.emplace_back(static_cast<int>(p), static_cast<int>(q), w);
      else
        tex.emplace_back(static_cast<int>(p), static_cast<int>(grid.exterior_of(*nb)), w);
    };

    if (grid.dim() == 1) {
      const double west = a(0, 0) / h2 + std::max(-b[0], 0.0) / h;
      const double east = a(0, 0) / h2 + std::max(b[0], 0.0) / h;
      diag -= west + east;
      couple(-1, 0, west);
      couple(1, 0, east);
    } else {
      const double mix = std::abs(a(0, 1));
      const double ax = (a(0, 0) - mix) / h2;
      const double ay = (a(1, 1) - mix) / h2;
      if (ax < -1e-14 * a(0, 0) / h2 || ay < -1e-14 * a(1, 1) / h2) out.monotone = false;
      const double west = ax + std::max(-b[0], 0.0) / h;
      const double east = ax + std::max(b[0], 0.0) / h;
      const double south = ay + std::max(-b[1], 0.0) / h;
      const double north = ay + std::max(b[1], 0.0) / h;
      const double corner = mix / h2;
      diag -= west + east + south + north + 2.0 * corner;
      couple(-1, 0, west);
      couple(1, 0, east);
      couple(0, -1, south);
      couple(0, 1, north);
      if (a(0, 1) > 0.0) {
        couple(1, 1, corner);
        couple(-1, -1, corner);
      } else if (a(0, 1) < 0.0) {
        couple(1, -1, corner);
        couple(-1, 1, corner);
      }
    }
    tin.emplace_back(static_cast<int>(p), static_cast<int>(p), diag);
  }
  out.interior.resize(static_cast<int>(n), static_cast<int>(n));
  out.interior.setFromTriplets(tin.begin(), tin.end());
  out.exterior.resize(static_cast<int>(n), static_cast<int>(m));
  out.exterior.setFromTriplets(tex.begin(), tex.end());
  return out;
}

struct NonlocalAssembly {
  /// Gain toward interior nodes, including the -nu(x) diagonal loss.
  SparseMatrix increment;
  /// Gain toward interior nodes only (no loss term).
  SparseMatrix gain;
  /// Weights toward stored exterior nodes (used for exterior data).
  SparseMatrix exterior;
  std::vector<double> nu, gain_mass, leak;
};

namespace detail {

struct Corner {
  long i, j;
  double w;
};

/// Multilinear distribution of an off-lattice point to the surrounding lattice nodes.
inline std::vector<Corner> snap(const Point& t, double h, int dim) {
  std::vector<Corner> out;
  auto split = [h](double coord, long& base, double& frac) {
    const double u = coord / h;
    const double r = std::round(u);
    if (std::abs(u - r) < 1e-9) {
      base = static_cast<long>(r);
      frac = 0.0;
    } else {
      base = static_cast<long>(std::floor(u));
      frac = u - static_cast<double>(base);
    }
  };
  long i0, j0 = 0;
  double fx, fy = 0.0;
  split(t[0], i0, fx);
  if (dim == 2) split(t[1], j0, fy);
  for (int di = 0; di <= 1; ++di) {
    const double wx = di == 0 ? 1.0 - fx : fx;
    if (wx == 0.0) continue;
    for (int dj = 0; dj <= (dim == 2 ? 1 : 0); ++dj) {
      const double wy = dim == 1 ? 1.0 : (dj == 0 ? 1.0 - fy : fy);
      if (wy == 0.0) continue;
      out.push_back(Corner{i0 + di, j0 + dj, wx * wy});
    }
  }
  return out;
}

}  // namespace detail

/// Quadrature rows of the jump integral with u = 0 on the complement of D.
///
/// Each atom (z, w) at x contributes -w to the diagonal. If x + z lies in D
/// its weight is spread multilinearly over the surrounding lattice nodes;
/// the shares falling on interior nodes form the gain, the rest leaks.
/// Targets outside D leak entirely.
inline NonlocalAssembly assemble_nonlocal(const SpatialGrid& grid, const JumpKernel& kernel) {
  const std::size_t n = grid.num_interior();
  const std::size_t m = grid.num_exterior();
  const int dim = grid.dim();
  const double h = grid.h();
  const double tol = boundary_tolerance(h);
  NonlocalAssembly out;
  out.nu.assign(n, 0.0);
  out.gain_mass.assign(n, 0.0);
  out.leak.assign(n, 0.0);
  std::vector<Triplet> tgain, tex;

  for (std::size_t p = 0; p < n; ++p) {
    const Point& x = grid.interior_point(p);
    const double reach = kernel.support_radius(x);
    if (reach > grid.halo_radius() + 1e-12 * (1.0 + reach))
      fail(ErrorCode::SupportExceedsHalo, "kernel support " + std::to_string(reach) + " exceeds halo " +
                                              std::to_string(grid.halo_radius()));
    for (const Atom& atom : kernel.discretize(x, h, dim)) {
      out.nu[p] += atom.w;
      const Point t = x + atom.z;
      const bool inside = grid.domain().contains(t, tol);
      const auto corners = detail::snap(t, h, dim);
      double exterior_share = 0.0;
      for (const auto& cr : corners) {
        const auto id = grid.find(cr.i, cr.j);
        if (!id) fail(ErrorCode::SupportExceedsHalo, "jump target fell off the stored lattice");
        if (grid.unknown_of(*id) < 0) exterior_share += cr.w;
      }
      for (const auto& cr : corners) {
        const std::size_t id = *grid.find(cr.i, cr.j);
        const long q = grid.unknown_of(id);
        if (q >= 0 && inside) {
          tgain.emplace_back(static_cast<int>(p), static_cast<int>(q), atom.w * cr.w);
          out.gain_mass[p] += atom.w * cr.w;
        } else if (q >= 0) {
          out.leak[p] += atom.w * cr.w;
        } else {
          out.leak[p] += atom.w * cr.w;
          // Exterior data is read from exterior corners only.
          const double share = inside ? cr.w : cr.w / exterior_share;
          tex.emplace_back(static_cast<int>(p), static_cast<int>(grid.exterior_of(id)), atom.w * share);
        }
      }
    }
  }
  out.gain.resize(static_cast<int>(n), static_cast<int>(n));
  out.gain.setFromTriplets(tgain.begin(), tgain.end());
  std::vector<Triplet> tinc = tgain;
  for (std::size_t p = 0; p < n; ++p)
    if (out.nu[p] != 0.0) tinc.emplace_back(static_cast<int>(p), static_cast<int>(p), -out.nu[p]);
  out.increment.resize(static_cast<int>(n), static_cast<int>(n));
  out.increment.setFromTriplets(tinc.begin(), tinc.end());
  out.exterior.resize(static_cast<int>(n), static_cast<int>(m));
  out.exterior.setFromTriplets(tex.begin(), tex.end());
  return out;
}

namespace detail {

inline SparseMatrix diagonal(const std::vector<double>& d) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) t.emplace_back(static_cast<int>(i), static_cast<int>(i), d[i]);
  SparseMatrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline bool offdiagonal_nonnegative(const SparseMatrix& L, const SparseMatrix& B) {
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(L, k); it; ++it)
      if (it.row() != it.col() && it.value() < 0.0) return false;
  for (int k = 0; k < B.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(B, k); it; ++it)
      if (it.value() < 0.0) return false;
  return true;
}

}  // namespace detail

/// Assembles FULL_I (local + nonlocal) or LOCAL_A (local - nu on the diagonal).
inline DiscreteOperator assemble_operator(std::shared_ptr<const SpatialGrid> grid, const CoefficientField& field,
                                          const JumpKernel& kernel, OperatorVariant variant) {
  if (field.c.size() != grid->num_nodes())
    fail(ErrorCode::InconsistentInput, "coefficient field and grid have different node sets");
  DiscreteOperator op;
  op.grid = grid;
  op.variant = variant;
  LocalAssembly loc = assemble_local(*grid, field);
  NonlocalAssembly nl = assemble_nonlocal(*grid, kernel);
  op.local = loc.interior;
  op.gain = nl.gain;
  op.nu = nl.nu;
  op.gain_mass = nl.gain_mass;
  op.leak = nl.leak;
  if (variant == OperatorVariant::FullI) {
    op.L = loc.interior + nl.increment;
    op.B = loc.exterior + nl.exterior;
  } else {
    std::vector<double> minus_nu(nl.nu.size());
    std::transform(nl.nu.begin(), nl.nu.end(), minus_nu.begin(), [](double v) { return -v; });
    op.L = loc.interior + detail::diagonal(minus_nu);
    op.B = loc.exterior;
  }
  op.L.makeCompressed();
  op.B.makeCompressed();
  op.c.resize(grid->num_interior());
  for (std::size_t p = 0; p < grid->num_interior(); ++p) op.c[p] = field.c[grid->interior_node(p)];
  op.is_monotone_scheme = loc.monotone && detail::offdiagonal_nonnegative(op.L, op.B);
  double min_diag = 0.0;
  for (int i = 0; i < op.L.rows(); ++i) min_diag = std::min(min_diag, op.L.coeff(i, i));
  op.min_shift = -min_diag;
  return op;
}

/// Grid + coefficients + kernel in one call; the halo is sized from the kernel reach.
inline DiscreteOperator assemble_on(const Domain& domain, double h, const Coefficients& coeffs,
                                    const JumpKernel& kernel, OperatorVariant variant = OperatorVariant::FullI,
                                    double extra_halo = 0.0) {
  double reach = kernel.uniform_reach().value_or(-1.0);
  if (reach < 0.0) {
    // Scan the interior lattice for the largest support radius.
    SpatialGrid probe = build_grid(domain, h, 0.0);
    reach = 0.0;
    for (std::size_t p = 0; p < probe.num_interior(); ++p)
      reach = std::max(reach, kernel.support_radius(probe.interior_point(p)));
  }
  const double halo = std::max(reach, extra_halo);
  auto grid = std::make_shared<const SpatialGrid>(build_grid(domain, h, halo, reach));
  const CoefficientField field = sample_coefficients(*grid, coeffs);
  return assemble_operator(grid, field, kernel, variant);
}

/// Coordinate-list export: header "row col value", 0-based, sorted by (row, col).
inline void write_coo(std::ostream& os, const SparseMatrix& m) {
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) entries.emplace_back(it.row(), it.col(), it.value());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  os << "row col value\n";
  char buf[64];
  for (const auto& [r, c, v] : entries) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << r << ' ' << c << ' ' << buf << '\n';
  }
}

}  // namespace nls
