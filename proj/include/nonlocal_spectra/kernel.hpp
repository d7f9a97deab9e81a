#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/geometry.hpp"

namespace nls {

/// One jump destination offset z with weight w >= 0.
struct Atom {
  Point z;
  double w;
};

enum class KernelVariant { Atomic, Density, TranslationInvariant };

/// Finite jump measure nu(x, dz).
///
/// Atomic kernels are used exactly. Density kernels g(x, z) dz are
/// discretized with the midpoint rule on the offset lattice h Z^d (cell of
/// volume h^d centred at each offset); the zero offset is always dropped
/// since nu(x, {0}) carries no jump.
class JumpKernel {
 public:
  using AtomField = std::function<std::vector<Atom>(const Point&)>;
  using DensityField = std::function<double(const Point& x, const Point& z)>;
  using Profile = std::function<double(const Point& z)>;
  using RadiusField = std::function<double(const Point&)>;

  /// nu = 0.
  static JumpKernel none() { return atomic({}); }

  /// Same atoms at every x.
  static JumpKernel atomic(std::vector<Atom> atoms) {
    for (const Atom& a : atoms)
      if (!(a.w >= 0.0) || !std::isfinite(a.w)) fail(ErrorCode::NegativeWeight, "atomic weight must be >= 0");
    double reach = 0.0;
    for (const Atom& a : atoms) reach = std::max(reach, a.z.norm());
    JumpKernel k(KernelVariant::Atomic);
    auto shared = std::make_shared<const std::vector<Atom>>(std::move(atoms));
    k.atoms_ = [shared](const Point&) { return *shared; };
    k.radius_ = [reach](const Point&) { return reach; };
    k.uniform_reach_ = reach;
    return k;
  }

  /// Position-dependent atoms; `radius` must bound |z| over the atoms at x.
  static JumpKernel atomic_field(AtomField atoms, RadiusField radius) {
    JumpKernel k(KernelVariant::Atomic);
    k.atoms_ = std::move(atoms);
    k.radius_ = std::move(radius);
    return k;
  }

  /// nu(x, dz) = g(x, z) dz with g(x, .) supported in the closed ball of radius radius(x).
  static JumpKernel density(DensityField g, RadiusField radius) {
    JumpKernel k(KernelVariant::Density);
    k.density_ = std::move(g);
    k.radius_ = std::move(radius);
    return k;
  }

  /// nu(x, dz) = g(z) dz with g supported in the closed ball of radius `radius`.
  static JumpKernel translation_invariant(Profile g, double radius) {
    if (!(radius >= 0.0)) fail(ErrorCode::InvalidParameter, "support radius must be >= 0");
    JumpKernel k(KernelVariant::TranslationInvariant);
    k.density_ = [g](const Point&, const Point& z) { return g(z); };
    k.radius_ = [radius](const Point&) { return radius; };
    k.uniform_reach_ = radius;
    return k;
  }

  KernelVariant variant() const { return variant_; }
  bool has_density() const { return variant_ != KernelVariant::Atomic; }

  /// Support radius of nu(x, .).
  double support_radius(const Point& x) const { return radius_(x); }

  /// Reach shared by every x, when the kernel has one.
  std::optional<double> uniform_reach() const { return uniform_reach_; }

  /// Density value g(x, z), zero beyond the declared support radius and for atomic kernels.
  double density_at(const Point& x, const Point& z) const {
    if (!has_density() || z.norm() > radius_(x) * (1.0 + 1e-12) + 1e-300) return 0.0;
    return density_(x, z);
  }

  /// Atoms of the discretized measure at x. Weights are checked >= 0.
  std::vector<Atom> discretize(const Point& x, double h, int dim) const {
    std::vector<Atom> out;
    if (variant_ == KernelVariant::Atomic) {
      for (Atom a : atoms_(x)) {
        if (!(a.w >= 0.0) || !std::isfinite(a.w)) fail(ErrorCode::NegativeWeight, "atomic weight must be >= 0");
        if (dim == 1) a.z[1] = 0.0;
        if (a.w > 0.0 && a.z.squaredNorm() > 0.0) out.push_back(a);
      }
      return out;
    }
    const double rho = radius_(x);
    if (!(rho >= 0.0) || !std::isfinite(rho)) fail(ErrorCode::InvalidParameter, "support radius must be finite");
    const long k = static_cast<long>(std::floor(rho / h + 1e-9));
    const double cell = dim == 1 ? h : h * h;
    const double tol = 1e-9 * h;
    for (long i = -k; i <= k; ++i) {
      const long jmax = dim == 2 ? k : 0;
      for (long j = -jmax; j <= jmax; ++j) {
        if (i == 0 && j == 0) continue;
        const Point z(static_cast<double>(i) * h, static_cast<double>(j) * h);
        if (norm(z, dim) > rho + tol) continue;
        const double g = density_(x, z);
        if (!(g >= 0.0) || !std::isfinite(g))
          fail(ErrorCode::NegativeWeight, "density must be finite and >= 0 (got " + std::to_string(g) + ")");
        if (g > 0.0) out.push_back(Atom{z, g * cell});
      }
    }
    return out;
  }

  /// Total mass of the discretized measure at x.
  double mass(const Point& x, double h, int dim) const {
    double m = 0.0;
    for (const Atom& a : discretize(x, h, dim)) m += a.w;
    return m;
  }

 private:
  explicit JumpKernel(KernelVariant v) : variant_(v) {}

  KernelVariant variant_;
  AtomField atoms_;
  DensityField density_;
  RadiusField radius_;
  std::optional<double> uniform_reach_;
};

}  // namespace nls
