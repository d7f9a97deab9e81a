#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/grid.hpp"

namespace nls {

using Matrix2 = Eigen::Matrix2d;
using Vector2 = Eigen::Vector2d;

/// Local coefficients of trace(a D^2 u) + b . grad u + c u as functions of position.
struct Coefficients {
  std::function<Matrix2(const Point&)> a;
  std::function<Vector2(const Point&)> b;
  std::function<double(const Point&)> c;
  /// Ellipticity constant; when unset it is inferred from the sampled a.
  std::optional<double> kappa;

  static Coefficients constant(int dim, double diffusion = 1.0, Vector2 drift = Vector2::Zero(), double potential = 0.0) {
    Matrix2 a = Matrix2::Zero();
    a(0, 0) = diffusion;
    if (dim == 2) a(1, 1) = diffusion;
    if (dim == 1) drift[1] = 0.0;
    return Coefficients{[a](const Point&) { return a; }, [drift](const Point&) { return drift; },
                        [potential](const Point&) { return potential; }, std::nullopt};
  }

  static Coefficients laplacian(int dim) { return constant(dim); }

  /// Same coefficients with `extra` added to the potential.
  Coefficients plus_potential(std::function<double(const Point&)> extra) const {
    Coefficients out = *this;
    auto base = c;
    out.c = [base, extra](const Point& x) { return base(x) + extra(x); };
    return out;
  }
};

/// Coefficients sampled on every stored node of a grid.
struct CoefficientField {
  std::vector<Matrix2> a;
  std::vector<Vector2> b;
  std::vector<double> c;
  double kappa = 1.0;
  /// sup over interior nodes of the spectral norm of a.
  double a_sup = 0.0;
};

/// Samples and validates coefficients on all stored nodes.
///
/// Symmetry and finiteness are required everywhere; uniform ellipticity
/// (spectrum of a inside [kappa, 1/kappa]) is required on interior nodes.
inline CoefficientField sample_coefficients(const SpatialGrid& grid, const Coefficients& coeffs) {
  const int dim = grid.dim();
  CoefficientField f;
  f.a.reserve(grid.num_nodes());
  f.b.reserve(grid.num_nodes());
  f.c.reserve(grid.num_nodes());
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = 0.0;
  for (const Node& node : grid.nodes()) {
    Matrix2 a = coeffs.a(node.x);
    Vector2 b = coeffs.b(node.x);
    const double c = coeffs.c(node.x);
    if (dim == 1) {
      a(0, 1) = a(1, 0) = a(1, 1) = 0.0;
      b[1] = 0.0;
    }
    if (!a.allFinite() || !b.allFinite() || !std::isfinite(c))
      fail(ErrorCode::InvalidCoefficient, "non-finite coefficient at x=(" + std::to_string(node.x[0]) + "," +
                                              std::to_string(node.x[1]) + ")");
    if (std::abs(a(0, 1) - a(1, 0)) > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()))
      fail(ErrorCode::NonSymmetricA, "a(x) is not symmetric at x=(" + std::to_string(node.x[0]) + "," +
                                         std::to_string(node.x[1]) + ")");
    if (node.kind == NodeKind::Interior) {
      double lo, hi;
      if (dim == 1) {
        lo = hi = a(0, 0);
      } else {
        Eigen::SelfAdjointEigenSolver<Matrix2> es(a, Eigen::EigenvaluesOnly);
        lo = es.eigenvalues()[0];
        hi = es.eigenvalues()[1];
      }
      min_eig = std::min(min_eig, lo);
      max_eig = std::max(max_eig, hi);
    }
    f.a.push_back(a);
    f.b.push_back(b);
    f.c.push_back(c);
  }
  if (!(min_eig > 0.0)) fail(ErrorCode::EllipticityViolated, "a(x) is degenerate or indefinite on D");
  const double inferred = std::min(min_eig, 1.0 / max_eig);
  if (coeffs.kappa) {
    const double k = *coeffs.kappa;
    if (!(k > 0.0 && k <= 1.0)) fail(ErrorCode::InvalidParameter, "kappa must lie in (0,1]");
    if (min_eig < k * (1.0 - 1e-12) || max_eig > (1.0 / k) * (1.0 + 1e-12))
      fail(ErrorCode::EllipticityViolated, "spectrum of a leaves [kappa, 1/kappa]: observed [" +
                                               std::to_string(min_eig) + ", " + std::to_string(max_eig) + "]");
    f.kappa = k;
  } else {
    f.kappa = inferred;
  }
  f.a_sup = max_eig;
  return f;
}

}  // namespace nls
