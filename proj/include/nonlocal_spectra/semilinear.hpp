#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "nonlocal_spectra/linear.hpp"

namespace nls {

/// f(x, u) of the semilinear problem L u = f(x, u).
using Nonlinearity = std::function<double(const Point& x, double u)>;

struct IterationTrace {
  std::vector<Vector> iterates;
  std::vector<double> residuals;
  double theta = 0.0;
  std::string reason;
  /// Largest violation of the sub/supersolution inequalities that was accepted as within tol.
  double inequality_slack = 0.0;
};

struct MonotoneOptions {
  std::optional<double> theta;
  double tol = 1e-8;
  int max_iter = 20000;
  /// Keep every iterate in the trace (otherwise only the last one).
  bool keep_iterates = true;
};

struct MonotoneSolution {
  Vector u;
  IterationTrace trace;
};

namespace detail {

inline Vector evaluate(const DiscreteOperator& op, const Nonlinearity& f, const Vector& u) {
  const SpatialGrid& g = *op.grid;
  Vector out(u.size());
  for (Eigen::Index p = 0; p < u.size(); ++p) out[p] = f(g.interior_point(static_cast<std::size_t>(p)), u[p]);
  return out;
}

// Sampled Lipschitz bound of u -> f(x, u) on [lo, hi], over all interior nodes.
inline double lipschitz_estimate(const DiscreteOperator& op, const Nonlinearity& f, double lo, double hi) {
  const SpatialGrid& g = *op.grid;
  if (!(hi > lo)) return 0.0;
  constexpr int samples = 64;
  const double du = (hi - lo) / samples;
  double lip = 0.0;
  for (std::size_t p = 0; p < g.num_interior(); ++p) {
    const Point& x = g.interior_point(p);
    double prev = f(x, lo);
    for (int k = 1; k <= samples; ++k) {
      const double cur = f(x, lo + k * du);
      lip = std::max(lip, std::abs(cur - prev) / du);
      prev = cur;
    }
  }
  return lip;
}

}  // namespace detail

/// Monotone iteration (L - theta) xi_{i+1} = f(xi_i) - theta xi_i from the subsolution upward.
///
/// theta must dominate the Lipschitz constant of f on [min sub, max super]
/// and make lambda(L - theta) positive. When not supplied it is
/// max(Lipschitz estimate, sup|c|) + 1, doubled until the second condition holds;
/// a supplied theta is raised the same way if it violates either condition.
inline MonotoneSolution monotone_iterate(const DiscreteOperator& op, const Nonlinearity& f, const Vector& sub,
                                         const Vector& super, const MonotoneOptions& opt = {}) {
  const Eigen::Index n = static_cast<Eigen::Index>(op.size());
  if (sub.size() != n || super.size() != n) fail(ErrorCode::InconsistentInput, "sub/super length mismatch");
  if (!(opt.tol > 0.0)) fail(ErrorCode::InvalidParameter, "tol must be positive");
  const SpatialGrid& g = *op.grid;
  auto where = [&](Eigen::Index p) {
    const Point& x = g.interior_point(static_cast<std::size_t>(p));
    return "unknown " + std::to_string(p) + " at x=(" + std::to_string(x[0]) + "," + std::to_string(x[1]) + ")";
  };

  MonotoneSolution out;
  for (Eigen::Index p = 0; p < n; ++p)
    if (sub[p] > super[p] + opt.tol) fail(ErrorCode::OrderingBroken, "sub > super at " + where(p));

  const Vector sub_defect = op.L * sub - detail::evaluate(op, f, sub);      // must be >= 0
  const Vector super_defect = op.L * super - detail::evaluate(op, f, super);  // must be <= 0
  for (Eigen::Index p = 0; p < n; ++p) {
    if (sub_defect[p] < -opt.tol) fail(ErrorCode::OrderingBroken, "subsolution inequality fails at " + where(p));
    if (super_defect[p] > opt.tol) fail(ErrorCode::OrderingBroken, "supersolution inequality fails at " + where(p));
    out.trace.inequality_slack = std::max({out.trace.inequality_slack, -sub_defect[p], super_defect[p]});
  }

  const double lip = detail::lipschitz_estimate(op, f, sub.minCoeff(), super.maxCoeff());
  double c_sup = 0.0;
  for (double v : op.c) c_sup = std::max(c_sup, std::abs(v));
  double theta = opt.theta.value_or(std::max(lip, c_sup) + 1.0);
  if (theta < lip) theta = lip + 1.0;
  const EigenResult e = principal_eig(op);
  while (!(e.lambda + theta > 3.0 * e.residual)) theta = 2.0 * std::max(theta, 0.5);
  out.trace.theta = theta;

  SparseMatrix M = op.L;
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it)
      if (it.row() == it.col()) it.valueRef() -= theta;
  Eigen::SparseLU<SparseMatrix> lu(M);
  if (lu.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "L - theta is singular");

  const double order_tol = 1e-12 * std::max(1.0, super.cwiseAbs().maxCoeff());
  Vector xi = sub;
  if (opt.keep_iterates) out.trace.iterates.push_back(xi);
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector fx = detail::evaluate(op, f, xi);
    const double res = (op.L * xi - fx).lpNorm<Eigen::Infinity>();
    out.trace.residuals.push_back(res);
    if (res <= opt.tol) {
      out.trace.reason = "residual below tol";
      out.u = xi;
      if (!opt.keep_iterates) out.trace.iterates.push_back(xi);
      return out;
    }
    Vector next = lu.solve(Vector(fx - theta * xi));
    for (Eigen::Index p = 0; p < n; ++p) {
      if (next[p] < xi[p] - order_tol)
        fail(ErrorCode::OrderingBroken, "iterate decreased at " + where(p) + " in step " + std::to_string(it + 1));
      if (next[p] > super[p] + order_tol + opt.tol)
        fail(ErrorCode::OrderingBroken, "iterate passed the supersolution at " + where(p));
    }
    xi = std::move(next);
    if (opt.keep_iterates) out.trace.iterates.push_back(xi);
  }
  out.trace.reason = "max_iter";
  fail(ErrorCode::NotConverged, "monotone iteration did not reach tol in " + std::to_string(opt.max_iter) + " steps");
}

/// Damped Newton for L u = f(x, u), with df/du supplied. Used as an independent check.
inline Vector newton_solve(const DiscreteOperator& op, const Nonlinearity& f, const Nonlinearity& dfdu, Vector u,
                           double tol = 1e-12, int max_iter = 100) {
  const SpatialGrid& g = *op.grid;
  auto residual = [&](const Vector& v) { return Vector(op.L * v - detail::evaluate(op, f, v)); };
  Vector r = residual(u);
  for (int it = 0; it < max_iter && r.lpNorm<Eigen::Infinity>() > tol; ++it) {
    SparseMatrix J = op.L;
    std::vector<Triplet> diag;
    for (Eigen::Index p = 0; p < u.size(); ++p)
      diag.emplace_back(static_cast<int>(p), static_cast<int>(p), -dfdu(g.interior_point(static_cast<std::size_t>(p)), u[p]));
    SparseMatrix D(J.rows(), J.cols());
    D.setFromTriplets(diag.begin(), diag.end());
    J += D;
    Eigen::SparseLU<SparseMatrix> lu(J);
    if (lu.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "Newton Jacobian is singular");
    const Vector step = lu.solve(r);
    double t = 1.0;
    const double r0 = r.lpNorm<Eigen::Infinity>();
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const Vector trial = u - t * step;
      const Vector rt = residual(trial);
      if (rt.lpNorm<Eigen::Infinity>() < r0 || k == 29) {
        u = trial;
        r = rt;
        break;
      }
    }
  }
  if (r.lpNorm<Eigen::Infinity>() > tol) fail(ErrorCode::NotConverged, "Newton did not converge");
  return u;
}

}  // namespace nls
