#pragma once

#include <Eigen/SparseLU>

#include "nonlocal_spectra/eigen.hpp"

namespace nls {

/// Solves L u = f with u = 0 on the complement. No sign precondition.
inline Vector solve_dirichlet(const SparseMatrix& L, const Vector& f) {
  if (f.size() != L.rows()) fail(ErrorCode::InconsistentInput, "right-hand side length mismatch");
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(L);
  if (lu.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "Dirichlet system is singular");
  Vector u = lu.solve(f);
  if (!u.allFinite()) fail(ErrorCode::SingularSystem, "Dirichlet solve produced non-finite values");
  return u;
}

/// L u = f for an operator whose principal eigenvalue is certified positive.
///
/// Refuses with EigenvalueNotPositive unless lambda > 3 * residual. When
/// f <= 0 and f is not identically zero the solution must be positive; a
/// violation is reported as NegativeSolution.
inline Vector solve_linear(const DiscreteOperator& op, const Vector& f, const EigenResult& eig) {
  if (!(eig.lambda > 3.0 * eig.residual))
    fail(ErrorCode::EigenvalueNotPositive,
         "principal eigenvalue " + std::to_string(eig.lambda) + " is not certified positive");
  Vector u = solve_dirichlet(op.L, f);
  if (op.is_monotone_scheme && (f.array() <= 0.0).all() && (f.array() < 0.0).any())
    for (Eigen::Index i = 0; i < u.size(); ++i)
      if (!(u[i] > 0.0))
        fail(ErrorCode::NegativeSolution, "solution is not positive at unknown " + std::to_string(i));
  return u;
}

inline Vector solve_linear(const DiscreteOperator& op, const Vector& f) {
  return solve_linear(op, f, principal_eig(op));
}

}  // namespace nls
