#pragma once

#include "nonlocal_spectra/eigen.hpp"

namespace nls {

/// Coefficients, kernel and discretisation shared by every truncation of one problem.
struct Problem {
  int dim = 1;
  Coefficients coeffs = Coefficients::laplacian(1);
  JumpKernel kernel = JumpKernel::none();
  double h = 0.05;
  OperatorVariant variant = OperatorVariant::FullI;
  EigenOptions eig;

  static Problem make(int dim, Coefficients coeffs, JumpKernel kernel, double h) {
    Problem p;
    p.dim = dim;
    p.coeffs = std::move(coeffs);
    p.kernel = std::move(kernel);
    p.h = h;
    return p;
  }

  DiscreteOperator on(const Domain& domain, double extra_halo = 0.0) const {
    if (domain.dim() != dim) fail(ErrorCode::InconsistentInput, "domain dimension differs from problem dimension");
    return assemble_on(domain, h, coeffs, kernel, variant, extra_halo);
  }

  Problem with_variant(OperatorVariant v) const {
    Problem p = *this;
    p.variant = v;
    return p;
  }

  Problem with_h(double new_h) const {
    Problem p = *this;
    p.h = new_h;
    return p;
  }

  Problem plus_potential(std::function<double(const Point&)> extra) const {
    Problem p = *this;
    p.coeffs = coeffs.plus_potential(std::move(extra));
    return p;
  }

  /// Sup of c over the interior nodes of a domain.
  double max_c(const Domain& domain) const { return on(domain).max_c(); }
};

}  // namespace nls
