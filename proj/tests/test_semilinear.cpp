#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nonlocal_spectra/semilinear.hpp>

using namespace nls;

namespace {

constexpr double kPi = M_PI;

DiscreteOperator on_zero_pi(double h, double c0 = 0.0) {
  return assemble_on(Domain::interval(0, kPi), h, Coefficients::constant(1, 1.0, Vector2::Zero(), c0), JumpKernel::none());
}

Vector constant(const DiscreteOperator& op, double v) { return Vector::Constant(static_cast<Eigen::Index>(op.size()), v); }

// Logistic fixture: L = Laplacian + 2 on (0, pi), lambda = -1, f(u) = 2 u^2.
struct Logistic {
  DiscreteOperator op = on_zero_pi(kPi / 100, 2.0);
  Nonlinearity f = [](const Point&, double u) { return 2.0 * u * u; };
  Nonlinearity dfdu = [](const Point&, double u) { return 4.0 * u; };
  Vector sub, super;

  Logistic() {
    const EigenResult e = principal_eig(op);
    // Scale so that |sub| = min(1, -lambda / |c|).
    sub = e.psi / e.psi.maxCoeff() * std::min(1.0, -e.lambda / 2.0);
    super = constant(op, 1.0);
  }
};

}  // namespace

TEST(SolveLinear, PositiveSolutionForNegativeSource) {
  const DiscreteOperator op = on_zero_pi(kPi / 200);
  const Vector u = solve_linear(op, constant(op, -1.0));
  EXPECT_GT(u.minCoeff(), 0.0);
  EXPECT_NEAR(u.maxCoeff(), kPi * kPi / 8, 0.01 * kPi * kPi / 8);
  for (std::size_t p = 0; p < op.size(); ++p) {
    const double x = op.grid->interior_point(p)[0];
    EXPECT_NEAR(u[p], x * (kPi - x) / 2, 1e-8);
  }
}

TEST(SolveLinear, ZeroSourceAndRefusal) {
  const DiscreteOperator op = on_zero_pi(kPi / 50);
  EXPECT_EQ(solve_linear(op, constant(op, 0.0)).lpNorm<Eigen::Infinity>(), 0.0);
  const DiscreteOperator bad = on_zero_pi(kPi / 50, 2.0);
  try {
    solve_linear(bad, constant(bad, -1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EigenvalueNotPositive);
  }
}

TEST(SolveLinear, ComparisonForOrderedSources) {
  const JumpKernel k = JumpKernel::translation_invariant([](const Point&) { return 1.0; }, 0.4);
  const DiscreteOperator op = assemble_on(Domain::interval(0, 3), 0.05, Coefficients::laplacian(1), k);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector f1(static_cast<Eigen::Index>(op.size())), f2(f1.size());
    for (Eigen::Index i = 0; i < f1.size(); ++i) {
      f2[i] = -U(rng);
      f1[i] = f2[i] - U(rng) * U(rng);
    }
    const Vector d = solve_linear(op, f1) - solve_linear(op, f2);
    EXPECT_GE(d.minCoeff(), -1e-12);
  }
}

TEST(MonotoneIterate, AffineNonlinearityIsALinearSolve) {
  const DiscreteOperator op = on_zero_pi(kPi / 80);
  const Nonlinearity g = [](const Point& x, double) { return -1.0 - std::sin(x[0]); };
  Vector gv(static_cast<Eigen::Index>(op.size()));
  for (std::size_t p = 0; p < op.size(); ++p) gv[p] = g(op.grid->interior_point(p), 0.0);
  const Vector exact = solve_linear(op, gv);
  MonotoneOptions opt;
  opt.theta = 0.0;
  const MonotoneSolution s = monotone_iterate(op, g, constant(op, 0.0), 2.0 * exact, opt);
  EXPECT_LE(s.trace.iterates.size(), 3u);
  EXPECT_LT((s.u - exact).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(MonotoneIterate, LogisticConvergesAndMatchesNewton) {
  const Logistic lg;
  const MonotoneSolution s = monotone_iterate(lg.op, lg.f, lg.sub, lg.super);
  EXPECT_LE(s.trace.residuals.back(), 1e-8);
  EXPECT_GE((s.u - lg.sub).minCoeff(), 0.0);
  EXPECT_LE(s.u.maxCoeff(), 1.0);
  const Vector newton = newton_solve(lg.op, lg.f, lg.dfdu, s.u);
  EXPECT_LT((newton - s.u).lpNorm<Eigen::Infinity>(), 1e-6);
  for (std::size_t i = 0; i + 1 < s.trace.iterates.size(); ++i)
    EXPECT_GE((s.trace.iterates[i + 1] - s.trace.iterates[i]).minCoeff(), 0.0) << "step " << i;
}

TEST(MonotoneIterate, LimitIsAFixedPoint) {
  const Logistic lg;
  MonotoneOptions opt;
  opt.tol = 1e-9;
  const MonotoneSolution s = monotone_iterate(lg.op, lg.f, lg.sub, lg.super, opt);
  const double theta = s.trace.theta;
  SparseMatrix M = lg.op.L;
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it)
      if (it.row() == it.col()) it.valueRef() -= theta;
  Eigen::SparseLU<SparseMatrix> lu(M);
  Vector fu(s.u.size());
  for (Eigen::Index p = 0; p < fu.size(); ++p) fu[p] = lg.f(Point::Zero(), s.u[p]);
  const Vector again = lu.solve(Vector(fu - theta * s.u));
  // One step moves u by at most the residual divided by the smallest eigenvalue of theta - L.
  EXPECT_LE((again - s.u).lpNorm<Eigen::Infinity>(), 2 * opt.tol);
}

TEST(MonotoneIterate, LimitDoesNotDependOnTheShift) {
  const Logistic lg;
  MonotoneOptions a, b;
  a.theta = 5.0;
  b.theta = 9.0;
  const MonotoneSolution sa = monotone_iterate(lg.op, lg.f, lg.sub, lg.super, a);
  const MonotoneSolution sb = monotone_iterate(lg.op, lg.f, lg.sub, lg.super, b);
  EXPECT_EQ(sa.trace.theta, 5.0);
  EXPECT_EQ(sb.trace.theta, 9.0);
  EXPECT_LT((sa.u - sb.u).lpNorm<Eigen::Infinity>(), 10 * a.tol);
}

TEST(MonotoneIterate, ShiftBelowTheLipschitzConstantIsRaised) {
  const Logistic lg;
  MonotoneOptions o;
  o.theta = 1.0;
  const MonotoneSolution s = monotone_iterate(lg.op, lg.f, lg.sub, lg.super, o);
  EXPECT_GE(s.trace.theta, 4.0);
}

TEST(MonotoneIterate, RejectsPairsThatAreNotOrderedSubAndSuper) {
  const Logistic lg;
  auto code_of = [&](const Vector& sub, const Vector& super) {
    try {
      monotone_iterate(lg.op, lg.f, sub, super);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Internal;
  };
  EXPECT_EQ(code_of(lg.super, lg.sub), ErrorCode::OrderingBroken);
  // A constant close to 1 violates the subsolution inequality next to the boundary.
  EXPECT_EQ(code_of(constant(lg.op, 0.9), lg.super), ErrorCode::OrderingBroken);
  // 0.5 is not a supersolution: L 0.5 = 1 > f(0.5) = 0.5 in the interior.
  EXPECT_EQ(code_of(lg.sub * 0.1, constant(lg.op, 0.5)), ErrorCode::OrderingBroken);
}

TEST(MonotoneIterate, ReportsNotConverged) {
  const Logistic lg;
  MonotoneOptions o;
  o.max_iter = 3;
  try {
    monotone_iterate(lg.op, lg.f, lg.sub, lg.super, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConverged);
  }
}
