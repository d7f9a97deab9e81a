#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <nonlocal_spectra/operator.hpp>

using namespace nls;

namespace {

constexpr double kPi = M_PI;

template <class F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

double entry(const SparseMatrix& m, int i, int j) { return m.coeff(i, j); }

std::string coo(const SparseMatrix& m) {
  std::ostringstream os;
  write_coo(os, m);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// build_grid

TEST(BuildGrid, IntervalQuarterSpacingHasThreeInteriorNodes) {
  const SpatialGrid g = build_grid(Domain::interval(0.0, kPi), kPi / 4, 0.0);
  ASSERT_EQ(g.num_interior(), 3u);
  EXPECT_NEAR(g.interior_point(0)[0], kPi / 4, 1e-15);
  EXPECT_NEAR(g.interior_point(1)[0], kPi / 2, 1e-15);
  EXPECT_NEAR(g.interior_point(2)[0], 3 * kPi / 4, 1e-15);
}

TEST(BuildGrid, UnitDiskHalfSpacingContainsEveryLatticePointOfTheOpenDisk) {
  // |x| < 1 on 0.5 Z^2: the centre, four axis points and four diagonal points (|x| = 0.707).
  const SpatialGrid g = build_grid(Domain::ball(2, 1.0), 0.5, 0.0);
  ASSERT_EQ(g.num_interior(), 9u);
  for (std::size_t p = 0; p < g.num_interior(); ++p) {
    const Point& x = g.interior_point(p);
    EXPECT_LT(x.norm(), 1.0);
    EXPECT_LE(std::abs(x[0]), 0.5);
    EXPECT_LE(std::abs(x[1]), 0.5);
  }
}

TEST(BuildGrid, RejectsBadSpacing) {
  expect_error(ErrorCode::InvalidSpacing, [] { build_grid(Domain::interval(0, 1), 0.0, 0.0); });
  expect_error(ErrorCode::InvalidSpacing, [] { build_grid(Domain::interval(0, 1), -0.1, 0.0); });
  expect_error(ErrorCode::InvalidSpacing, [] { build_grid(Domain::interval(0, 1), std::nan(""), 0.0); });
}

TEST(BuildGrid, EmptyInteriorAndSmallHalo) {
  expect_error(ErrorCode::EmptyInterior, [] { build_grid(Domain::interval(0.1, 0.2), 0.5, 0.0); });
  expect_error(ErrorCode::HaloTooSmall, [] { build_grid(Domain::interval(0, 1), 0.1, 0.5, 1.0); });
}

TEST(BuildGrid, InteriorNodesAreStrictlyInsideAndLexicographic) {
  const Domain D = Domain::box(Point(-1.0, -0.5), Point(1.0, 0.5));
  const SpatialGrid g = build_grid(D, 0.25, 0.5);
  Point prev(-1e9, -1e9);
  for (const Node& n : g.nodes()) {
    const bool later = n.x[0] > prev[0] || (n.x[0] == prev[0] && n.x[1] > prev[1]);
    EXPECT_TRUE(later);
    prev = n.x;
    if (n.kind == NodeKind::Interior) {
      EXPECT_TRUE(D.contains(n.x));
    }
  }
  // Unknown indices form a bijection onto 0..N-1.
  std::vector<int> seen(g.num_interior(), 0);
  for (std::size_t id = 0; id < g.num_nodes(); ++id)
    if (g.unknown_of(id) >= 0) ++seen[static_cast<std::size_t>(g.unknown_of(id))];
  for (int s : seen) EXPECT_EQ(s, 1);
}

// ---------------------------------------------------------------------------
// assemble_local

TEST(AssembleLocal, LaplacianRowsAreTheCentralDifferenceStencil) {
  const double h = kPi / 20;
  const DiscreteOperator op = assemble_on(Domain::interval(0, kPi), h, Coefficients::laplacian(1), JumpKernel::none());
  const int n = static_cast<int>(op.size());
  ASSERT_EQ(n, 19);
  const double s = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    EXPECT_DOUBLE_EQ(entry(op.L, i, i), -2 * s);
    if (i > 0) {
      EXPECT_DOUBLE_EQ(entry(op.L, i, i - 1), s);
    }
    if (i + 1 < n) {
      EXPECT_DOUBLE_EQ(entry(op.L, i, i + 1), s);
    }
  }
  // Boundary-adjacent rows lose their outside neighbour from L; it sits in B.
  EXPECT_EQ(entry(op.L, 0, 1), s);
  EXPECT_EQ(Vector(op.L.row(0).transpose()).sum(), -s);
  EXPECT_DOUBLE_EQ(op.B.row(0).sum(), s);
  EXPECT_TRUE(op.is_monotone_scheme);
}

TEST(AssembleLocal, ConstantPotentialOnlyShiftsTheDiagonal) {
  const Domain D = Domain::interval(0, kPi);
  const double h = kPi / 30, c0 = 0.7;
  const DiscreteOperator a = assemble_on(D, h, Coefficients::laplacian(1), JumpKernel::none());
  const DiscreteOperator b = assemble_on(D, h, Coefficients::constant(1, 1.0, Vector2::Zero(), c0), JumpKernel::none());
  const SparseMatrix diff = b.L - a.L;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      if (it.row() == it.col())
        EXPECT_NEAR(it.value(), c0, 1e-12);
      else
        EXPECT_EQ(it.value(), 0.0);
    }
}

TEST(AssembleLocal, UpwindDriftKeepsOffDiagonalsNonnegativeAtEverySpacing) {
  for (double bval : {5.0, -5.0}) {
    for (double h : {0.5, 0.2, 0.1, 0.05, 0.01}) {
      const DiscreteOperator op =
          assemble_on(Domain::interval(0, 3), h, Coefficients::constant(1, 1.0, Vector2(bval, 0)), JumpKernel::none());
      for (int k = 0; k < op.L.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(op.L, k); it; ++it)
          if (it.row() != it.col()) {
            EXPECT_GE(it.value(), 0.0) << "h=" << h << " b=" << bval;
          }
      EXPECT_TRUE(op.is_monotone_scheme);
    }
  }
}

TEST(AssembleLocal, RejectsNonSymmetricAndDegenerateDiffusion) {
  Coefficients nonsym = Coefficients::laplacian(2);
  nonsym.a = [](const Point&) {
    Matrix2 m;
    m << 1.0, 0.2, 0.0, 1.0;
    return m;
  };
  expect_error(ErrorCode::NonSymmetricA,
               [&] { assemble_on(Domain::ball(2, 1.0), 0.25, nonsym, JumpKernel::none()); });
  Coefficients degenerate = Coefficients::constant(1, 0.0);
  expect_error(ErrorCode::EllipticityViolated,
               [&] { assemble_on(Domain::interval(0, 1), 0.1, degenerate, JumpKernel::none()); });
  Coefficients bounded = Coefficients::constant(1, 5.0);
  bounded.kappa = 0.5;  // spectrum must stay within [0.5, 2]
  expect_error(ErrorCode::EllipticityViolated,
               [&] { assemble_on(Domain::interval(0, 1), 0.1, bounded, JumpKernel::none()); });
}

TEST(AssembleLocal, LaplacianOfSineConvergesAtSecondOrder) {
  std::vector<double> err;
  for (double h : {kPi / 20, kPi / 40, kPi / 80}) {
    const DiscreteOperator op =
        assemble_on(Domain::interval(0, kPi), h, Coefficients::laplacian(1), JumpKernel::none());
    Vector u(static_cast<Eigen::Index>(op.size())), exact(u.size());
    for (std::size_t p = 0; p < op.size(); ++p) {
      u[p] = std::sin(op.grid->interior_point(p)[0]);
      exact[p] = -u[p];
    }
    err.push_back((op.L * u - exact).lpNorm<Eigen::Infinity>());
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) EXPECT_GE(std::log2(err[i] / err[i + 1]), 1.9);
}

TEST(AssembleLocal, MixedDerivativeIsExactOnBilinearData) {
  // trace(a D^2)(x1 x2) = 2 a12 for the 7-point scheme, with exterior data supplied through B.
  Coefficients co = Coefficients::laplacian(2);
  co.a = [](const Point&) {
    Matrix2 m;
    m << 1.0, 0.4, 0.4, 1.0;
    return m;
  };
  const DiscreteOperator op = assemble_on(Domain::ball(2, 1.0), 0.1, co, JumpKernel::none());
  const SpatialGrid& g = *op.grid;
  Vector u(static_cast<Eigen::Index>(g.num_interior())), ext(static_cast<Eigen::Index>(g.num_exterior()));
  for (std::size_t p = 0; p < g.num_interior(); ++p) u[p] = g.interior_point(p)[0] * g.interior_point(p)[1];
  for (std::size_t e = 0; e < g.num_exterior(); ++e) ext[e] = g.exterior_point(e)[0] * g.exterior_point(e)[1];
  const Vector r = op.apply(u, ext);
  for (Eigen::Index p = 0; p < r.size(); ++p) EXPECT_NEAR(r[p], 0.8, 1e-9);
  EXPECT_TRUE(op.is_monotone_scheme);
}

// ---------------------------------------------------------------------------
// assemble_nonlocal / assemble_operator

TEST(AssembleNonlocal, AtomOnGridNodeGivesTwoPointDifference) {
  const double h = 0.1, beta = 1.5;
  const JumpKernel k = JumpKernel::atomic({{Point(2 * h, 0), beta}});
  const DiscreteOperator full = assemble_on(Domain::interval(0, 1), h, Coefficients::laplacian(1), k);
  const DiscreteOperator local =
      assemble_on(Domain::interval(0, 1), h, Coefficients::laplacian(1), k, OperatorVariant::LocalA);
  const SparseMatrix d = full.L - local.L;
  const int n = static_cast<int>(full.size());
  for (int i = 0; i < n; ++i) {
    if (i + 2 < n) {
      EXPECT_NEAR(entry(d, i, i + 2), beta, 1e-14);
      EXPECT_NEAR(full.gain_mass[i], beta, 1e-14);
    } else {
      EXPECT_NEAR(full.leak[i], beta, 1e-14);
    }
    EXPECT_NEAR(entry(local.L, i, i) - entry(full.local, i, i), -beta, 1e-12);
  }
}

TEST(AssembleNonlocal, OutJumpingAtomOnlyShiftsTheDiagonal) {
  const double beta = 2.0;
  const JumpKernel k = JumpKernel::atomic({{Point(10.0, 0), beta}});
  const DiscreteOperator full = assemble_on(Domain::interval(0, kPi), kPi / 50, Coefficients::laplacian(1), k);
  const DiscreteOperator full_none =
      assemble_on(Domain::interval(0, kPi), kPi / 50, Coefficients::laplacian(1), JumpKernel::none());
  const DiscreteOperator local = assemble_on(Domain::interval(0, kPi), kPi / 50, Coefficients::laplacian(1), k,
                                             OperatorVariant::LocalA);
  const SparseMatrix d = full.L - full_none.L;
  for (int kk = 0; kk < d.outerSize(); ++kk)
    for (SparseMatrix::InnerIterator it(d, kk); it; ++it) {
      if (it.row() == it.col())
        EXPECT_NEAR(it.value(), -beta, 1e-12);
      else
        EXPECT_EQ(it.value(), 0.0);
    }
  EXPECT_EQ(coo(full.L), coo(local.L));
}

TEST(AssembleNonlocal, UniformDensityMassApproachesTwo) {
  const JumpKernel k = JumpKernel::translation_invariant([](const Point&) { return 1.0; }, 1.0);
  for (double h : {0.1, 0.05, 0.02, 0.01}) {
    const DiscreteOperator op = assemble_on(Domain::interval(-3, 3), h, Coefficients::laplacian(1), k);
    for (double m : op.nu) EXPECT_NEAR(m, 2.0, 1.01 * h);
  }
}

TEST(AssembleNonlocal, RowConservationIsExact) {
  const JumpKernel k = JumpKernel::translation_invariant([](const Point& z) { return std::exp(-z.squaredNorm()); }, 0.73);
  const DiscreteOperator op = assemble_on(Domain::ball(2, 1.0), 0.1, Coefficients::laplacian(2), k);
  const SparseMatrix nonlocal = op.L - op.local;
  for (std::size_t p = 0; p < op.size(); ++p) {
    const int i = static_cast<int>(p);
    const double gain_row = Vector(op.gain.row(i).transpose()).sum();
    EXPECT_NEAR(gain_row, op.gain_mass[p], 1e-13);
    EXPECT_NEAR(op.nu[p], op.gain_mass[p] + op.leak[p], 1e-13 * op.nu[p]);
    EXPECT_NEAR(entry(nonlocal, i, i), entry(op.gain, i, i) - op.nu[p], 1e-13);
  }
  // Applied to the constant 1 inside and outside, the operator returns c = 0.
  const Vector one = Vector::Ones(static_cast<Eigen::Index>(op.size()));
  const Vector ext = Vector::Ones(op.B.cols());
  EXPECT_LT(op.apply(one, ext).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(AssembleNonlocal, RejectsNegativeWeightsAndSupportBeyondHalo) {
  expect_error(ErrorCode::NegativeWeight, [] { JumpKernel::atomic({{Point(0.1, 0), -1.0}}); });
  const JumpKernel neg = JumpKernel::translation_invariant([](const Point&) { return -1.0; }, 0.5);
  expect_error(ErrorCode::NegativeWeight,
               [&] { assemble_on(Domain::interval(0, 1), 0.1, Coefficients::laplacian(1), neg); });
  const SpatialGrid g = build_grid(Domain::interval(0, 1), 0.1, 0.2);
  const JumpKernel wide = JumpKernel::atomic({{Point(0.5, 0), 1.0}});
  expect_error(ErrorCode::SupportExceedsHalo, [&] { assemble_nonlocal(g, wide); });
}

TEST(AssembleOperator, NoKernelMakesBothVariantsIdentical) {
  const DiscreteOperator a = assemble_on(Domain::interval(0, 2), 0.05, Coefficients::laplacian(1), JumpKernel::none());
  const DiscreteOperator b = assemble_on(Domain::interval(0, 2), 0.05, Coefficients::laplacian(1), JumpKernel::none(),
                                         OperatorVariant::LocalA);
  EXPECT_EQ(coo(a.L), coo(b.L));
  EXPECT_EQ(coo(a.B), coo(b.B));
}

TEST(AssembleOperator, GainDifferenceIsNonnegativeOnNonnegativeVectors) {
  const JumpKernel k =
      JumpKernel::density([](const Point& x, const Point& z) { return 1.0 + std::abs(x[0]) + z[0] * z[0]; },
                          [](const Point& x) { return 0.3 + 0.1 * std::abs(x[0]); });
  const Domain D = Domain::interval(0, 2.1);
  const double h = 0.1;
  const DiscreteOperator full = assemble_on(D, h, Coefficients::laplacian(1), k);
  const DiscreteOperator local = assemble_on(D, h, Coefficients::laplacian(1), k, OperatorVariant::LocalA);
  ASSERT_EQ(full.size(), 20u);
  const SparseMatrix d = full.L - local.L;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector u(20);
    for (Eigen::Index i = 0; i < 20; ++i) u[i] = U(rng) < 0.3 ? 0.0 : U(rng);
    const Vector r = d * u;
    for (Eigen::Index i = 0; i < 20; ++i) EXPECT_GE(r[i], 0.0);
  }
}

TEST(AssembleOperator, MinimalShiftMakesTheMatrixNonnegative) {
  Coefficients co = Coefficients::constant(1, 1.0, Vector2(2.0, 0.0));
  co.c = [](const Point& x) { return std::sin(3 * x[0]); };
  const DiscreteOperator op = assemble_on(Domain::interval(0, 2), 0.05, co, JumpKernel::none());
  ASSERT_TRUE(op.is_monotone_scheme);
  double min_diag = 1e300;
  for (int i = 0; i < op.L.rows(); ++i) min_diag = std::min(min_diag, entry(op.L, i, i));
  EXPECT_DOUBLE_EQ(op.min_shift, -min_diag);
  for (int k = 0; k < op.L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(op.L, k); it; ++it) {
      const double v = it.value() + (it.row() == it.col() ? op.min_shift : 0.0);
      EXPECT_GE(v, 0.0);
    }
}

TEST(AssembleOperator, AssemblyIsBitwiseDeterministic) {
  const JumpKernel k = JumpKernel::translation_invariant([](const Point& z) { return 1.0 / (1.0 + z.norm()); }, 0.6);
  auto build = [&] { return assemble_on(Domain::ball(2, 1.3), 0.1, Coefficients::laplacian(2), k); };
  const DiscreteOperator a = build(), b = build();
  EXPECT_EQ(coo(a.L), coo(b.L));
  EXPECT_EQ(coo(a.B), coo(b.B));
}

TEST(AssembleOperator, CoordinateExportIsSortedAndZeroBased) {
  const DiscreteOperator op =
      assemble_on(Domain::interval(0, 1), 0.25, Coefficients::laplacian(1), JumpKernel::none());
  std::istringstream in(coo(op.L));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "row col value");
  std::vector<std::pair<int, int>> idx;
  int r, c;
  double v;
  while (in >> r >> c >> v) idx.emplace_back(r, c);
  ASSERT_EQ(idx.size(), 7u);
  EXPECT_EQ(idx.front(), std::make_pair(0, 0));
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
}
